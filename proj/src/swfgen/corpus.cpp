#include "abc_builder.hpp"

#include "swfsec/rng.hpp"
#include "swfsec/swfgen.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <sstream>

namespace swfsec::swfgen {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            return parts;
        start = pos + 1;
    }
}

template <typename T>
T parse_number(std::string_view s, const std::string& where) {
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw Error(ErrorCode::ConfigError, where + ": bad number '" + std::string(s) + "'");
    return v;
}

bool valid_feature(const std::string& name) {
    if (features::structural_index(name))
        return true;
    try {
        detail::split_ref(name);
        return true;
    } catch (const Error&) {
        return false;
    }
}

} // namespace

CorpusConfig CorpusConfig::parse(std::string_view text) {
    CorpusConfig cfg;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const std::string where = "corpus config line " + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::ConfigError, where + ": expected '<name> = <values>'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (key == "@years") {
            const auto parts = split(value, '-');
            if (parts.size() != 2)
                throw Error(ErrorCode::ConfigError, where + ": expected <first>-<last>");
            cfg.first_year = parse_number<int>(parts[0], where);
            cfg.last_year = parse_number<int>(parts[1], where);
        } else if (key == "@drift_year") {
            cfg.drift_year = parse_number<int>(value, where);
        } else {
            if (!valid_feature(key))
                throw Error(ErrorCode::ConfigError, where + ": unknown feature '" + key + "'");
            const auto parts = split(value, ',');
            if (parts.size() < 2 || parts.size() > 3)
                throw Error(ErrorCode::ConfigError, where + ": expected two or three rates");
            FeatureRates r;
            r.benign = parse_number<double>(parts[0], where);
            r.malicious = parse_number<double>(parts[1], where);
            if (parts.size() == 3)
                r.drifted = parse_number<double>(parts[2], where);
            if (r.benign < 0 || r.malicious < 0 || (r.drifted && *r.drifted < 0))
                throw Error(ErrorCode::ConfigError, where + ": rates must be non-negative");
            if (!cfg.rates.emplace(key, r).second)
                throw Error(ErrorCode::ConfigError, where + ": duplicate feature '" + key + "'");
        }
    }
    if (cfg.first_year > cfg.last_year)
        throw Error(ErrorCode::ConfigError, "corpus config: empty year range");
    return cfg;
}

CorpusConfig CorpusConfig::load(const std::string& path) {
    return parse(read_text_file(path));
}

CorpusConfig CorpusConfig::load_default() {
    return load(std::string(SWFSEC_DATA_DIR) + "/corpus_config.txt");
}

FileProfile sample_profile(const CorpusConfig& cfg, int label, int year, std::uint64_t seed) {
    Rng rng(seed);
    FileProfile p;
    p.label = label;
    p.seed = rng.next();
    bool has_api = false;
    for (const auto& [name, r] : cfg.rates) {
        double lambda = r.benign;
        if (label > 0)
            lambda = r.drifted && year >= cfg.drift_year ? *r.drifted : r.malicious;
        const int n = rng.poisson(lambda);
        if (features::structural_index(name)) {
            p.structural_plan[name] = n;
        } else if (n > 0) {
            p.api_plan[name] = n;
            has_api = true;
        }
    }
    // API references and extra errors live in an ABC, which takes a Scripts unit.
    if ((has_api || p.structural_plan["Errors"] > 1) && p.structural_plan["Scripts"] == 0)
        p.structural_plan["Scripts"] = 1;

    const double u = rng.uniform();
    if (u < 0.6) {
        p.compression = swf::Compression::Zlib;
    } else if (u < 0.9 || !swf::lzma_supported()) {
        p.compression = swf::Compression::None;
    } else {
        p.compression = swf::Compression::Lzma;
    }
    p.version = p.compression == swf::Compression::Lzma ? 13 : static_cast<std::uint8_t>(9 + rng.index(3));
    return p;
}

std::vector<CorpusEntry> generate_corpus(const CorpusConfig& cfg, std::size_t n_benign, std::size_t n_malicious,
                                         std::uint64_t seed, const features::TagTable& table,
                                         const abc::ApiWhitelist& whitelist) {
    std::vector<CorpusEntry> out;
    out.reserve(n_benign + n_malicious);
    const auto span = static_cast<std::size_t>(cfg.last_year - cfg.first_year + 1);
    auto make = [&](int label, std::size_t i) {
        const std::uint64_t s = derive_seed(seed, {label > 0 ? 1u : 2u, i});
        Rng rng(s);
        const int year = cfg.first_year + static_cast<int>(rng.index(span));
        const FileProfile p = sample_profile(cfg, label, year, rng.next());
        char name[32];
        std::snprintf(name, sizeof name, "%s_%05zu.swf", label > 0 ? "malicious" : "benign", i);
        out.push_back({name, generate(p, table, whitelist), label, year});
    };
    for (std::size_t i = 0; i < n_benign; ++i)
        make(-1, i);
    for (std::size_t i = 0; i < n_malicious; ++i)
        make(1, i);
    return out;
}

void write_corpus(const std::string& dir, const std::vector<CorpusEntry>& corpus) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorCode::IoError, dir + ": " + ec.message());
    std::ostringstream labels;
    labels << "file,label,year\n";
    for (const auto& e : corpus) {
        write_file(dir + "/" + e.name, e.bytes);
        labels << e.name << ',' << e.label << ',' << e.year << '\n';
    }
    write_text_file(dir + "/labels.csv", labels.str());
}

std::vector<CorpusEntry> read_corpus(const std::string& dir) {
    const std::string text = read_text_file(dir + "/labels.csv");
    std::vector<CorpusEntry> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view l = trim(line);
        if (l.empty() || (line_no == 1 && l.rfind("file,", 0) == 0))
            continue;
        const std::string where = dir + "/labels.csv line " + std::to_string(line_no);
        const auto parts = split(l, ',');
        if (parts.size() < 2 || parts.size() > 3)
            throw Error(ErrorCode::FormatError, where + ": expected file,label[,year]");
        CorpusEntry e;
        e.name = std::string(parts[0]);
        try {
            e.label = parse_number<int>(parts[1], where);
            e.year = parts.size() == 3 && !parts[2].empty() ? parse_number<int>(parts[2], where) : 0;
        } catch (const Error& err) {
            throw Error(ErrorCode::FormatError, err.what());
        }
        if (e.label != 1 && e.label != -1)
            throw Error(ErrorCode::FormatError, where + ": label must be 1 or -1");
        e.bytes = read_file(dir + "/" + e.name);
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace swfsec::swfgen
