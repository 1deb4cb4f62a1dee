#include "swfsec/features.hpp"

#include <sstream>

namespace swfsec::features {

namespace {

constexpr std::string_view kDefaultTable = R"(
Frames: 1
Shapes: 2,22,32,83
Sounds: 14,18,45,19
BinaryData: 87
Scripts: 82,72,59,12
Fonts: 10,48,75,91,13,62,88,1005
Sprites: 39
MorphShapes: 46,84
Texts: 11,33,37
Images: 6,8,20,21,35,36,90
Videos: 60,61
Buttons: 7,34
Known: 0,4,5,9,15,17,23,24,25,26,28,40,41,43,56,57,58,63,64,65,66,69,70,71,73,74,76,77,78,86,89,92,93,94
)";

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

std::optional<std::size_t> structural_index(std::string_view name) {
    for (std::size_t i = 0; i < kStructuralCount; ++i)
        if (kStructuralNames[i] == name)
            return i;
    return std::nullopt;
}

void TagTable::assign(std::uint32_t code, int target, int line) {
    if (code > 1023)
        throw Error(ErrorCode::ConfigError, "tag table line " + std::to_string(line) + ": code " +
                                                std::to_string(code) + " does not fit a tag header");
    auto [it, inserted] = table_.emplace(code, target);
    if (!inserted && it->second != target)
        throw Error(ErrorCode::ConfigError, "tag table line " + std::to_string(line) + ": code " +
                                                std::to_string(code) + " listed twice");
}

TagTable TagTable::parse(std::string_view text) {
    TagTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        if (trim(line).empty())
            continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw Error(ErrorCode::ConfigError, "tag table line " + std::to_string(lineno) + ": missing ':'");
        const std::string name = trim(std::string_view(line).substr(0, colon));
        int target;
        if (name == "Known") {
            target = kKnown;
        } else {
            auto idx = structural_index(name);
            if (!idx || *idx == Errors || *idx == Unknown)
                throw Error(ErrorCode::ConfigError, "tag table line " + std::to_string(lineno) +
                                                        ": '" + name + "' cannot be mapped to tag codes");
            target = static_cast<int>(*idx);
        }
        std::istringstream codes(line.substr(colon + 1));
        std::string item;
        while (std::getline(codes, item, ',')) {
            const std::string c = trim(item);
            if (c.empty())
                continue;
            std::size_t used = 0;
            unsigned long v = 0;
            try {
                v = std::stoul(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != c.size())
                throw Error(ErrorCode::ConfigError, "tag table line " + std::to_string(lineno) + ": bad code '" + c + "'");
            t.assign(static_cast<std::uint32_t>(v), target, lineno);
        }
    }
    return t;
}

TagTable TagTable::load(const std::string& path) {
    return parse(read_text_file(path));
}

TagTable TagTable::defaults() {
    static const TagTable table = parse(kDefaultTable);
    return table;
}

int TagTable::lookup(std::uint32_t code) const {
    auto it = table_.find(code);
    return it == table_.end() ? kUnknown : it->second;
}

std::vector<std::uint32_t> TagTable::codes_for(std::size_t feature) const {
    std::vector<std::uint32_t> out;
    for (const auto& [code, target] : table_)
        if (target == static_cast<int>(feature))
            out.push_back(code);
    return out;
}

std::uint32_t TagTable::unused_code() const {
    for (std::uint32_t code = 200; code < 1024; ++code)
        if (!table_.count(code))
            return code;
    throw Error(ErrorCode::UnrealizablePlan, "tag table leaves no unused code");
}

std::int64_t RawFeatureVector::value(const std::string& name) const {
    if (auto idx = structural_index(name))
        return structural[*idx];
    auto it = api.find(name);
    return it == api.end() ? 0 : it->second;
}

void RawFeatureVector::add(const std::string& name, std::int64_t units) {
    if (units == 0)
        return;
    if (auto idx = structural_index(name)) {
        structural[*idx] += units;
        return;
    }
    if ((api[name] += units) == 0)
        api.erase(name);
}

std::array<std::int64_t, kStructuralCount> structural_counts(const swf::SwfDocument& doc, const TagTable& table,
                                                             std::int64_t abc_errors) {
    std::array<std::int64_t, kStructuralCount> out{};
    for (const auto& tag : doc.tags) {
        const int slot = table.lookup(tag.code);
        if (slot >= 0)
            ++out[static_cast<std::size_t>(slot)];
        else if (slot == TagTable::kUnknown)
            ++out[Unknown];
    }
    out[Errors] = static_cast<std::int64_t>(doc.parse_errors) + (doc.decompress_failed ? 1 : 0) + abc_errors;
    return out;
}

std::map<std::string, std::int64_t> api_counts(const abc::NameOccurrenceCounts& counts) {
    std::map<std::string, std::int64_t> out;
    for (const auto& [name, n] : counts.class_counts)
        if (n > 0)
            out["class:" + name] = n;
    for (const auto& [name, n] : counts.method_counts)
        if (n > 0)
            out["method:" + name] = n;
    return out;
}

RawFeatureVector extract(const swf::SwfDocument& doc, const TagTable& table, const abc::ApiWhitelist& whitelist) {
    abc::NameOccurrenceCounts names;
    for (const auto& tag : doc.tags) {
        if (tag.code != abc::kTagDoAbc && tag.code != abc::kTagDoAbcDefine)
            continue;
        auto payload = abc::abc_payload(tag.code, tag.body);
        if (!payload) {
            ++names.body_scan_errors;
            continue;
        }
        names.merge(abc::scan_abc(*payload, whitelist));
    }
    RawFeatureVector raw;
    raw.structural = structural_counts(doc, table, names.body_scan_errors);
    raw.api = api_counts(names);
    return raw;
}

RawFeatureVector extract(ByteView swf_bytes, const TagTable& table, const abc::ApiWhitelist& whitelist) {
    return extract(swf::parse(swf_bytes), table, whitelist);
}

std::string feature_csv(const std::vector<std::string>& names, const std::vector<std::string>& files,
                        const std::vector<int>& labels, const Matrix& values) {
    std::string out = "file,label";
    for (const auto& n : names)
        out += "," + n;
    out += "\n";
    for (std::size_t r = 0; r < values.rows(); ++r) {
        out += files[r] + "," + std::to_string(labels[r]);
        for (double v : values.row(r))
            out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

} // namespace swfsec::features
