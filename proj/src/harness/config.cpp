#include "swfsec/harness.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

namespace swfsec::harness {

namespace {

// Shortest text that parses back to the same double.
std::string shortest(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T number(std::string_view s, const std::string& where) {
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size())
        throw Error(ErrorCode::ConfigError, where + ": bad number '" + std::string(s) + "'");
    return v;
}

template <typename T>
std::vector<T> list(std::string_view s, const std::function<T(std::string_view)>& item) {
    std::vector<T> out;
    if (trim(s).empty())
        return out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(',', start);
        out.push_back(item(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start))));
        if (pos == std::string_view::npos)
            return out;
        start = pos + 1;
    }
}

bool boolean(std::string_view s, const std::string& where) {
    if (s == "true" || s == "1")
        return true;
    if (s == "false" || s == "0")
        return false;
    throw Error(ErrorCode::ConfigError, where + ": expected true or false");
}

template <typename T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& fmt) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i)
        out += (i ? "," : "") + fmt(items[i]);
    return out;
}

void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
    if (!(c.split_fraction > 0.0 && c.split_fraction < 1.0))
        fail("split_fraction must lie in (0, 1)");
    if (c.repeats < 1)
        fail("repeats must be positive");
    if (c.c_grid.empty() || c.gamma_grid.empty())
        fail("empty hyperparameter grid");
    for (double v : c.c_grid)
        if (!(v > 0.0))
            fail("c_grid entries must be positive");
    for (double v : c.gamma_grid)
        if (!(v > 0.0))
            fail("gamma_grid entries must be positive");
    if (c.classifiers.empty())
        fail("no classifiers configured");
    for (int k : c.k_list)
        if (k < 0)
            fail("k_list entries must be non-negative");
    for (int k : c.retrain_k)
        if (k < 1)
            fail("retrain_k entries must be positive");
    if (!(c.fpr_target > 0.0 && c.fpr_target < 1.0))
        fail("fpr_target must lie in (0, 1)");
    if (c.retrain_samples < 0 || c.attack_samples < 0 || c.features < 1 || c.v_max < 1 || c.cv_folds < 2 || c.forest_trees < 1 ||
        !(c.attack_epsilon > 0.0) || c.attack_max_iters < 0 || c.corpus_benign < 0 || c.corpus_malicious < 0)
        fail("numeric setting out of range");
}

} // namespace

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
    ExperimentConfig c;
    std::size_t start = 0, line_no = 0;
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
        const std::string where = "config line " + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::ConfigError, where + ": expected '<key> = <value>'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view v = trim(line.substr(eq + 1));
        auto ints = [&](std::string_view s) { return number<int>(s, where); };

        if (key == "seed")
            c.seed = number<std::uint64_t>(v, where);
        else if (key == "split_fraction")
            c.split_fraction = number<double>(v, where);
        else if (key == "repeats")
            c.repeats = number<int>(v, where);
        else if (key == "classifiers")
            c.classifiers = list<learn::ModelKind>(v, [&](std::string_view s) {
                try {
                    return learn::model_kind_from_string(std::string(s));
                } catch (const Error&) {
                    throw Error(ErrorCode::ConfigError, where + ": unknown classifier '" + std::string(s) + "'");
                }
            });
        else if (key == "k_list")
            c.k_list = list<int>(v, ints);
        else if (key == "attack_samples")
            c.attack_samples = number<int>(v, where);
        else if (key == "fpr_target")
            c.fpr_target = number<double>(v, where);
        else if (key == "retrain")
            c.retrain = boolean(v, where);
        else if (key == "retrain_samples")
            c.retrain_samples = number<int>(v, where);
        else if (key == "retrain_k")
            c.retrain_k = list<int>(v, ints);
        else if (key == "temporal_cut_year")
            c.temporal_cut_year = v == "none" ? std::nullopt : std::optional<int>(number<int>(v, where));
        else if (key == "features")
            c.features = number<int>(v, where);
        else if (key == "v_max")
            c.v_max = number<int>(v, where);
        else if (key == "cv_folds")
            c.cv_folds = number<int>(v, where);
        else if (key == "c_grid")
            c.c_grid = list<double>(v, [&](std::string_view s) { return number<double>(s, where); });
        else if (key == "gamma_grid")
            c.gamma_grid = list<double>(v, [&](std::string_view s) { return number<double>(s, where); });
        else if (key == "grid_search")
            c.grid_search = boolean(v, where);
        else if (key == "forest_trees")
            c.forest_trees = number<int>(v, where);
        else if (key == "attack_epsilon")
            c.attack_epsilon = number<double>(v, where);
        else if (key == "attack_max_iters")
            c.attack_max_iters = number<int>(v, where);
        else if (key == "attack_polish")
            c.attack_polish = boolean(v, where);
        else if (key == "dual_init")
            c.dual_init = boolean(v, where);
        else if (key == "lk_mode") {
            if (v == "surrogate_learner")
                c.lk_mode = LkMode::SurrogateLearner;
            else if (v == "surrogate_data")
                c.lk_mode = LkMode::SurrogateData;
            else
                throw Error(ErrorCode::ConfigError, where + ": lk_mode is surrogate_learner or surrogate_data");
        } else if (key == "corpus_benign")
            c.corpus_benign = number<int>(v, where);
        else if (key == "corpus_malicious")
            c.corpus_malicious = number<int>(v, where);
        else
            throw Error(ErrorCode::ConfigError, where + ": unknown key '" + key + "'");
    }
    validate(c);
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return parse(read_text_file(path));
}

std::string ExperimentConfig::to_text() const {
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    auto i = [](const int& v) { return std::to_string(v); };
    auto dbl = [](const double& v) { return shortest(v); };
    std::ostringstream o;
    o << "seed = " << seed << "\n"
      << "split_fraction = " << shortest(split_fraction) << "\n"
      << "repeats = " << repeats << "\n"
      << "classifiers = "
      << join<learn::ModelKind>(classifiers, [](const learn::ModelKind& k) { return learn::to_string(k); }) << "\n"
      << "k_list = " << join<int>(k_list, i) << "\n"
      << "attack_samples = " << attack_samples << "\n"
      << "fpr_target = " << shortest(fpr_target) << "\n"
      << "retrain = " << b(retrain) << "\n"
      << "retrain_samples = " << retrain_samples << "\n"
      << "retrain_k = " << join<int>(retrain_k, i) << "\n"
      << "temporal_cut_year = " << (temporal_cut_year ? std::to_string(*temporal_cut_year) : "none") << "\n"
      << "features = " << features << "\n"
      << "v_max = " << v_max << "\n"
      << "cv_folds = " << cv_folds << "\n"
      << "c_grid = " << join<double>(c_grid, dbl) << "\n"
      << "gamma_grid = " << join<double>(gamma_grid, dbl) << "\n"
      << "grid_search = " << b(grid_search) << "\n"
      << "forest_trees = " << forest_trees << "\n"
      << "attack_epsilon = " << shortest(attack_epsilon) << "\n"
      << "attack_max_iters = " << attack_max_iters << "\n"
      << "attack_polish = " << b(attack_polish) << "\n"
      << "dual_init = " << b(dual_init) << "\n"
      << "lk_mode = " << (lk_mode == LkMode::SurrogateLearner ? "surrogate_learner" : "surrogate_data") << "\n"
      << "corpus_benign = " << corpus_benign << "\n"
      << "corpus_malicious = " << corpus_malicious << "\n";
    return o.str();
}

std::string ExperimentConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_text()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace swfsec::harness
