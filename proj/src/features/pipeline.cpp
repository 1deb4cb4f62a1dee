#include "swfsec/features.hpp"

#include <algorithm>
#include <cmath>

namespace swfsec::features {

std::vector<FeatureScore> FeatureSpace::rank(const std::vector<RawFeatureVector>& samples,
                                             const std::vector<int>& labels,
                                             const std::vector<std::string>& extra_candidates) {
    if (samples.size() != labels.size())
        throw Error(ErrorCode::DimensionMismatch, "samples and labels differ in length");
    std::size_t n_pos = 0, n_neg = 0;
    for (int y : labels)
        (y > 0 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw Error(ErrorCode::DegenerateTraining, "feature selection needs both classes");

    struct Tally {
        std::size_t pos = 0, neg = 0;
        std::int64_t total = 0;
    };
    std::map<std::string, Tally> tally;
    for (auto name : kStructuralNames)
        tally[std::string(name)];
    for (const auto& name : extra_candidates)
        tally[name];

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const bool malicious = labels[i] > 0;
        for (std::size_t f = 0; f < kStructuralCount; ++f) {
            const std::int64_t v = samples[i].structural[f];
            if (v <= 0)
                continue;
            Tally& t = tally[std::string(kStructuralNames[f])];
            (malicious ? t.pos : t.neg)++;
            t.total += v;
        }
        for (const auto& [name, v] : samples[i].api) {
            if (v <= 0)
                continue;
            Tally& t = tally[name];
            (malicious ? t.pos : t.neg)++;
            t.total += v;
        }
    }

    std::vector<FeatureScore> scores;
    scores.reserve(tally.size());
    for (const auto& [name, t] : tally) {
        const double p_pos = static_cast<double>(t.pos) / static_cast<double>(n_pos);
        const double p_neg = static_cast<double>(t.neg) / static_cast<double>(n_neg);
        scores.push_back({name, std::fabs(p_pos - p_neg), t.total});
    }
    std::sort(scores.begin(), scores.end(), [](const FeatureScore& a, const FeatureScore& b) {
        if (a.score != b.score)
            return a.score > b.score;
        if (a.total != b.total)
            return a.total > b.total;
        return a.name < b.name;
    });
    return scores;
}

FeatureSpace FeatureSpace::fit(const std::vector<RawFeatureVector>& samples, const std::vector<int>& labels,
                               std::size_t k, int v_max, const std::vector<std::string>& extra_candidates) {
    if (k == 0 || v_max <= 0)
        throw Error(ErrorCode::ConfigError, "feature count and cap must be positive");
    const auto scores = rank(samples, labels, extra_candidates);
    std::vector<std::string> selected;
    for (std::size_t i = 0; i < scores.size() && selected.size() < k; ++i)
        selected.push_back(scores[i].name);

    FeatureSpace space = from_parts(selected, v_max, std::vector<double>(selected.size(), 1.0));
    const double n = static_cast<double>(samples.size());
    for (std::size_t j = 0; j < selected.size(); ++j) {
        std::size_t df = 0;
        for (const auto& s : samples)
            if (s.value(selected[j]) > 0)
                ++df;
        space.idf_[j] = std::log((1.0 + n) / (1.0 + static_cast<double>(df))) + 1.0;
    }
    return space;
}

FeatureSpace FeatureSpace::from_parts(std::vector<std::string> selected, int v_max, std::vector<double> idf) {
    if (selected.size() != idf.size())
        throw Error(ErrorCode::DimensionMismatch, "idf length differs from feature count");
    FeatureSpace s;
    for (std::size_t i = 0; i < selected.size(); ++i)
        if (!s.index_.emplace(selected[i], i).second)
            throw Error(ErrorCode::FormatError, "duplicate feature '" + selected[i] + "'");
    s.selected_ = std::move(selected);
    s.idf_ = std::move(idf);
    s.v_max_ = v_max;
    s.fitted_ = true;
    return s;
}

void FeatureSpace::require_fitted() const {
    if (!fitted_)
        throw Error(ErrorCode::NotFitted, "feature space used before fitting");
}

std::optional<std::size_t> FeatureSpace::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

std::vector<double> FeatureSpace::capped(const RawFeatureVector& raw) const {
    require_fitted();
    std::vector<double> out(selected_.size());
    for (std::size_t j = 0; j < selected_.size(); ++j)
        out[j] = static_cast<double>(std::min<std::int64_t>(raw.value(selected_[j]), v_max_));
    return out;
}

std::vector<double> FeatureSpace::normalize(std::span<const double> c) const {
    require_fitted();
    if (c.size() != selected_.size())
        throw Error(ErrorCode::DimensionMismatch, "vector length " + std::to_string(c.size()));
    std::vector<double> u(c.size());
    double sq = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        u[j] = c[j] * idf_[j];
        sq += u[j] * u[j];
    }
    if (sq == 0.0)
        return u;
    const double norm = std::sqrt(sq);
    for (double& v : u)
        v /= norm;
    return u;
}

std::vector<double> FeatureSpace::transform(const RawFeatureVector& raw, bool normalize_output) const {
    auto c = capped(raw);
    return normalize_output ? normalize(c) : c;
}

Matrix FeatureSpace::jacobian(std::span<const double> c) const {
    require_fitted();
    const std::size_t k = selected_.size();
    if (c.size() != k)
        throw Error(ErrorCode::DimensionMismatch, "vector length " + std::to_string(c.size()));
    std::vector<double> u(k);
    double n2 = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        u[j] = c[j] * idf_[j];
        n2 += u[j] * u[j];
    }
    if (n2 == 0.0)
        throw Error(ErrorCode::ZeroVector, "normalization is not differentiable at zero");
    const double n = std::sqrt(n2);
    const double n3 = n2 * n;
    Matrix jac(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            jac(i, j) = idf_[j] * ((i == j ? n2 : 0.0) - u[i] * u[j]) / n3;
    return jac;
}

nlohmann::json FeatureSpace::to_json() const {
    require_fitted();
    return {{"selected", selected_}, {"v_max", v_max_}, {"idf", idf_}};
}

FeatureSpace FeatureSpace::from_json(const nlohmann::json& j) {
    try {
        return from_parts(j.at("selected").get<std::vector<std::string>>(), j.at("v_max").get<int>(),
                          j.at("idf").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, std::string("feature space: ") + e.what());
    }
}

} // namespace swfsec::features
