#include "swfsec/vulnmetrics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace swfsec::vulnmetrics {

GaussianSummary fit_gaussian(const Matrix& samples) {
    const std::size_t n = samples.rows();
    if (n < 2)
        throw Error(ErrorCode::TooFewSamples, "Gaussian fit needs at least two samples");
    const std::size_t k = samples.cols();
    GaussianSummary g;
    g.n = n;
    g.mean.assign(k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
            g.mean[j] += samples(i, j);
    for (double& m : g.mean)
        m /= static_cast<double>(n);
    double var_sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = samples(i, j) - g.mean[j];
            ss += d * d;
        }
        var_sum += ss / static_cast<double>(n - 1);
    }
    g.sigma2 = std::max(kVarianceFloor, k == 0 ? 0.0 : var_sum / static_cast<double>(k));
    return g;
}

double pooled_variance(const GaussianSummary& a, const GaussianSummary& b) {
    const double da = static_cast<double>(a.n) - 1.0;
    const double db = static_cast<double>(b.n) - 1.0;
    return std::max(kVarianceFloor, (da * a.sigma2 + db * b.sigma2) / (da + db));
}

Overlap bhattacharyya(const GaussianSummary& a, const GaussianSummary& b) {
    if (a.mean.size() != b.mean.size())
        throw Error(ErrorCode::DimensionMismatch, "summaries differ in dimension");
    const double s2 = pooled_variance(a, b);
    Overlap o;
    o.d_b = squared_distance(a.mean, b.mean) / (8.0 * s2);
    o.bc = std::exp(-o.d_b);
    return o;
}

Overlap bhattacharyya_diagonal(std::span<const double> mean_a, std::span<const double> var_a,
                               std::span<const double> mean_b, std::span<const double> var_b) {
    const std::size_t k = mean_a.size();
    if (var_a.size() != k || mean_b.size() != k || var_b.size() != k)
        throw Error(ErrorCode::DimensionMismatch, "diagonal summaries differ in dimension");
    double quad = 0.0, log_det = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double va = std::max(kVarianceFloor, var_a[j]);
        const double vb = std::max(kVarianceFloor, var_b[j]);
        const double avg = 0.5 * (va + vb);
        const double d = mean_a[j] - mean_b[j];
        quad += d * d / avg;
        // log of det(avg) / sqrt(det(a) det(b)), one diagonal entry at a time
        log_det += std::log(avg) - 0.5 * (std::log(va) + std::log(vb));
    }
    Overlap o;
    o.d_b = quad / 8.0 + 0.5 * log_det;
    o.bc = std::exp(-o.d_b);
    return o;
}

VulnReport mimicry(const Matrix& benign, const Matrix& malicious_before, const Matrix& malicious_after) {
    if (benign.cols() != malicious_before.cols() || benign.cols() != malicious_after.cols())
        throw Error(ErrorCode::DimensionMismatch, "sample sets differ in dimension");
    const GaussianSummary b = fit_gaussian(benign);
    const Overlap before = bhattacharyya(b, fit_gaussian(malicious_before));
    const Overlap after = bhattacharyya(b, fit_gaussian(malicious_after));
    VulnReport r;
    r.bc_before = before.bc;
    r.bc_after = after.bc;
    r.d_b_before = before.d_b;
    r.d_b_after = after.d_b;
    r.m = 0.5 * r.bc_after - 0.5 * r.bc_before;
    return r;
}

std::string to_json(const VulnReport& r) {
    nlohmann::ordered_json j;
    j["bc_before"] = r.bc_before;
    j["bc_after"] = r.bc_after;
    j["d_b_before"] = r.d_b_before;
    j["d_b_after"] = r.d_b_after;
    j["m"] = r.m;
    return j.dump();
}

} // namespace swfsec::vulnmetrics
