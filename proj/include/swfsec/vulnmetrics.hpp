#pragma once

// Gaussian class-overlap measures: Bhattacharyya distance and coefficient,
// and the mimicry parameter comparing overlap before and after an attack.

#include "swfsec/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace swfsec::vulnmetrics {

inline constexpr double kVarianceFloor = 1e-12;

struct GaussianSummary {
    std::vector<double> mean;
    double sigma2 = kVarianceFloor; ///< mean of the per-feature unbiased variances
    std::size_t n = 0;
};

/// Throws TooFewSamples for fewer than two rows.
GaussianSummary fit_gaussian(const Matrix& samples);

/// Pooled isotropic variance of two summaries, weighted by degrees of freedom.
double pooled_variance(const GaussianSummary& a, const GaussianSummary& b);

struct Overlap {
    double d_b = 0.0;
    double bc = 1.0;
};

/// Shared covariance sigma^2 I with sigma^2 pooled from both summaries.
Overlap bhattacharyya(const GaussianSummary& a, const GaussianSummary& b);

/// General formula for diagonal covariances (variances per feature).
Overlap bhattacharyya_diagonal(std::span<const double> mean_a, std::span<const double> var_a,
                               std::span<const double> mean_b, std::span<const double> var_b);

struct VulnReport {
    double bc_before = 0.0;
    double bc_after = 0.0;
    double d_b_before = 0.0;
    double d_b_after = 0.0;
    double m = 0.0; ///< bc_after / 2 - bc_before / 2
};

VulnReport mimicry(const Matrix& benign, const Matrix& malicious_before, const Matrix& malicious_after);

std::string to_json(const VulnReport& r);

} // namespace swfsec::vulnmetrics
