#pragma once

// Injection-only evasion in capped-count space: L1 budget k, box [x, v_max].

#include "swfsec/features.hpp"
#include "swfsec/learn.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace swfsec::evasion {

enum class Knowledge { PerfectKnowledge, SurrogateLearner, SurrogateData };
enum class InitUsed { FromSource, FromBenign };

const char* to_string(Knowledge k);
const char* to_string(InitUsed i);

struct AttackConfig {
    int k = 50;
    int v_max = 10;
    double epsilon = 1e-6;
    int max_iters = 0; ///< 0 means 5 * feature count
    Knowledge knowledge = Knowledge::PerfectKnowledge;
    bool dual_init = true;
    bool polish = true; ///< integer swap search after rounding
    std::uint64_t seed = 0; ///< picks the benign starting point
};

struct AttackResult {
    std::vector<double> x_source;
    std::vector<double> x_adv;
    double f_before = 0.0;
    double f_after = 0.0;
    bool evaded = false; ///< f_after <= threshold of the attacked model
    std::map<std::string, int> injected;
    int iterations = 0;
    InitUsed init_used = InitUsed::FromSource;
};

/// The attacked function: model decision composed with the feature
/// transform, as a function of capped counts.
class Objective {
public:
    Objective(const learn::Model& model, const features::FeatureSpace& space, bool normalize = true);

    std::size_t dim() const noexcept { return space_->size(); }
    const learn::Model& model() const noexcept { return *model_; }
    const features::FeatureSpace& space() const noexcept { return *space_; }
    bool normalized() const noexcept { return normalize_; }

    double value(std::span<const double> counts) const;
    /// Chain rule through the normalization. At the zero vector, where the
    /// normalization has no derivative, unit-injection differences are used.
    /// Throws NotDifferentiable for forests.
    std::vector<double> gradient(std::span<const double> counts) const;

private:
    const learn::Model* model_;
    const features::FeatureSpace* space_;
    bool normalize_;
};

/// Euclidean projection of p onto {x <= x' <= v_max, sum(x' - x) <= k}.
std::vector<double> project_feasible(std::span<const double> p, std::span<const double> x, double k, double v_max);

/// Floors the injections, then adds single units while f strictly decreases.
std::vector<double> round_and_repair(std::span<const double> x_cont, std::span<const double> x, int k, int v_max,
                                     const Objective& f);

/// Gradient descent attack. `benign_pool` holds capped benign training
/// vectors; a seeded random one starts the second descent. May be empty.
AttackResult evade(const Objective& f, std::span<const double> x, const AttackConfig& cfg,
                   const Matrix& benign_pool = Matrix());

/// Adds the single best unit up to k times, stopping when no unit lowers f.
/// An independent reference, not used by evade.
AttackResult greedy_evade_oracle(const Objective& f, std::span<const double> x, int k, int v_max);

/// Checks injection-only, cap and budget; returns a description of the first violation or "".
std::string check_feasible(std::span<const double> x_source, std::span<const double> x_adv, int k, int v_max);

struct BatchResult {
    int k = 0;
    std::vector<AttackResult> results; ///< in sample order
    double detection_rate = 0.0;       ///< target model on x_adv, at its threshold
};

/// Attacks every row of `malicious` (capped counts) for each k, optimizing
/// `attacked` and scoring with `target` (which may be the same model).
/// Row i at budget k uses seed derive_seed(base.seed, {k, i}).
std::vector<BatchResult> attack_batch(const Objective& attacked, const learn::Pipeline& target,
                                      const Matrix& malicious, const std::vector<int>& k_list,
                                      const AttackConfig& base, const Matrix& benign_pool = Matrix());

/// One JSON object per line: sample_id, k, f_before, f_after, evaded, injected, iterations, init_used.
std::string trace_jsonl(const std::vector<BatchResult>& batches, const std::vector<std::string>& sample_ids);

} // namespace swfsec::evasion
