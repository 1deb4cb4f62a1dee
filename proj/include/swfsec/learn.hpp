#pragma once

// Classifiers (linear SVM, RBF SVM, random forest), SMO, cross-validation,
// ROC evaluation and model persistence.

#include "swfsec/common.hpp"
#include "swfsec/features.hpp"
#include "swfsec/rng.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace swfsec::learn {

enum class ModelKind { LinearSvm, RbfSvm, RandomForest };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct Hyperparams {
    double c = 1.0;
    double gamma = 0.1;     ///< RBF only
    int trees = 100;        ///< forest only
    std::uint64_t seed = 0; ///< forest bootstrap / feature sampling
};

// -- kernels and SMO ------------------------------------------------------------

/// Pairwise squared Euclidean distances between rows.
Matrix squared_distances(const Matrix& x);
Matrix linear_gram(const Matrix& x);
/// exp(-gamma * d) elementwise.
Matrix rbf_from_distances(const Matrix& sq_dist, double gamma);

struct SmoResult {
    std::vector<double> alpha;
    double rho = 0.0;     ///< f(x) = sum alpha_i y_i K(x_i, x) - rho
    double kkt_gap = 0.0; ///< maximal violating pair gap at exit
    std::size_t iterations = 0;
};

/// Soft-margin SVM dual by SMO with second-order working set selection.
/// Throws NonConvergence after `max_iterations` pair updates.
SmoResult solve_smo(const Matrix& gram, std::span<const int> y, double c, double eps = 1e-3,
                    std::size_t max_iterations = 1'000'000);

// -- trees ----------------------------------------------------------------------

struct TreeNode {
    int feature = -1; ///< -1 marks a leaf
    double threshold = 0.0;
    int left = -1;    ///< x[feature] <= threshold
    int right = -1;
    double value = 0.0; ///< malicious fraction of the training rows reaching this node
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    double predict(std::span<const double> x) const;
    std::size_t depth() const;
};

struct TreeParams {
    std::size_t mtry = 0;     ///< features examined per split; 0 means all
    std::size_t min_leaf = 1;
    std::size_t max_depth = 0; ///< 0 means unlimited
};

/// Grows a Gini tree on `rows` (duplicates allowed, as in a bootstrap sample).
DecisionTree grow_tree(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                       const TreeParams& params, Rng& rng);

/// Weighted Gini impurity of a two-way split, as minimized by grow_tree.
double split_impurity(std::size_t left_pos, std::size_t left_n, std::size_t right_pos, std::size_t right_n);

// -- models ---------------------------------------------------------------------

class Model {
public:
    ModelKind kind = ModelKind::LinearSvm;
    Hyperparams params;
    std::size_t dim = 0;
    double threshold = 0.0; ///< operating point: malicious iff decision > threshold

    // SVMs: f(x) = sum coef_i K(sv_i, x) + bias
    Matrix support;
    std::vector<double> coef; ///< alpha_i * y_i
    double bias = 0.0;
    std::vector<double> weights; ///< linear only, sum coef_i sv_i

    std::vector<DecisionTree> trees;

    bool differentiable() const noexcept { return kind != ModelKind::RandomForest; }
    double decision(std::span<const double> x) const;
    /// Throws NotDifferentiable for forests.
    std::vector<double> gradient(std::span<const double> x) const;
    bool predict(std::span<const double> x) const { return decision(x) > threshold; }
};

/// Throws DegenerateTraining when a class is missing.
Model train(ModelKind kind, const Matrix& x, std::span<const int> y, const Hyperparams& params);

/// Same as train for SVMs, reusing a precomputed Gram matrix of `x`.
Model train_svm_with_gram(ModelKind kind, const Matrix& x, std::span<const int> y, const Matrix& gram,
                          const Hyperparams& params);

std::vector<double> decisions(const Model& model, const Matrix& x);

// -- evaluation -----------------------------------------------------------------

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0; ///< positives are scores strictly above it
};

struct EvalReport {
    std::vector<RocPoint> roc;
    double auc = 0.0;
    std::map<double, double> dr_at_fpr;
};

/// Labels are +1 malicious, -1 benign.
EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                           const std::vector<double>& fpr_targets = {0.05});
EvalReport evaluate(const Model& model, const Matrix& x, std::span<const int> labels,
                    const std::vector<double>& fpr_targets = {0.05});

/// Lowest threshold whose false-positive rate on `benign_scores` is <= target.
double threshold_at_fpr(std::span<const double> benign_scores, double target);
/// Fraction of scores strictly above `threshold`.
double detection_rate(std::span<const double> scores, double threshold);

// -- model selection ------------------------------------------------------------

std::vector<Hyperparams> default_grid(ModelKind kind);

/// Stratified fold id per sample, deterministic in `seed`.
std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed);

struct CvResult {
    Hyperparams best;
    std::vector<double> mean_auc; ///< per grid point; NaN where training failed
};

/// Picks the grid point with highest mean fold AUC; the earliest point wins ties.
CvResult cross_validate(ModelKind kind, const Matrix& x, std::span<const int> y,
                        const std::vector<Hyperparams>& grid, std::uint64_t seed, int folds = 5);

// -- persistence ----------------------------------------------------------------

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

/// A fitted feature space plus a model trained in its output space.
struct Pipeline {
    features::FeatureSpace space;
    Model model;
    bool normalize = true;

    std::vector<double> features(const features::RawFeatureVector& raw) const {
        return space.transform(raw, normalize);
    }
    double decision(const features::RawFeatureVector& raw) const { return model.decision(features(raw)); }
};

/// Writes a versioned JSON file with `probes` and their decision values.
void save_pipeline(const std::string& path, const Pipeline& pipeline, const Matrix& probes);
/// Reloads and re-evaluates the stored probes; throws FormatError on any bit difference.
Pipeline load_pipeline(const std::string& path);

} // namespace swfsec::learn
