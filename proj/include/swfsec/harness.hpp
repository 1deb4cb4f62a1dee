#pragma once

// Experiment orchestration: repeated train/test splits, adversarial security
// curves, retraining with attack samples, temporal evaluation and reports.

#include "swfsec/evasion.hpp"
#include "swfsec/features.hpp"
#include "swfsec/learn.hpp"
#include "swfsec/swfgen.hpp"
#include "swfsec/vulnmetrics.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace swfsec::harness {

inline constexpr const char* kVersion = "1.0.0";

enum class LkMode { SurrogateLearner, SurrogateData };

/// Flat `key = value` text; see to_text() for every key.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    double split_fraction = 0.5;
    int repeats = 5;
    std::vector<learn::ModelKind> classifiers{learn::ModelKind::LinearSvm, learn::ModelKind::RbfSvm,
                                              learn::ModelKind::RandomForest};
    std::vector<int> k_list{0, 25, 50, 100, 150};
    int attack_samples = 0; ///< malicious test samples attacked per repeat; 0 means all
    double fpr_target = 0.05;
    bool retrain = true;
    int retrain_samples = 1000;
    std::vector<int> retrain_k{50, 100, 150};
    std::optional<int> temporal_cut_year;
    int features = 50;
    int v_max = 10;
    int cv_folds = 5;
    std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
    std::vector<double> gamma_grid{0.001, 0.01, 0.1, 1.0, 10.0};
    bool grid_search = true; ///< false: C = 1 (linear) or 10 (RBF), gamma = 1, no cross-validation
    int forest_trees = 100;
    double attack_epsilon = 1e-6;
    int attack_max_iters = 0;
    bool attack_polish = true;
    bool dual_init = true;
    LkMode lk_mode = LkMode::SurrogateLearner;
    int corpus_benign = 1000;
    int corpus_malicious = 1000;

    static ExperimentConfig parse(std::string_view text);
    static ExperimentConfig load(const std::string& path);
    /// Canonical text; parse(to_text()) reproduces the config.
    std::string to_text() const;
    /// FNV-1a of to_text().
    std::string hash() const;
};

/// Extracted corpus: raw vectors with labels, ids and years (0 when unknown).
struct Dataset {
    std::vector<std::string> ids;
    std::vector<features::RawFeatureVector> raw;
    std::vector<int> labels;
    std::vector<int> years;

    std::size_t size() const { return raw.size(); }
};

Dataset extract_dataset(const std::vector<swfgen::CorpusEntry>& corpus, const features::TagTable& table,
                        const abc::ApiWhitelist& whitelist);

/// One fitted classifier of one repeat: pipeline with its clean-data threshold.
struct TrainedClassifier {
    learn::Pipeline pipeline;
    learn::EvalReport clean;
};

struct RepeatState {
    std::vector<std::size_t> train, test;
    features::FeatureSpace space;
    Matrix train_capped, test_capped;
    std::vector<int> train_labels, test_labels;
    std::map<std::string, TrainedClassifier> classifiers; ///< by classifier id
};

struct RocSummary {
    std::string classifier;
    std::vector<double> fpr;
    std::vector<double> tpr_mean, tpr_std;
    double auc_mean = 0.0, auc_std = 0.0;
    double dr_mean = 0.0, dr_std = 0.0; ///< at fpr_target
};

struct CurvePoint {
    int k = 0;
    double dr_mean = 0.0, dr_std = 0.0;
};

struct SecurityCurve {
    std::string classifier;
    std::string knowledge; ///< PK, LK-SL or LK-SD
    std::string attacked;  ///< model whose decision function was optimized
    std::vector<CurvePoint> points;
};

struct MimicryRow {
    std::string target;
    int k = 0;
    vulnmetrics::VulnReport mean; ///< fields averaged over repeats
};

struct TemporalRow {
    std::string classifier;
    double accuracy = 0.0;
    std::size_t n_test = 0;
};

struct Results {
    std::vector<RocSummary> roc;
    std::vector<SecurityCurve> curves;
    std::vector<MimicryRow> mimicry;
    std::vector<TemporalRow> temporal;
    std::optional<int> temporal_cut_year;
    std::size_t corpus_size = 0;

    bool empty() const { return roc.empty() && curves.empty() && mimicry.empty() && temporal.empty(); }
};

struct StandardRun {
    std::vector<RepeatState> repeats;
    std::vector<RocSummary> roc;
};

/// Splits, fits the feature space on training data, cross-validates and trains
/// every configured classifier, sets thresholds on clean benign test scores.
/// Throws CorpusTooSmall.
StandardRun run_standard(const ExperimentConfig& cfg, const Dataset& data);

/// Adds the `_adv` variants of the RBF SVM and forest to every repeat.
void run_retraining(const ExperimentConfig& cfg, StandardRun& run);

struct AdversarialRun {
    std::vector<SecurityCurve> curves;
    std::vector<MimicryRow> mimicry;
};

AdversarialRun run_adversarial(const ExperimentConfig& cfg, const StandardRun& run);

/// Trains on benign samples plus malicious ones before the cut year, tests on
/// malicious samples from the cut year on. Throws NoTemporalMetadata.
std::vector<TemporalRow> run_temporal(const ExperimentConfig& cfg, const Dataset& data, int cut_year);

/// Everything the config asks for.
Results run_all(const ExperimentConfig& cfg, const Dataset& data);

/// Writes the report files present in `results` plus manifest.json; returns
/// the file names written. Throws IoError.
std::vector<std::string> emit_reports(const Results& results, const ExperimentConfig& cfg, const std::string& out_dir);

} // namespace swfsec::harness
