#include "swfsec/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace swfsec::harness {

namespace {

using learn::ModelKind;

// RNG stream tags under derive_seed(cfg.seed, {repeat, tag, ...})
enum Stream : std::uint64_t { kSplit = 1, kCv = 2, kForest = 3, kRetrainPick = 4, kSurrogate = 5, kAttackPick = 6, kAttack = 7 };
constexpr std::uint64_t kTemporalRepeat = 1000;

std::string id_of(ModelKind kind, bool adv = false) {
    return std::string(learn::to_string(kind)) + (adv ? "_adv" : "");
}

bool has(const ExperimentConfig& cfg, ModelKind kind) {
    return std::find(cfg.classifiers.begin(), cfg.classifiers.end(), kind) != cfg.classifiers.end();
}

Matrix capped_rows(const features::FeatureSpace& space, const Dataset& data, const std::vector<std::size_t>& idx) {
    Matrix m;
    for (auto i : idx)
        m.append_row(space.capped(data.raw[i]));
    return m;
}

Matrix normalized_rows(const features::FeatureSpace& space, const Matrix& capped) {
    Matrix m;
    for (std::size_t r = 0; r < capped.rows(); ++r)
        m.append_row(space.normalize(capped.row(r)));
    return m;
}

Matrix rows_with_label(const Matrix& m, const std::vector<int>& labels, int label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label)
            idx.push_back(i);
    return m.select_rows(idx);
}

learn::Hyperparams fixed_params(ModelKind kind, const ExperimentConfig& cfg) {
    learn::Hyperparams hp;
    hp.c = kind == ModelKind::RbfSvm ? 10.0 : 1.0;
    hp.gamma = 1.0;
    hp.trees = cfg.forest_trees;
    return hp;
}

learn::Model fit_model(ModelKind kind, const Matrix& z, const std::vector<int>& y, const ExperimentConfig& cfg,
                       std::uint64_t repeat) {
    learn::Hyperparams hp = fixed_params(kind, cfg);
    if (cfg.grid_search && kind != ModelKind::RandomForest) {
        std::vector<learn::Hyperparams> grid;
        for (double c : cfg.c_grid) {
            if (kind == ModelKind::LinearSvm)
                grid.push_back({c, 0.0, 0, 0});
            else
                for (double g : cfg.gamma_grid)
                    grid.push_back({c, g, 0, 0});
        }
        const auto cv = learn::cross_validate(kind, z, y, grid,
                                              derive_seed(cfg.seed, {repeat, kCv, static_cast<std::uint64_t>(kind)}),
                                              cfg.cv_folds);
        hp = cv.best;
    }
    hp.trees = cfg.forest_trees;
    hp.seed = derive_seed(cfg.seed, {repeat, kForest});
    return learn::train(kind, z, y, hp);
}

learn::Pipeline refit(const learn::Model& like, const features::FeatureSpace& space, const Matrix& z,
                      const std::vector<int>& y) {
    return {space, learn::train(like.kind, z, y, like.params), true};
}

/// Sets the threshold from clean benign test scores and evaluates on the test set.
TrainedClassifier calibrate(learn::Pipeline p, const Matrix& z_test, const std::vector<int>& y_test,
                            double fpr_target) {
    const auto scores = learn::decisions(p.model, z_test);
    std::vector<double> benign;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (y_test[i] < 0)
            benign.push_back(scores[i]);
    p.model.threshold = learn::threshold_at_fpr(benign, fpr_target);
    auto report = learn::evaluate_scores(scores, y_test, {fpr_target});
    return {std::move(p), std::move(report)};
}

double dr_on(const learn::Pipeline& p, const Matrix& capped) {
    if (capped.empty())
        return 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < capped.rows(); ++r)
        if (p.model.predict(p.space.normalize(capped.row(r))))
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(capped.rows());
}

evasion::AttackConfig attack_config(const ExperimentConfig& cfg, evasion::Knowledge knowledge, std::uint64_t seed) {
    evasion::AttackConfig a;
    a.seed = seed;
    a.v_max = cfg.v_max;
    a.epsilon = cfg.attack_epsilon;
    a.max_iters = cfg.attack_max_iters;
    a.polish = cfg.attack_polish;
    a.dual_init = cfg.dual_init;
    a.knowledge = knowledge;
    return a;
}

/// Attack points per k (one matrix per entry of `k_list`).
std::vector<Matrix> attack_points(const learn::Pipeline& attacked, const Matrix& malicious,
                                  const std::vector<int>& k_list, const evasion::AttackConfig& acfg,
                                  const Matrix& benign_pool) {
    const evasion::Objective obj(attacked.model, attacked.space, attacked.normalize);
    const auto batches = evasion::attack_batch(obj, attacked, malicious, k_list, acfg, benign_pool);
    std::vector<Matrix> out;
    for (const auto& b : batches) {
        Matrix m;
        for (const auto& r : b.results)
            m.append_row(r.x_adv);
        out.push_back(std::move(m));
    }
    return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty())
        return {0.0, 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2)
        return {mean, 0.0};
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

RocSummary summarize_roc(const std::string& id, const std::vector<RepeatState>& repeats, double fpr_target) {
    RocSummary s;
    s.classifier = id;
    std::vector<double> aucs, drs;
    std::vector<std::vector<double>> tprs;
    for (int i = 0; i <= 100; ++i)
        s.fpr.push_back(i / 100.0);
    for (const auto& st : repeats) {
        const auto& rep = st.classifiers.at(id).clean;
        aucs.push_back(rep.auc);
        drs.push_back(rep.dr_at_fpr.at(fpr_target));
        std::vector<double> t;
        for (double f : s.fpr) {
            double best = 0.0;
            for (const auto& p : rep.roc)
                if (p.fpr <= f + 1e-12)
                    best = std::max(best, p.tpr);
            t.push_back(best);
        }
        tprs.push_back(std::move(t));
    }
    for (std::size_t j = 0; j < s.fpr.size(); ++j) {
        std::vector<double> col;
        for (const auto& t : tprs)
            col.push_back(t[j]);
        const auto [m, sd] = mean_std(col);
        s.tpr_mean.push_back(m);
        s.tpr_std.push_back(sd);
    }
    std::tie(s.auc_mean, s.auc_std) = mean_std(aucs);
    std::tie(s.dr_mean, s.dr_std) = mean_std(drs);
    return s;
}

/// Training set augmented with attack points against `attacker` from up to
/// `retrain_samples` malicious training rows at every k of `retrain_k`.
std::pair<Matrix, std::vector<int>> augmented(const ExperimentConfig& cfg, const learn::Pipeline& attacker,
                                              const Matrix& train_capped, const std::vector<int>& train_labels,
                                              std::uint64_t repeat) {
    std::vector<std::size_t> mal;
    for (std::size_t i = 0; i < train_labels.size(); ++i)
        if (train_labels[i] > 0)
            mal.push_back(i);
    Rng rng(derive_seed(cfg.seed, {repeat, kRetrainPick}));
    rng.shuffle(std::span<std::size_t>(mal));
    mal.resize(std::min(mal.size(), static_cast<std::size_t>(cfg.retrain_samples)));
    std::sort(mal.begin(), mal.end());

    const Matrix pool = rows_with_label(train_capped, train_labels, -1);
    const auto points = attack_points(attacker, train_capped.select_rows(mal), cfg.retrain_k,
                                      attack_config(cfg, evasion::Knowledge::PerfectKnowledge,
                                                    derive_seed(cfg.seed, {repeat, kAttack, 0})),
                                      pool);
    Matrix x = train_capped;
    std::vector<int> y = train_labels;
    for (const auto& m : points)
        for (std::size_t r = 0; r < m.rows(); ++r) {
            x.append_row(m.row(r));
            y.push_back(1);
        }
    return {std::move(x), std::move(y)};
}

void require_classes(const std::vector<int>& labels, std::size_t min_each, const std::string& what) {
    const auto pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int y) { return y > 0; }));
    if (pos < min_each || labels.size() - pos < min_each)
        throw Error(ErrorCode::CorpusTooSmall, what + " needs at least " + std::to_string(min_each) +
                                                   " samples per class");
}

} // namespace

Dataset extract_dataset(const std::vector<swfgen::CorpusEntry>& corpus, const features::TagTable& table,
                        const abc::ApiWhitelist& whitelist) {
    Dataset d;
    for (const auto& e : corpus) {
        try {
            d.raw.push_back(features::extract(e.bytes, table, whitelist));
        } catch (const Error& err) {
            throw Error(ErrorCode::ParseFailed, e.name + ": " + err.what());
        }
        d.ids.push_back(e.name);
        d.labels.push_back(e.label > 0 ? 1 : -1);
        d.years.push_back(e.year);
    }
    return d;
}

StandardRun run_standard(const ExperimentConfig& cfg, const Dataset& data) {
    const std::size_t min_train = cfg.grid_search ? static_cast<std::size_t>(cfg.cv_folds) : 2;
    StandardRun run;
    for (int r = 0; r < cfg.repeats; ++r) {
        const auto rep = static_cast<std::uint64_t>(r);
        RepeatState st;
        for (int cls : {1, -1}) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < data.size(); ++i)
                if (data.labels[i] == cls)
                    idx.push_back(i);
            Rng rng(derive_seed(cfg.seed, {rep, kSplit, static_cast<std::uint64_t>(cls + 2)}));
            rng.shuffle(std::span<std::size_t>(idx));
            const auto n_train = static_cast<std::size_t>(std::lround(cfg.split_fraction * static_cast<double>(idx.size())));
            st.train.insert(st.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
            st.test.insert(st.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
        }
        std::sort(st.train.begin(), st.train.end());
        std::sort(st.test.begin(), st.test.end());
        for (auto i : st.train)
            st.train_labels.push_back(data.labels[i]);
        for (auto i : st.test)
            st.test_labels.push_back(data.labels[i]);
        require_classes(st.train_labels, min_train, "training split");
        require_classes(st.test_labels, 2, "test split");

        std::vector<features::RawFeatureVector> train_raw;
        for (auto i : st.train)
            train_raw.push_back(data.raw[i]);
        st.space = features::FeatureSpace::fit(train_raw, st.train_labels, static_cast<std::size_t>(cfg.features),
                                               cfg.v_max);
        st.train_capped = capped_rows(st.space, data, st.train);
        st.test_capped = capped_rows(st.space, data, st.test);
        const Matrix z_train = normalized_rows(st.space, st.train_capped);
        const Matrix z_test = normalized_rows(st.space, st.test_capped);

        for (ModelKind kind : cfg.classifiers) {
            learn::Pipeline p{st.space, fit_model(kind, z_train, st.train_labels, cfg, rep), true};
            st.classifiers[id_of(kind)] = calibrate(std::move(p), z_test, st.test_labels, cfg.fpr_target);
        }
        run.repeats.push_back(std::move(st));
    }

    for (ModelKind kind : cfg.classifiers)
        run.roc.push_back(summarize_roc(id_of(kind), run.repeats, cfg.fpr_target));
    return run;
}

void run_retraining(const ExperimentConfig& cfg, StandardRun& run) {
    const std::string rbf = id_of(ModelKind::RbfSvm);
    if (!has(cfg, ModelKind::RbfSvm))
        throw Error(ErrorCode::ConfigError, "retraining generates attack samples against rbf_svm");
    for (std::size_t r = 0; r < run.repeats.size(); ++r) {
        RepeatState& st = run.repeats[r];
        const learn::Pipeline& attacker = st.classifiers.at(rbf).pipeline;
        const auto [x_aug, y_aug] = augmented(cfg, attacker, st.train_capped, st.train_labels, r);
        const Matrix z_aug = normalized_rows(st.space, x_aug);
        const Matrix z_test = normalized_rows(st.space, st.test_capped);
        for (ModelKind kind : {ModelKind::RbfSvm, ModelKind::RandomForest}) {
            if (!has(cfg, kind))
                continue;
            auto p = refit(st.classifiers.at(id_of(kind)).pipeline.model, st.space, z_aug, y_aug);
            st.classifiers[id_of(kind, true)] = calibrate(std::move(p), z_test, st.test_labels, cfg.fpr_target);
        }
    }
}

AdversarialRun run_adversarial(const ExperimentConfig& cfg, const StandardRun& run) {
    AdversarialRun out;
    if (run.repeats.empty())
        return out;

    struct CurveAcc {
        SecurityCurve curve;
        std::vector<std::vector<double>> dr; // per k, per repeat
    };
    std::vector<CurveAcc> curves;
    std::map<std::string, std::vector<std::vector<vulnmetrics::VulnReport>>> mim; // target -> per k, per repeat
    std::vector<std::string> mim_order;

    auto curve_slot = [&](const std::string& classifier, const std::string& knowledge,
                          const std::string& attacked) -> CurveAcc& {
        for (auto& c : curves)
            if (c.curve.classifier == classifier)
                return c;
        CurveAcc c;
        c.curve = {classifier, knowledge, attacked, {}};
        c.dr.resize(cfg.k_list.size());
        curves.push_back(std::move(c));
        return curves.back();
    };

    for (std::size_t r = 0; r < run.repeats.size(); ++r) {
        const RepeatState& st = run.repeats[r];
        const Matrix pool = rows_with_label(st.train_capped, st.train_labels, -1);
        std::vector<std::size_t> picked;
        for (std::size_t i = 0; i < st.test_labels.size(); ++i)
            if (st.test_labels[i] > 0)
                picked.push_back(i);
        if (cfg.attack_samples > 0 && picked.size() > static_cast<std::size_t>(cfg.attack_samples)) {
            Rng rng(derive_seed(cfg.seed, {r, kAttackPick}));
            rng.shuffle(std::span<std::size_t>(picked));
            picked.resize(static_cast<std::size_t>(cfg.attack_samples));
            std::sort(picked.begin(), picked.end());
        }
        const Matrix mal = st.test_capped.select_rows(picked);
        const Matrix z_benign = normalized_rows(st.space, rows_with_label(st.test_capped, st.test_labels, -1));
        const Matrix z_mal = normalized_rows(st.space, mal);
        const auto pk = attack_config(cfg, evasion::Knowledge::PerfectKnowledge, derive_seed(cfg.seed, {r, kAttack, 1}));

        auto record = [&](CurveAcc& acc, const learn::Pipeline& target, const std::vector<Matrix>& points) {
            for (std::size_t j = 0; j < points.size(); ++j)
                acc.dr[j].push_back(dr_on(target, points[j]));
        };
        auto record_mimicry = [&](const std::string& target, const std::vector<Matrix>& points) {
            auto& slot = mim[target];
            if (slot.empty()) {
                slot.resize(cfg.k_list.size());
                mim_order.push_back(target);
            }
            for (std::size_t j = 0; j < points.size(); ++j)
                slot[j].push_back(vulnmetrics::mimicry(z_benign, z_mal, normalized_rows(st.space, points[j])));
        };

        for (bool adv : {false, true}) {
            const std::string lin = id_of(ModelKind::LinearSvm, adv), rbf = id_of(ModelKind::RbfSvm, adv),
                              forest = id_of(ModelKind::RandomForest, adv);
            if (st.classifiers.count(lin)) {
                const auto& p = st.classifiers.at(lin).pipeline;
                const auto pts = attack_points(p, mal, cfg.k_list, pk, pool);
                record(curve_slot(lin, "PK", lin), p, pts);
                record_mimicry(lin, pts);
            }
            std::vector<Matrix> rbf_points;
            if (st.classifiers.count(rbf)) {
                const auto& p = st.classifiers.at(rbf).pipeline;
                rbf_points = attack_points(p, mal, cfg.k_list, pk, pool);
                record(curve_slot(rbf, "PK", rbf), p, rbf_points);
                record_mimicry(rbf, rbf_points);
            }
            if (!st.classifiers.count(forest))
                continue;
            const auto& target = st.classifiers.at(forest).pipeline;
            if (cfg.lk_mode == LkMode::SurrogateLearner && !rbf_points.empty()) {
                record(curve_slot(forest, "LK-SL", rbf), target, rbf_points);
                continue;
            }
            // Surrogate RBF SVM on a random half of the training data.
            std::vector<std::size_t> half(st.train_labels.size());
            std::iota(half.begin(), half.end(), std::size_t{0});
            Rng rng(derive_seed(cfg.seed, {r, kSurrogate, adv ? 1u : 0u}));
            rng.shuffle(std::span<std::size_t>(half));
            half.resize(half.size() / 2);
            std::sort(half.begin(), half.end());
            std::vector<int> y_half;
            for (auto i : half)
                y_half.push_back(st.train_labels[i]);
            require_classes(y_half, 2, "surrogate training half");
            learn::Hyperparams hp = st.classifiers.count(rbf) ? st.classifiers.at(rbf).pipeline.model.params
                                                              : fixed_params(ModelKind::RbfSvm, cfg);
            const Matrix z_half = normalized_rows(st.space, st.train_capped.select_rows(half));
            learn::Pipeline surrogate{st.space, learn::train(ModelKind::RbfSvm, z_half, y_half, hp), true};
            const auto pts = attack_points(surrogate, mal, cfg.k_list,
                                           attack_config(cfg, evasion::Knowledge::SurrogateData,
                                                         derive_seed(cfg.seed, {r, kAttack, 2})),
                                           pool);
            record(curve_slot(forest, cfg.lk_mode == LkMode::SurrogateData ? "LK-SD" : "LK-SL", "rbf_svm_surrogate"),
                   target, pts);
        }
    }

    for (auto& acc : curves) {
        for (std::size_t j = 0; j < cfg.k_list.size(); ++j) {
            const auto [m, sd] = mean_std(acc.dr[j]);
            acc.curve.points.push_back({cfg.k_list[j], m, sd});
        }
        out.curves.push_back(std::move(acc.curve));
    }
    for (const auto& target : mim_order) {
        const auto& per_k = mim.at(target);
        for (std::size_t j = 0; j < cfg.k_list.size(); ++j) {
            MimicryRow row{target, cfg.k_list[j], {}};
            const double n = static_cast<double>(per_k[j].size());
            for (const auto& v : per_k[j]) {
                row.mean.bc_before += v.bc_before / n;
                row.mean.bc_after += v.bc_after / n;
                row.mean.d_b_before += v.d_b_before / n;
                row.mean.d_b_after += v.d_b_after / n;
                row.mean.m += v.m / n;
            }
            out.mimicry.push_back(row);
        }
    }
    return out;
}

std::vector<TemporalRow> run_temporal(const ExperimentConfig& cfg, const Dataset& data, int cut_year) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] < 0)
            train.push_back(i);
        else if (data.years[i] > 0)
            (data.years[i] < cut_year ? train : test).push_back(i);
    }
    std::vector<int> y;
    for (auto i : train)
        y.push_back(data.labels[i]);
    const auto n_mal_train = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    if (test.empty() || n_mal_train == 0)
        throw Error(ErrorCode::NoTemporalMetadata,
                    "no malicious samples on one side of cut year " + std::to_string(cut_year));
    require_classes(y, cfg.grid_search ? static_cast<std::size_t>(cfg.cv_folds) : 2, "temporal training set");

    std::vector<features::RawFeatureVector> train_raw;
    for (auto i : train)
        train_raw.push_back(data.raw[i]);
    const auto space =
        features::FeatureSpace::fit(train_raw, y, static_cast<std::size_t>(cfg.features), cfg.v_max);
    const Matrix x_train = capped_rows(space, data, train);
    const Matrix z_train = normalized_rows(space, x_train);
    const Matrix z_test = normalized_rows(space, capped_rows(space, data, test));

    std::vector<std::pair<std::string, learn::Pipeline>> models;
    for (ModelKind kind : cfg.classifiers)
        models.emplace_back(id_of(kind), learn::Pipeline{space, fit_model(kind, z_train, y, cfg, kTemporalRepeat), true});
    if (cfg.retrain && has(cfg, ModelKind::RbfSvm)) {
        const learn::Pipeline* attacker = nullptr;
        for (const auto& [id, p] : models)
            if (id == id_of(ModelKind::RbfSvm))
                attacker = &p;
        const auto [x_aug, y_aug] = augmented(cfg, *attacker, x_train, y, kTemporalRepeat);
        const Matrix z_aug = normalized_rows(space, x_aug);
        std::vector<std::pair<std::string, learn::Pipeline>> adv;
        for (const auto& [id, p] : models)
            if (p.model.kind != ModelKind::LinearSvm)
                adv.emplace_back(id + "_adv", refit(p.model, space, z_aug, y_aug));
        for (auto& m : adv)
            models.push_back(std::move(m));
    }

    std::vector<TemporalRow> rows;
    for (const auto& [id, p] : models) {
        // default operating point: decision > 0
        std::size_t hits = 0;
        for (std::size_t i = 0; i < z_test.rows(); ++i)
            if (p.model.decision(z_test.row(i)) > 0.0)
                ++hits;
        rows.push_back({id, static_cast<double>(hits) / static_cast<double>(z_test.rows()), z_test.rows()});
    }
    return rows;
}

Results run_all(const ExperimentConfig& cfg, const Dataset& data) {
    Results res;
    res.corpus_size = data.size();
    StandardRun run = run_standard(cfg, data);
    if (cfg.retrain)
        run_retraining(cfg, run);
    res.roc = run.roc;
    for (const char* id : {"rbf_svm_adv", "random_forest_adv"}) {
        if (run.repeats.empty() || !run.repeats.front().classifiers.count(id))
            continue;
        res.roc.push_back(summarize_roc(id, run.repeats, cfg.fpr_target));
    }
    auto adv = run_adversarial(cfg, run);
    res.curves = std::move(adv.curves);
    res.mimicry = std::move(adv.mimicry);
    if (cfg.temporal_cut_year) {
        res.temporal = run_temporal(cfg, data, *cfg.temporal_cut_year);
        res.temporal_cut_year = cfg.temporal_cut_year;
    }
    return res;
}

} // namespace swfsec::harness
