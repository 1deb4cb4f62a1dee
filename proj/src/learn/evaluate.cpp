#include "swfsec/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace swfsec::learn {

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                           const std::vector<double>& fpr_targets) {
    if (scores.empty() || scores.size() != labels.size())
        throw Error(ErrorCode::DimensionMismatch, "scores and labels must be nonempty and equal length");
    std::size_t n_pos = 0;
    for (int y : labels)
        if (y > 0)
            ++n_pos;
    const std::size_t n_neg = labels.size() - n_pos;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    auto rate = [](std::size_t hits, std::size_t total) {
        return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
    };

    EvalReport rep;
    std::size_t tp = 0, fp = 0;
    // Threshold t marks scores > t as malicious: each unique score, then -inf.
    for (std::size_t i = 0; i <= order.size(); ++i) {
        if (i == order.size() || (i > 0 && scores[order[i]] != scores[order[i - 1]]) || i == 0) {
            const double thr = i == order.size() ? -std::numeric_limits<double>::infinity() : scores[order[i]];
            rep.roc.push_back({rate(fp, n_neg), rate(tp, n_pos), thr});
        }
        if (i < order.size())
            (labels[order[i]] > 0 ? tp : fp)++;
    }
    for (std::size_t i = 1; i < rep.roc.size(); ++i)
        rep.auc += (rep.roc[i].fpr - rep.roc[i - 1].fpr) * (rep.roc[i].tpr + rep.roc[i - 1].tpr) / 2.0;
    if (n_pos == 0 || n_neg == 0)
        rep.auc = std::numeric_limits<double>::quiet_NaN();
    for (double target : fpr_targets) {
        double best = 0.0;
        for (const auto& p : rep.roc)
            if (p.fpr <= target)
                best = std::max(best, p.tpr);
        rep.dr_at_fpr[target] = best;
    }
    return rep;
}

EvalReport evaluate(const Model& model, const Matrix& x, std::span<const int> labels,
                    const std::vector<double>& fpr_targets) {
    const auto s = decisions(model, x);
    return evaluate_scores(s, labels, fpr_targets);
}

double threshold_at_fpr(std::span<const double> benign_scores, double target) {
    if (benign_scores.empty())
        throw Error(ErrorCode::TooFewSamples, "threshold needs benign scores");
    std::vector<double> s(benign_scores.begin(), benign_scores.end());
    std::sort(s.begin(), s.end(), std::greater<>());
    // At most `allowed` benign scores may lie strictly above the threshold.
    const auto allowed = static_cast<std::size_t>(std::floor(target * static_cast<double>(s.size()) + 1e-9));
    if (allowed >= s.size())
        return -std::numeric_limits<double>::infinity();
    return s[allowed];
}

double detection_rate(std::span<const double> scores, double threshold) {
    if (scores.empty())
        return 0.0;
    std::size_t hits = 0;
    for (double s : scores)
        if (s > threshold)
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

std::vector<Hyperparams> default_grid(ModelKind kind) {
    const double cs[] = {0.01, 0.1, 1.0, 10.0, 100.0};
    const double gammas[] = {0.001, 0.01, 0.1, 1.0, 10.0};
    std::vector<Hyperparams> grid;
    switch (kind) {
    case ModelKind::LinearSvm:
        for (double c : cs)
            grid.push_back({c, 0.0, 0, 0});
        break;
    case ModelKind::RbfSvm:
        for (double c : cs)
            for (double g : gammas)
                grid.push_back({c, g, 0, 0});
        break;
    case ModelKind::RandomForest:
        grid.push_back({1.0, 0.0, 100, 0});
        break;
    }
    return grid;
}

std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed) {
    if (folds < 2)
        throw Error(ErrorCode::ConfigError, "need at least two folds");
    std::vector<int> fold(y.size(), 0);
    for (int cls : {1, -1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls)
                idx.push_back(i);
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(cls + 2)}));
        rng.shuffle(std::span<std::size_t>(idx));
        for (std::size_t i = 0; i < idx.size(); ++i)
            fold[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    }
    return fold;
}

namespace {

Matrix sub_gram(const Matrix& full, const std::vector<std::size_t>& rows) {
    Matrix g(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.size(); ++j)
            g(i, j) = full(rows[i], rows[j]);
    return g;
}

} // namespace

CvResult cross_validate(ModelKind kind, const Matrix& x, std::span<const int> y,
                        const std::vector<Hyperparams>& grid, std::uint64_t seed, int folds) {
    if (grid.empty())
        throw Error(ErrorCode::ConfigError, "empty hyperparameter grid");
    CvResult res;
    if (grid.size() == 1) {
        res.best = grid.front();
        res.mean_auc.assign(1, std::numeric_limits<double>::quiet_NaN());
        return res;
    }
    std::size_t n_pos = 0;
    for (int v : y)
        if (v > 0)
            ++n_pos;
    if (n_pos < static_cast<std::size_t>(folds) || y.size() - n_pos < static_cast<std::size_t>(folds))
        throw Error(ErrorCode::TooFewSamples, "cross-validation needs at least one sample per class and fold");

    const auto fold = stratified_folds(y, folds, seed);
    std::vector<std::vector<std::size_t>> train_rows(folds), test_rows(folds);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (int f = 0; f < folds; ++f)
            (fold[i] == f ? test_rows[f] : train_rows[f]).push_back(i);

    // Distances (RBF) or the Gram matrix (linear) are shared by every grid point and fold.
    Matrix base;
    if (kind == ModelKind::RbfSvm)
        base = squared_distances(x);
    else if (kind == ModelKind::LinearSvm)
        base = linear_gram(x);

    double best_auc = -std::numeric_limits<double>::infinity();
    double last_gamma = std::numeric_limits<double>::quiet_NaN();
    Matrix kernel;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const Hyperparams& hp = grid[g];
        if (kind == ModelKind::RbfSvm && hp.gamma != last_gamma) {
            kernel = rbf_from_distances(base, hp.gamma);
            last_gamma = hp.gamma;
        }
        double sum = 0.0;
        bool ok = true;
        for (int f = 0; f < folds && ok; ++f) {
            const Matrix xtr = x.select_rows(train_rows[f]);
            const Matrix xte = x.select_rows(test_rows[f]);
            std::vector<int> ytr, yte;
            for (auto i : train_rows[f])
                ytr.push_back(y[i]);
            for (auto i : test_rows[f])
                yte.push_back(y[i]);
            try {
                Model m;
                if (kind == ModelKind::RandomForest) {
                    Hyperparams fp = hp;
                    fp.seed = derive_seed(seed, {static_cast<std::uint64_t>(f), 7});
                    m = train(kind, xtr, ytr, fp);
                } else {
                    const Matrix& full = kind == ModelKind::RbfSvm ? kernel : base;
                    m = train_svm_with_gram(kind, xtr, ytr, sub_gram(full, train_rows[f]), hp);
                }
                sum += evaluate(m, xte, yte, {}).auc;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NonConvergence)
                    throw;
                ok = false;
            }
        }
        const double mean = ok ? sum / folds : std::numeric_limits<double>::quiet_NaN();
        res.mean_auc.push_back(mean);
        if (ok && mean > best_auc + 1e-12) {
            best_auc = mean;
            res.best = hp;
        }
    }
    if (!(best_auc > -std::numeric_limits<double>::infinity()))
        throw Error(ErrorCode::NonConvergence, "no grid point trained successfully");
    return res;
}

} // namespace swfsec::learn
