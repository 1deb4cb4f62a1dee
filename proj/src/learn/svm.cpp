#include "swfsec/learn.hpp"

#include <cmath>
#include <limits>

namespace swfsec::learn {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_classes(std::span<const int> y) {
    bool pos = false, neg = false;
    for (int v : y) {
        if (v == 1)
            pos = true;
        else if (v == -1)
            neg = true;
        else
            throw Error(ErrorCode::DegenerateTraining, "labels must be +1 or -1");
    }
    if (!pos || !neg)
        throw Error(ErrorCode::DegenerateTraining, "training data needs both classes");
}

} // namespace

const char* to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::LinearSvm: return "linear_svm";
    case ModelKind::RbfSvm: return "rbf_svm";
    case ModelKind::RandomForest: return "random_forest";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "linear_svm" || name == "linear")
        return ModelKind::LinearSvm;
    if (name == "rbf_svm" || name == "rbf")
        return ModelKind::RbfSvm;
    if (name == "random_forest" || name == "forest" || name == "rf")
        return ModelKind::RandomForest;
    throw Error(ErrorCode::ConfigError, "unknown classifier '" + name + "'");
}

Matrix squared_distances(const Matrix& x) {
    const std::size_t n = x.rows();
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i)
        norms[i] = dot(x.row(i), x.row(i));
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            // direct difference keeps exact zeros for duplicate rows
            const double v = squared_distance(x.row(i), x.row(j));
            d(i, j) = v;
            d(j, i) = v;
        }
    return d;
}

Matrix linear_gram(const Matrix& x) {
    const std::size_t n = x.rows();
    Matrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v = dot(x.row(i), x.row(j));
            g(i, j) = v;
            g(j, i) = v;
        }
    return g;
}

Matrix rbf_from_distances(const Matrix& sq_dist, double gamma) {
    Matrix k(sq_dist.rows(), sq_dist.cols());
    for (std::size_t i = 0; i < sq_dist.rows(); ++i)
        for (std::size_t j = 0; j < sq_dist.cols(); ++j)
            k(i, j) = std::exp(-gamma * sq_dist(i, j));
    return k;
}

SmoResult solve_smo(const Matrix& gram, std::span<const int> y, double c, double eps, std::size_t max_iterations) {
    const std::size_t n = y.size();
    if (gram.rows() != n || gram.cols() != n)
        throw Error(ErrorCode::DimensionMismatch, "Gram matrix does not match label count");
    if (!(c > 0.0))
        throw Error(ErrorCode::ConfigError, "C must be positive");
    check_classes(y);

    SmoResult res;
    std::vector<double>& alpha = res.alpha;
    alpha.assign(n, 0.0);
    std::vector<double> grad(n, -1.0); // Q alpha + p with p = -1
    auto yd = [&](std::size_t i) { return static_cast<double>(y[i]); };
    auto q = [&](std::size_t i, std::size_t j) { return yd(i) * yd(j) * gram(i, j); };

    while (true) {
        // i: maximal violator among indices that can move up
        double gmax = -kInf;
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] == 1) {
                if (alpha[t] < c && -grad[t] >= gmax) {
                    gmax = -grad[t];
                    i = t;
                }
            } else if (alpha[t] > 0.0 && grad[t] >= gmax) {
                gmax = grad[t];
                i = t;
            }
        }
        // j: second-order choice among indices that can move down
        double gmax2 = -kInf;
        double best_obj = kInf;
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            double grad_diff;
            if (y[t] == 1) {
                if (!(alpha[t] > 0.0))
                    continue;
                gmax2 = std::max(gmax2, grad[t]);
                grad_diff = gmax + grad[t];
            } else {
                if (!(alpha[t] < c))
                    continue;
                gmax2 = std::max(gmax2, -grad[t]);
                grad_diff = gmax - grad[t];
            }
            if (i == n || grad_diff <= 0.0)
                continue;
            double quad = gram(i, i) + gram(t, t) - 2.0 * yd(i) * yd(t) * gram(i, t);
            if (quad <= 0.0)
                quad = kTau;
            const double obj = -(grad_diff * grad_diff) / quad;
            if (obj <= best_obj) {
                best_obj = obj;
                j = t;
            }
        }
        res.kkt_gap = gmax + gmax2;
        if (i == n || j == n || res.kkt_gap < eps)
            break;
        if (res.iterations >= max_iterations)
            throw Error(ErrorCode::NonConvergence, "SMO hit " + std::to_string(max_iterations) + " iterations");
        ++res.iterations;

        const double old_ai = alpha[i];
        const double old_aj = alpha[j];
        if (y[i] != y[j]) {
            double quad = gram(i, i) + gram(j, j) + 2.0 * q(i, j);
            if (quad <= 0.0)
                quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = gram(i, i) + gram(j, j) - 2.0 * q(i, j);
            if (quad <= 0.0)
                quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double da_i = alpha[i] - old_ai;
        const double da_j = alpha[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t)
            grad[t] += q(i, t) * da_i + q(j, t) * da_j;
    }

    double ub = kInf, lb = -kInf, sum_free = 0.0;
    std::size_t free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = yd(t) * grad[t];
        if (alpha[t] >= c) {
            if (y[t] == -1)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] == 1)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else {
            ++free;
            sum_free += yg;
        }
    }
    res.rho = free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
    return res;
}

Model train_svm_with_gram(ModelKind kind, const Matrix& x, std::span<const int> y, const Matrix& gram,
                          const Hyperparams& params) {
    if (kind == ModelKind::RandomForest)
        throw Error(ErrorCode::ConfigError, "forest has no Gram matrix");
    if (x.rows() != y.size())
        throw Error(ErrorCode::DimensionMismatch, "sample and label counts differ");
    const SmoResult smo = solve_smo(gram, y, params.c);

    Model m;
    m.kind = kind;
    m.params = params;
    m.dim = x.cols();
    m.bias = -smo.rho;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (smo.alpha[i] <= 0.0)
            continue;
        m.support.append_row(x.row(i));
        m.coef.push_back(smo.alpha[i] * y[i]);
    }
    if (kind == ModelKind::LinearSvm) {
        m.weights.assign(m.dim, 0.0);
        for (std::size_t s = 0; s < m.coef.size(); ++s)
            for (std::size_t f = 0; f < m.dim; ++f)
                m.weights[f] += m.coef[s] * m.support(s, f);
        m.support = Matrix();
        m.coef.clear();
    }
    return m;
}

double Model::decision(std::span<const double> x) const {
    if (x.size() != dim)
        throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(x.size()) + " features, model " +
                                                      std::to_string(dim));
    switch (kind) {
    case ModelKind::LinearSvm:
        return dot(weights, x) + bias;
    case ModelKind::RbfSvm: {
        double f = bias;
        for (std::size_t s = 0; s < coef.size(); ++s)
            f += coef[s] * std::exp(-params.gamma * squared_distance(support.row(s), x));
        return f;
    }
    case ModelKind::RandomForest: {
        double sum = 0.0;
        for (const auto& t : trees)
            sum += t.predict(x);
        return 2.0 * sum / static_cast<double>(trees.size()) - 1.0;
    }
    }
    return 0.0;
}

std::vector<double> Model::gradient(std::span<const double> x) const {
    if (x.size() != dim)
        throw Error(ErrorCode::DimensionMismatch, "gradient input dimension");
    switch (kind) {
    case ModelKind::LinearSvm:
        return weights;
    case ModelKind::RbfSvm: {
        std::vector<double> g(dim, 0.0);
        for (std::size_t s = 0; s < coef.size(); ++s) {
            const auto sv = support.row(s);
            const double scale = coef[s] * -2.0 * params.gamma * std::exp(-params.gamma * squared_distance(sv, x));
            for (std::size_t f = 0; f < dim; ++f)
                g[f] += scale * (x[f] - sv[f]);
        }
        return g;
    }
    case ModelKind::RandomForest:
        break;
    }
    throw Error(ErrorCode::NotDifferentiable, "random forest has no gradient; attack a surrogate");
}

Model train(ModelKind kind, const Matrix& x, std::span<const int> y, const Hyperparams& params) {
    if (x.rows() != y.size())
        throw Error(ErrorCode::DimensionMismatch, "sample and label counts differ");
    check_classes(y);
    switch (kind) {
    case ModelKind::LinearSvm:
        return train_svm_with_gram(kind, x, y, linear_gram(x), params);
    case ModelKind::RbfSvm:
        return train_svm_with_gram(kind, x, y, rbf_from_distances(squared_distances(x), params.gamma), params);
    case ModelKind::RandomForest:
        break;
    }

    Model m;
    m.kind = kind;
    m.params = params;
    m.dim = x.cols();
    if (params.trees <= 0)
        throw Error(ErrorCode::ConfigError, "forest needs at least one tree");
    TreeParams tp;
    tp.mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols()))));
    const std::size_t n = x.rows();
    std::vector<std::size_t> rows(n);
    for (int t = 0; t < params.trees; ++t) {
        Rng rng(derive_seed(params.seed, {static_cast<std::uint64_t>(t)}));
        for (auto& r : rows)
            r = rng.index(n);
        m.trees.push_back(grow_tree(x, y, rows, tp, rng));
    }
    return m;
}

std::vector<double> decisions(const Model& model, const Matrix& x) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        out[i] = model.decision(x.row(i));
    return out;
}

} // namespace swfsec::learn
