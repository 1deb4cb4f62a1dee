#include "swfsec/evasion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace swfsec::evasion {

const char* to_string(Knowledge k) {
    switch (k) {
    case Knowledge::PerfectKnowledge: return "PK";
    case Knowledge::SurrogateLearner: return "LK-SL";
    case Knowledge::SurrogateData: return "LK-SD";
    }
    return "?";
}

const char* to_string(InitUsed i) {
    return i == InitUsed::FromSource ? "source" : "benign";
}

Objective::Objective(const learn::Model& model, const features::FeatureSpace& space, bool normalize)
    : model_(&model), space_(&space), normalize_(normalize) {
    if (model.dim != space.size())
        throw Error(ErrorCode::DimensionMismatch, "model and feature space dimensions differ");
}

double Objective::value(std::span<const double> c) const {
    if (!normalize_)
        return model_->decision(c);
    return model_->decision(space_->normalize(c));
}

std::vector<double> Objective::gradient(std::span<const double> c) const {
    if (!model_->differentiable())
        throw Error(ErrorCode::NotDifferentiable, "attacked model must be differentiable; use a surrogate");
    if (!normalize_)
        return model_->gradient(c);

    const auto& w = space_->idf();
    const std::size_t k = c.size();
    std::vector<double> u(k);
    double n2 = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        u[j] = c[j] * w[j];
        n2 += u[j] * u[j];
    }
    if (n2 == 0.0) {
        const double f0 = value(c);
        std::vector<double> g(k);
        std::vector<double> probe(c.begin(), c.end());
        for (std::size_t j = 0; j < k; ++j) {
            probe[j] += 1.0;
            g[j] = value(probe) - f0;
            probe[j] -= 1.0;
        }
        return g;
    }
    const double n = std::sqrt(n2);
    std::vector<double> z(k);
    for (std::size_t j = 0; j < k; ++j)
        z[j] = u[j] / n;
    const auto gz = model_->gradient(z);
    // J^T gz without forming J: J_ij = w_j (delta_ij n^2 - u_i u_j) / n^3
    const double ug = dot(u, gz);
    std::vector<double> g(k);
    for (std::size_t j = 0; j < k; ++j)
        g[j] = w[j] * (gz[j] * n2 - u[j] * ug) / (n2 * n);
    return g;
}

std::vector<double> project_feasible(std::span<const double> p, std::span<const double> x, double k, double v_max) {
    if (p.size() != x.size())
        throw Error(ErrorCode::DimensionMismatch, "projection operands differ in length");
    const std::size_t n = x.size();
    auto shifted_sum = [&](double tau) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            s += std::clamp(p[j] - x[j] - tau, 0.0, std::max(0.0, v_max - x[j]));
        return s;
    };
    double tau = 0.0;
    if (shifted_sum(0.0) > k) {
        double lo = 0.0, hi = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            hi = std::max(hi, p[j] - x[j]);
        while (hi - lo > 1e-9) {
            const double mid = 0.5 * (lo + hi);
            if (shifted_sum(mid) > k)
                lo = mid;
            else
                hi = mid;
        }
        tau = hi; // upper end keeps the budget satisfied
    }
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j)
        out[j] = x[j] + std::clamp(p[j] - x[j] - tau, 0.0, std::max(0.0, v_max - x[j]));
    return out;
}

namespace {

double injected_total(std::span<const double> r, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
        s += r[j] - x[j];
    return s;
}

// Best-improvement integer moves: add a unit, drop a unit, or move one;
// at a local optimum of those, move a block of injected units.
void polish(std::vector<double>& r, double& fr, std::span<const double> x, int k, int v_max, const Objective& f) {
    const std::size_t n = x.size();
    const int max_passes = 4 * k + 8;
    std::vector<double> probe;
    for (int pass = 0; pass < max_passes; ++pass) {
        const double budget = k - injected_total(r, x);
        double best = fr;
        std::size_t from = n, to = n;
        auto consider = [&](std::size_t a, std::size_t b) {
            probe = r;
            if (a < n)
                probe[a] -= 1.0;
            if (b < n)
                probe[b] += 1.0;
            const double v = f.value(probe);
            if (v < best) {
                best = v;
                from = a;
                to = b;
            }
        };
        for (std::size_t b = 0; b < n; ++b)
            if (budget >= 1.0 && r[b] + 1.0 <= v_max)
                consider(n, b);
        for (std::size_t a = 0; a < n; ++a) {
            if (r[a] - 1.0 < x[a])
                continue;
            consider(a, n);
            for (std::size_t b = 0; b < n; ++b)
                if (b != a && r[b] + 1.0 <= v_max)
                    consider(a, b);
        }
        if (from == n && to == n) {
            // unit moves are exhausted: try moving a block of injected units
            int units = 0;
            for (std::size_t a = 0; a < n; ++a) {
                const int injected = static_cast<int>(r[a] - x[a]);
                for (std::size_t b = 0; b < n; ++b) {
                    if (b == a)
                        continue;
                    const int room = std::min(injected, v_max - static_cast<int>(r[b]));
                    for (int m = 2; m <= room; ++m) {
                        probe = r;
                        probe[a] -= m;
                        probe[b] += m;
                        const double v = f.value(probe);
                        if (v < best) {
                            best = v;
                            from = a;
                            to = b;
                            units = m;
                        }
                    }
                }
            }
            if (units == 0)
                return;
            r[from] -= units;
            r[to] += units;
            fr = best;
            continue;
        }
        if (from < n)
            r[from] -= 1.0;
        if (to < n)
            r[to] += 1.0;
        fr = best;
    }
}

struct Descent {
    std::vector<double> point;
    int iterations = 0;
};

class Descender {
public:
    Descender(const Objective& f, std::span<const double> x, const AttackConfig& cfg)
        : f_(f), x_(x.begin(), x.end()), cfg_(cfg) {
        max_iters_ = cfg.max_iters > 0 ? cfg.max_iters : static_cast<int>(5 * x_.size());
    }

    Descent run(std::vector<double> cur) {
        Descent d;
        double fcur = f_.value(cur);
        std::vector<double> g = f_.gradient(cur);
        std::size_t dir = x_.size();
        double sign = 0.0;
        while (d.iterations < max_iters_) {
            bool moved = false;
            double gain = 0.0;
            // Retry the direction that last succeeded before paying for a new gradient.
            if (dir < x_.size() && step(cur, fcur, dir, sign, gain)) {
                moved = true;
            } else {
                if (dir < x_.size())
                    g = f_.gradient(cur);
                for (std::size_t j : ranked(cur, g)) {
                    const double s = g[j] < 0.0 ? 1.0 : -1.0;
                    if (step(cur, fcur, j, s, gain)) {
                        dir = j;
                        sign = s;
                        moved = true;
                        break;
                    }
                }
            }
            if (!moved)
                break;
            ++d.iterations;
            if (gain < cfg_.epsilon)
                break;
        }
        d.point = std::move(cur);
        return d;
    }

private:
    // Coordinates whose gradient points into the feasible set, largest |g| first.
    std::vector<std::size_t> ranked(const std::vector<double>& cur, const std::vector<double>& g) const {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < x_.size(); ++j) {
            if (g[j] < 0.0 && cur[j] < cfg_.v_max - 1e-12)
                idx.push_back(j);
            else if (g[j] > 0.0 && cur[j] > x_[j] + 1e-12)
                idx.push_back(j);
        }
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return std::fabs(g[a]) > std::fabs(g[b]); });
        return idx;
    }

    // Line search on t -> f(P(cur + t * sign * e_j)) over (0, t_max]; moves on strict improvement.
    bool step(std::vector<double>& cur, double& fcur, std::size_t j, double sign, double& gain) {
        double t_max = cfg_.k;
        if (sign < 0.0)
            t_max = std::min(t_max, cur[j] - x_[j]);
        if (t_max <= 1e-12)
            return false;
        std::vector<double> p = cur;
        auto eval = [&](double t, std::vector<double>& out) {
            p[j] = cur[j] + sign * t;
            out = project_feasible(p, x_, cfg_.k, cfg_.v_max);
            return f_.value(out);
        };
        std::vector<double> trial, best_point;
        double best_f = fcur, best_t = 0.0;
        double t = t_max;
        // halve from t_max; once improving, stop at the first halving that does not improve further
        for (int m = 0; m <= 10; ++m, t *= 0.5) {
            const double v = eval(t, trial);
            if (v < best_f) {
                best_f = v;
                best_t = t;
                best_point = trial;
            } else if (best_t > 0.0) {
                break;
            }
        }
        if (best_t == 0.0)
            return false;
        // golden-section refinement around the best grid point
        double a = best_t * 0.5, b = std::min(t_max, best_t * 2.0);
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double c1 = b - phi * (b - a), c2 = a + phi * (b - a);
        std::vector<double> p1, p2;
        double f1 = eval(c1, p1), f2 = eval(c2, p2);
        for (int it = 0; it < 8; ++it) {
            if (f1 < best_f) {
                best_f = f1;
                best_point = p1;
            }
            if (f2 < best_f) {
                best_f = f2;
                best_point = p2;
            }
            if (f1 <= f2) {
                b = c2;
                c2 = c1;
                f2 = f1;
                p2 = p1;
                c1 = b - phi * (b - a);
                f1 = eval(c1, p1);
            } else {
                a = c1;
                c1 = c2;
                f1 = f2;
                p1 = p2;
                c2 = a + phi * (b - a);
                f2 = eval(c2, p2);
            }
        }
        if (f1 < best_f) {
            best_f = f1;
            best_point = p1;
        }
        if (f2 < best_f) {
            best_f = f2;
            best_point = p2;
        }
        gain = fcur - best_f;
        cur = std::move(best_point);
        fcur = best_f;
        return true;
    }

    const Objective& f_;
    std::vector<double> x_;
    AttackConfig cfg_;
    int max_iters_ = 0;
};

AttackResult trivial_result(const Objective& f, std::span<const double> x) {
    AttackResult r;
    r.x_source.assign(x.begin(), x.end());
    r.x_adv = r.x_source;
    r.f_before = r.f_after = f.value(x);
    r.evaded = !(r.f_after > f.model().threshold);
    return r;
}

void fill_injected(AttackResult& r, const Objective& f) {
    r.injected.clear();
    const auto& names = f.space().selected();
    for (std::size_t j = 0; j < r.x_adv.size(); ++j) {
        const double d = r.x_adv[j] - r.x_source[j];
        if (d > 0.0)
            r.injected[names[j]] = static_cast<int>(std::lround(d));
    }
}

} // namespace

std::vector<double> round_and_repair(std::span<const double> x_cont, std::span<const double> x, int k, int v_max,
                                     const Objective& f) {
    const std::size_t n = x.size();
    std::vector<double> r(n);
    for (std::size_t j = 0; j < n; ++j)
        r[j] = std::clamp(x[j] + std::floor(x_cont[j] - x[j] + 1e-9), x[j], std::max<double>(x[j], v_max));
    double budget = k - injected_total(r, x);
    double fr = f.value(r);
    std::vector<double> probe;
    while (budget >= 1.0) {
        double best = fr;
        std::size_t pick = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (r[j] + 1.0 > v_max)
                continue;
            probe = r;
            probe[j] += 1.0;
            const double v = f.value(probe);
            if (v < best) {
                best = v;
                pick = j;
            }
        }
        if (pick == n)
            break;
        r[pick] += 1.0;
        fr = best;
        budget -= 1.0;
    }
    return r;
}

AttackResult evade(const Objective& f, std::span<const double> x, const AttackConfig& cfg, const Matrix& benign_pool) {
    if (cfg.k < 1 || cfg.v_max < 1 || !(cfg.epsilon > 0.0))
        throw Error(ErrorCode::ConfigError, "attack needs k >= 1, v_max >= 1, epsilon > 0");
    if (x.size() != f.dim())
        throw Error(ErrorCode::DimensionMismatch, "sample dimension differs from feature space");

    AttackResult best = trivial_result(f, x);
    Descender descender(f, x, cfg);

    auto finish = [&](std::vector<double> cont, int iterations, InitUsed init) {
        std::vector<double> r = round_and_repair(cont, x, cfg.k, cfg.v_max, f);
        double fr = f.value(r);
        if (cfg.polish)
            polish(r, fr, x, cfg.k, cfg.v_max, f);
        best.iterations += iterations;
        if (fr < best.f_after) {
            best.x_adv = std::move(r);
            best.f_after = fr;
            best.init_used = init;
        }
    };

    const std::vector<double> start(x.begin(), x.end());
    Descent from_source = descender.run(start);
    finish(std::move(from_source.point), from_source.iterations, InitUsed::FromSource);

    if (cfg.dual_init && !benign_pool.empty()) {
        // random benign training sample, pulled into the feasible set
        Rng rng(cfg.seed);
        const std::size_t pick = rng.index(benign_pool.rows());
        auto init = project_feasible(benign_pool.row(pick), x, cfg.k, cfg.v_max);
        Descent from_benign = descender.run(std::move(init));
        finish(std::move(from_benign.point), from_benign.iterations, InitUsed::FromBenign);
    }

    best.evaded = !(best.f_after > f.model().threshold);
    fill_injected(best, f);
    return best;
}

AttackResult greedy_evade_oracle(const Objective& f, std::span<const double> x, int k, int v_max) {
    AttackResult r = trivial_result(f, x);
    std::vector<double> cur(x.begin(), x.end());
    double fcur = r.f_before;
    for (int step = 0; step < k; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = cur.size();
        for (std::size_t j = 0; j < cur.size(); ++j) {
            if (cur[j] + 1.0 > v_max)
                continue;
            cur[j] += 1.0;
            const double v = f.value(cur);
            cur[j] -= 1.0;
            if (v < best) {
                best = v;
                pick = j;
            }
        }
        if (pick == cur.size() || !(best < fcur))
            break;
        cur[pick] += 1.0;
        fcur = best;
        ++r.iterations;
    }
    r.x_adv = std::move(cur);
    r.f_after = fcur;
    r.evaded = !(fcur > f.model().threshold);
    fill_injected(r, f);
    return r;
}

std::string check_feasible(std::span<const double> x_source, std::span<const double> x_adv, int k, int v_max) {
    if (x_source.size() != x_adv.size())
        return "dimension mismatch";
    double total = 0.0;
    for (std::size_t j = 0; j < x_source.size(); ++j) {
        if (x_adv[j] < x_source[j])
            return "feature " + std::to_string(j) + " decreased";
        if (x_adv[j] > v_max && x_adv[j] > x_source[j])
            return "feature " + std::to_string(j) + " above cap";
        if (x_adv[j] != std::floor(x_adv[j]))
            return "feature " + std::to_string(j) + " not integral";
        total += x_adv[j] - x_source[j];
    }
    if (total > k)
        return "budget exceeded: " + format_double(total) + " > " + std::to_string(k);
    return {};
}

std::vector<BatchResult> attack_batch(const Objective& attacked, const learn::Pipeline& target,
                                      const Matrix& malicious, const std::vector<int>& k_list,
                                      const AttackConfig& base, const Matrix& benign_pool) {
    if (target.space.size() != attacked.dim())
        throw Error(ErrorCode::DimensionMismatch, "target and attacked feature spaces differ");
    std::vector<BatchResult> out;
    for (int k : k_list) {
        BatchResult b;
        b.k = k;
        AttackConfig cfg = base;
        cfg.k = k;
        std::size_t detected = 0;
        for (std::size_t i = 0; i < malicious.rows(); ++i) {
            cfg.seed = derive_seed(base.seed, {static_cast<std::uint64_t>(k), i});
            AttackResult r = k <= 0 ? trivial_result(attacked, malicious.row(i))
                                    : evade(attacked, malicious.row(i), cfg, benign_pool);
            const auto z = target.normalize ? target.space.normalize(r.x_adv) : r.x_adv;
            if (target.model.predict(z))
                ++detected;
            b.results.push_back(std::move(r));
        }
        b.detection_rate = malicious.rows() == 0 ? 0.0
                                                 : static_cast<double>(detected) / static_cast<double>(malicious.rows());
        out.push_back(std::move(b));
    }
    return out;
}

std::string trace_jsonl(const std::vector<BatchResult>& batches, const std::vector<std::string>& sample_ids) {
    std::string out;
    for (const auto& b : batches)
        for (std::size_t i = 0; i < b.results.size(); ++i) {
            const AttackResult& r = b.results[i];
            nlohmann::ordered_json j;
            j["sample_id"] = i < sample_ids.size() ? sample_ids[i] : std::to_string(i);
            j["k"] = b.k;
            j["f_before"] = std::stod(format_double(r.f_before));
            j["f_after"] = std::stod(format_double(r.f_after));
            j["evaded"] = r.evaded;
            j["injected"] = r.injected;
            j["iterations"] = r.iterations;
            j["init_used"] = to_string(r.init_used);
            out += j.dump() + "\n";
        }
    return out;
}

} // namespace swfsec::evasion
