#pragma once

// Brute-force references for the attack module.

#include "swfsec/evasion.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace swfsec::test {

/// Minimum of f over every integer injection with sum <= k and the cap.
inline double exhaustive_min(const evasion::Objective& f, const std::vector<double>& x, int k, int v_max) {
    std::vector<double> cur = x;
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, int)> rec = [&](std::size_t j, int left) {
        if (j == x.size()) {
            best = std::min(best, f.value(cur));
            return;
        }
        const int room = std::min(left, v_max - static_cast<int>(x[j]));
        for (int a = 0; a <= room; ++a) {
            cur[j] = x[j] + a;
            rec(j + 1, left - a);
        }
        cur[j] = x[j];
    };
    rec(0, k);
    return best;
}

/// Exact projection by enumerating active sets: each coordinate at its lower
/// bound, upper bound or free (shifted by tau), with the budget active or not.
inline std::vector<double> projection_by_active_sets(const std::vector<double>& p, const std::vector<double>& x,
                                                     double k, double v_max) {
    const std::size_t n = p.size();
    std::vector<double> best;
    double best_d = std::numeric_limits<double>::infinity();
    std::vector<int> state(n, 0);
    auto consider = [&](const std::vector<double>& c) {
        double sum = 0.0, d = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (c[j] < x[j] - 1e-12 || c[j] > v_max + 1e-12)
                return;
            sum += c[j] - x[j];
            d += (c[j] - p[j]) * (c[j] - p[j]);
        }
        if (sum > k + 1e-9 || d >= best_d)
            return;
        best_d = d;
        best = c;
    };
    std::function<void(std::size_t)> rec = [&](std::size_t j) {
        if (j < n) {
            for (int s = 0; s < 3; ++s) {
                state[j] = s;
                rec(j + 1);
            }
            return;
        }
        std::vector<double> c(n);
        double fixed = 0.0;
        std::size_t free_count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (state[i] == 0)
                c[i] = x[i];
            else if (state[i] == 1)
                c[i] = v_max;
            else {
                c[i] = p[i];
                ++free_count;
                continue;
            }
            fixed += c[i] - x[i];
        }
        consider(c);
        if (free_count > 0) {
            double free_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (state[i] == 2)
                    free_sum += p[i] - x[i];
            const double tau = (free_sum + fixed - k) / static_cast<double>(free_count);
            if (tau >= 0) {
                for (std::size_t i = 0; i < n; ++i)
                    if (state[i] == 2)
                        c[i] = p[i] - tau;
                consider(c);
            }
        }
    };
    rec(0);
    return best;
}

/// Smallest squared distance to p over a regular grid of feasible points.
inline double grid_best_distance(const std::vector<double>& p, const std::vector<double>& x, double k, double v_max,
                                 double step) {
    const std::size_t n = p.size();
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> c(n);
    std::function<void(std::size_t, double, double)> rec = [&](std::size_t j, double used, double d) {
        if (d >= best)
            return;
        if (j == n) {
            best = d;
            return;
        }
        for (double v = x[j]; v <= v_max + 1e-12 && used + (v - x[j]) <= k + 1e-12; v += step)
            rec(j + 1, used + (v - x[j]), d + (v - p[j]) * (v - p[j]));
    };
    rec(0, 0.0, 0.0);
    return best;
}

} // namespace swfsec::test
