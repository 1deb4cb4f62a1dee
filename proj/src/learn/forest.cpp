#include "swfsec/learn.hpp"

#include <algorithm>
#include <numeric>

namespace swfsec::learn {

double split_impurity(std::size_t left_pos, std::size_t left_n, std::size_t right_pos, std::size_t right_n) {
    auto gini = [](std::size_t pos, std::size_t n) {
        if (n == 0)
            return 0.0;
        const double p = static_cast<double>(pos) / static_cast<double>(n);
        return 2.0 * p * (1.0 - p);
    };
    const double total = static_cast<double>(left_n + right_n);
    return (static_cast<double>(left_n) * gini(left_pos, left_n) +
            static_cast<double>(right_n) * gini(right_pos, right_n)) / total;
}

double DecisionTree::predict(std::span<const double> x) const {
    std::size_t node = 0;
    while (nodes[node].feature >= 0) {
        const TreeNode& n = nodes[node];
        node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[node].value;
}

std::size_t DecisionTree::depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::span<const int> y, const TreeParams& params, Rng& rng)
        : x_(x), y_(y), params_(params), rng_(rng), features_(x.cols()) {
        std::iota(features_.begin(), features_.end(), std::size_t{0});
        mtry_ = params.mtry == 0 ? x.cols() : std::min(params.mtry, x.cols());
    }

    DecisionTree build(std::vector<std::size_t> rows) {
        tree_.nodes.clear();
        grow(rows, 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<std::size_t>& rows, std::size_t depth) {
        std::size_t pos = 0;
        for (auto r : rows)
            if (y_[r] > 0)
                ++pos;
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back({});
        tree_.nodes.back().value = static_cast<double>(pos) / static_cast<double>(rows.size());

        const bool pure = pos == 0 || pos == rows.size();
        const bool depth_ok = params_.max_depth == 0 || depth < params_.max_depth;
        if (pure || !depth_ok || rows.size() < 2 * params_.min_leaf)
            return id;
        const Split s = best_split(rows, pos);
        if (s.feature < 0)
            return id;

        std::vector<std::size_t> left, right;
        for (auto r : rows)
            (x_(r, static_cast<std::size_t>(s.feature)) <= s.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = s.feature;
        node.threshold = s.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    // Examines features in random order until mtry non-constant ones were scanned.
    Split best_split(const std::vector<std::size_t>& rows, std::size_t pos) {
        Split best;
        best.impurity = split_impurity(pos, rows.size(), 0, 0);
        rng_.shuffle(std::span<std::size_t>(features_));
        std::size_t examined = 0;
        std::vector<std::pair<double, int>> column(rows.size());
        for (std::size_t fi = 0; fi < features_.size() && examined < mtry_; ++fi) {
            const std::size_t f = features_[fi];
            for (std::size_t i = 0; i < rows.size(); ++i)
                column[i] = {x_(rows[i], f), y_[rows[i]]};
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first)
                continue;
            ++examined;
            std::size_t left_pos = 0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                if (column[i].second > 0)
                    ++left_pos;
                if (column[i].first == column[i + 1].first)
                    continue;
                const std::size_t left_n = i + 1;
                const std::size_t right_n = column.size() - left_n;
                if (left_n < params_.min_leaf || right_n < params_.min_leaf)
                    continue;
                const double imp = split_impurity(left_pos, left_n, pos - left_pos, right_n);
                if (imp < best.impurity) {
                    best.impurity = imp;
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (column[i].first + column[i + 1].first);
                    // midpoint can round onto the upper value for adjacent doubles
                    if (!(best.threshold < column[i + 1].first))
                        best.threshold = column[i].first;
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    std::span<const int> y_;
    TreeParams params_;
    Rng& rng_;
    std::vector<std::size_t> features_;
    std::size_t mtry_ = 0;
    DecisionTree tree_;
};

} // namespace

DecisionTree grow_tree(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                       const TreeParams& params, Rng& rng) {
    if (rows.empty())
        throw Error(ErrorCode::DegenerateTraining, "tree needs at least one row");
    TreeBuilder b(x, y, params, rng);
    return b.build(std::vector<std::size_t>(rows.begin(), rows.end()));
}

} // namespace swfsec::learn
