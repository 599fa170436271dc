#ifndef ADPREDICT_FOREST_HPP
#define ADPREDICT_FOREST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "adpredict/error.hpp"
#include "adpredict/matrix.hpp"
#include "adpredict/parallel.hpp"
#include "adpredict/random.hpp"

namespace adpredict {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;   // x[feature] <= threshold
    int right = -1;  // x[feature] > threshold
    double count0 = 0.0;
    double count1 = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    const TreeNode& leaf_for(std::span<const double> x) const {
        int i = 0;
        while (!nodes[i].is_leaf()) {
            const auto& nd = nodes[i];
            i = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[i];
    }

    /// Majority class of the reached leaf; ties go to class 0.
    int predict(std::span<const double> x) const {
        const auto& leaf = leaf_for(x);
        return leaf.count1 > leaf.count0 ? 1 : 0;
    }

    int depth() const {
        std::vector<int> d(nodes.size(), 0);
        int best = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].is_leaf()) continue;
            d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
            best = std::max(best, d[i] + 1);
        }
        return best;
    }
};

struct Forest {
    std::size_t n_features = 0;
    int max_depth = 12;
    int features_per_split = 0;
    std::vector<DecisionTree> trees;

    std::size_t n_trees() const { return trees.size(); }

    /// Fraction of trees voting positive.
    double predict_proba(std::span<const double> x) const {
        if (x.size() != n_features) {
            throw ArgumentError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                                std::to_string(n_features));
        }
        if (trees.empty()) return 0.5;
        int votes = 0;
        for (const auto& t : trees) votes += t.predict(x);
        return static_cast<double>(votes) / static_cast<double>(trees.size());
    }
};

struct ForestOptions {
    int n_trees = 200;
    int max_depth = 12;
    int features_per_split = 0;  // 0 -> ceil(sqrt(K))
    std::uint64_t seed = 0;
    bool bootstrap = true;
    int min_samples_split = 2;
    int jobs = 1;
};

inline double gini(double c0, double c1) {
    const double n = c0 + c1;
    if (n <= 0) return 0.0;
    const double p = c1 / n;
    return 2.0 * p * (1.0 - p);
}

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<double>>& columns, std::span<const int> y, const ForestOptions& opt,
                std::size_t mtry, Rng& rng)
        : cols_(columns), y_(y), opt_(opt), mtry_(mtry), rng_(rng), features_(columns.size()) {
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    DecisionTree build(std::vector<std::uint32_t> samples) {
        DecisionTree tree;
        tree_ = &tree;
        grow(samples, 0);
        return tree;
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double impurity = 0.0;  // weighted child impurity
    };

    int grow(std::vector<std::uint32_t>& samples, int depth) {
        const int id = static_cast<int>(tree_->nodes.size());
        tree_->nodes.emplace_back();
        double c0 = 0, c1 = 0;
        for (auto i : samples) (y_[i] == 1 ? c1 : c0) += 1.0;
        tree_->nodes[id].count0 = c0;
        tree_->nodes[id].count1 = c1;
        if (depth >= opt_.max_depth || c0 == 0 || c1 == 0 ||
            samples.size() < static_cast<std::size_t>(std::max(2, opt_.min_samples_split))) {
            return id;
        }
        const Split s = best_split(samples, c0, c1);
        if (s.feature < 0 || !(s.impurity < (c0 + c1) * gini(c0, c1) - 1e-12)) return id;

        std::vector<std::uint32_t> left, right;
        const auto& col = cols_[s.feature];
        for (auto i : samples) (col[i] <= s.threshold ? left : right).push_back(i);
        samples.clear();
        samples.shrink_to_fit();
        tree_->nodes[id].feature = s.feature;
        tree_->nodes[id].threshold = s.threshold;
        const int l = grow(left, depth + 1);
        tree_->nodes[id].left = l;
        const int r = grow(right, depth + 1);
        tree_->nodes[id].right = r;
        return id;
    }

    Split best_split(const std::vector<std::uint32_t>& samples, double c0, double c1) {
        // Partial Fisher-Yates: the first mtry entries of features_ become the candidates.
        const std::size_t k = features_.size();
        for (std::size_t i = 0; i < mtry_; ++i) std::swap(features_[i], features_[i + uniform_index(rng_, k - i)]);

        Split best;
        best.impurity = (c0 + c1) * gini(c0, c1);
        for (std::size_t fi = 0; fi < mtry_; ++fi) {
            const std::size_t f = features_[fi];
            const auto& col = cols_[f];
            // Zeros dominate sparse count features, so only nonzeros are sorted.
            values_.clear();
            double z0 = 0, z1 = 0;
            for (auto i : samples) {
                const double v = col[i];
                if (v == 0.0) {
                    (y_[i] == 1 ? z1 : z0) += 1.0;
                } else {
                    values_.push_back({v, y_[i]});
                }
            }
            std::sort(values_.begin(), values_.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            runs_.clear();
            bool zero_done = z0 + z1 == 0;
            for (const auto& [v, label] : values_) {
                if (!zero_done && v > 0) {
                    runs_.push_back({0.0, z0, z1});
                    zero_done = true;
                }
                if (runs_.empty() || runs_.back().value != v) runs_.push_back({v, 0, 0});
                (label == 1 ? runs_.back().c1 : runs_.back().c0) += 1.0;
            }
            if (!zero_done) runs_.push_back({0.0, z0, z1});

            double l0 = 0, l1 = 0;
            for (std::size_t r = 0; r + 1 < runs_.size(); ++r) {
                l0 += runs_[r].c0;
                l1 += runs_[r].c1;
                const double r0 = c0 - l0, r1 = c1 - l1;
                const double imp = (l0 + l1) * gini(l0, l1) + (r0 + r1) * gini(r0, r1);
                if (imp < best.impurity - 1e-12) {
                    best.impurity = imp;
                    best.feature = static_cast<int>(f);
                    const double a = runs_[r].value, b = runs_[r + 1].value;
                    best.threshold = a + (b - a) / 2.0;
                }
            }
        }
        return best;
    }

    struct Run {
        double value;
        double c0, c1;
    };

    const std::vector<std::vector<double>>& cols_;
    std::span<const int> y_;
    const ForestOptions& opt_;
    std::size_t mtry_;
    Rng& rng_;
    std::vector<std::size_t> features_;
    std::vector<std::pair<double, int>> values_;
    std::vector<Run> runs_;
    DecisionTree* tree_ = nullptr;
};

}  // namespace detail

/// Random forest of Gini trees, each fit on a bootstrap sample with a fresh random feature
/// subset at every node. Tree t draws from its own seed, so results do not depend on `jobs`.
inline Forest train_rf(const Matrix& x, std::span<const int> y, const ForestOptions& opt = {}) {
    check_training_data(x, y);
    if (opt.n_trees < 1) throw ArgumentError("n_trees must be >= 1");
    if (opt.max_depth < 0) throw ArgumentError("max_depth must be >= 0");
    const std::size_t n = x.rows(), k = x.cols();
    if (k == 0) throw DataError("random forest: no features");
    std::size_t mtry = opt.features_per_split > 0
                           ? static_cast<std::size_t>(opt.features_per_split)
                           : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
    mtry = std::min(mtry, k);

    std::vector<std::vector<double>> cols(k, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = x.row(i);
        for (std::size_t j = 0; j < k; ++j) cols[j][i] = row[j];
    }

    Forest forest;
    forest.n_features = k;
    forest.max_depth = opt.max_depth;
    forest.features_per_split = static_cast<int>(mtry);
    forest.trees.resize(static_cast<std::size_t>(opt.n_trees));
    parallel_for(forest.trees.size(), static_cast<unsigned>(std::max(1, opt.jobs)), [&](std::size_t t) {
        Rng rng = make_rng(opt.seed, streams::model, t);
        std::vector<std::uint32_t> samples(n);
        if (opt.bootstrap) {
            for (auto& s : samples) s = static_cast<std::uint32_t>(uniform_index(rng, n));
            std::sort(samples.begin(), samples.end());
        } else {
            std::iota(samples.begin(), samples.end(), 0u);
        }
        detail::TreeBuilder builder(cols, y, opt, mtry, rng);
        forest.trees[t] = builder.build(std::move(samples));
    });
    return forest;
}

}  // namespace adpredict

#endif  // ADPREDICT_FOREST_HPP
