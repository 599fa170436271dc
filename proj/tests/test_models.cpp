#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "adpredict/adaboost.hpp"
#include "adpredict/forest.hpp"
#include "adpredict/linear_model.hpp"
#include "adpredict/model_io.hpp"
#include "test_support.hpp"

using namespace adpredict;

namespace {

double hinge_loss(const LinearModel& m, const Matrix& x, const std::vector<int>& y) {
    double h = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double yi = y[i] == 1 ? 1.0 : -1.0;
        h += std::max(0.0, 1.0 - yi * m.score(x.row(i)));
    }
    return h / static_cast<double>(x.rows());
}

std::vector<int> logistic_labels(testgen::Rng& rng, const Matrix& x, const std::vector<double>& w, double b) {
    std::vector<int> y(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double s = b;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x(i, j);
        y[i] = testgen::coin(rng, 1.0 / (1.0 + std::exp(-s))) ? 1 : 0;
    }
    return y;
}

// Plain CART reference. Where several splits tie on impurity every alternative is kept,
// so the result is the set of all trees a correct greedy builder could return.
struct RefNode {
    int feature = -1;
    double threshold = 0;
    int leaf_class = 0;
    std::shared_ptr<RefNode> left, right;

    int predict(std::span<const double> x) const {
        if (feature < 0) return leaf_class;
        return x[feature] <= threshold ? left->predict(x) : right->predict(x);
    }
};
using RefTree = std::shared_ptr<RefNode>;

double gini_impurity(double c0, double c1) {
    const double n = c0 + c1;
    return n == 0 ? 0.0 : 1.0 - (c0 / n) * (c0 / n) - (c1 / n) * (c1 / n);
}

std::vector<RefTree> reference_trees(const Matrix& x, const std::vector<int>& y, const std::vector<int>& rows) {
    double c0 = 0, c1 = 0;
    for (int r : rows) (y[r] ? c1 : c0) += 1;
    auto leaf = std::make_shared<RefNode>();
    leaf->leaf_class = c1 > c0 ? 1 : 0;
    const double parent = (c0 + c1) * gini_impurity(c0, c1);
    if (c0 == 0 || c1 == 0 || rows.size() < 2) return {leaf};

    struct Cand {
        int f;
        double t;
        double imp;
    };
    std::vector<Cand> cands;
    for (std::size_t f = 0; f < x.cols(); ++f) {
        std::vector<double> vals;
        for (int r : rows) vals.push_back(x(r, f));
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            const double t = vals[i] + (vals[i + 1] - vals[i]) / 2.0;
            double l0 = 0, l1 = 0, r0 = 0, r1 = 0;
            for (int r : rows) {
                if (x(r, f) <= t) {
                    (y[r] ? l1 : l0) += 1;
                } else {
                    (y[r] ? r1 : r0) += 1;
                }
            }
            cands.push_back({static_cast<int>(f), t, (l0 + l1) * gini_impurity(l0, l1) + (r0 + r1) * gini_impurity(r0, r1)});
        }
    }
    double best = parent;
    for (const auto& c : cands) best = std::min(best, c.imp);
    if (!(best < parent - 1e-12)) return {leaf};

    std::vector<RefTree> out;
    for (const auto& c : cands) {
        if (c.imp > best + 1e-12) continue;
        // Within one feature the lowest tied threshold wins, as a left-to-right scan finds it.
        bool lower_tie = false;
        for (const auto& d : cands) lower_tie = lower_tie || (d.f == c.f && d.t < c.t && d.imp <= best + 1e-12);
        if (lower_tie) continue;
        std::vector<int> lrows, rrows;
        for (int r : rows) (x(r, c.f) <= c.t ? lrows : rrows).push_back(r);
        for (const auto& l : reference_trees(x, y, lrows)) {
            for (const auto& r : reference_trees(x, y, rrows)) {
                auto node = std::make_shared<RefNode>();
                node->feature = c.f;
                node->threshold = c.t;
                node->left = l;
                node->right = r;
                out.push_back(node);
                if (out.size() > 512) return out;
            }
        }
    }
    return out;
}

std::string serialized(const Model& m) {
    std::ostringstream ss;
    save_model(ss, m);
    return ss.str();
}

}  // namespace

TEST(LogisticGradient, ExampleAtOrigin) {
    const auto x = Matrix::from_rows({{1.0}});
    const std::vector<int> y{1};
    const LogisticObjective obj(x, y, 0.0);
    std::vector<double> g;
    obj.value_and_gradient(std::vector<double>{0.0, 0.0}, g);
    EXPECT_DOUBLE_EQ(g[0], -0.5);
    EXPECT_DOUBLE_EQ(g[1], -0.5);
}

TEST(LogisticGradient, MatchesCentralDifferences) {
    testgen::Rng rng(100);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = testgen::uniform_int(rng, 5, 40), k = testgen::uniform_int(rng, 1, 8);
        const auto x = testgen::coin(rng) ? testgen::random_matrix(rng, n, k) : testgen::random_counts(rng, n, k);
        const auto y = testgen::random_labels(rng, n);
        const double lambda = testgen::coin(rng) ? 0.0 : testgen::uniform_real(rng, 1e-4, 1.0);
        const LogisticObjective obj(x, y, lambda, Standardizer::fit(x));
        std::vector<double> theta(k + 1);
        for (auto& v : theta) v = testgen::uniform_real(rng, -1.5, 1.5);
        std::vector<double> g;
        obj.value_and_gradient(theta, g);
        double max_diff = 0, max_g = 0;
        for (std::size_t j = 0; j <= k; ++j) {
            const double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
            auto plus = theta, minus = theta;
            plus[j] += h;
            minus[j] -= h;
            const double fd = (obj.value(plus) - obj.value(minus)) / (2 * h);
            max_diff = std::max(max_diff, std::abs(fd - g[j]));
            max_g = std::max(max_g, std::abs(g[j]));
        }
        EXPECT_LE(max_diff / std::max(max_g, 1e-8), 1e-6) << "trial " << t;
    }
}

TEST(TrainLr, SeparableOneDimension) {
    const auto x = Matrix::from_rows({{-1.0}, {1.0}});
    const std::vector<int> y{0, 1};
    LrOptions opt;
    opt.l2_lambda = 0;
    opt.max_iters = 200;
    const auto m = train_lr(x, y, opt);
    EXPECT_GT(m.weights[0], 0);
    EXPECT_LT(m.predict_proba(x.row(0)), 0.5);
    EXPECT_GE(m.predict_proba(x.row(1)), 0.5);
}

TEST(TrainLr, ConstantTargetGivesPrevalenceAndZeroWeights) {
    testgen::Rng rng(3);
    const auto x = testgen::random_matrix(rng, 50, 4);
    const std::vector<int> y(50, 1);
    LrOptions opt;
    opt.l2_lambda = 1.0;
    const auto m = train_lr(x, y, opt);
    for (double w : m.weights) EXPECT_LT(std::abs(w), 1e-6);
    for (std::size_t i = 0; i < x.rows(); ++i) EXPECT_GT(m.predict_proba(x.row(i)), 0.9);
}

TEST(TrainLr, ZeroModelAndMonotonicity) {
    LinearModel zero;
    zero.weights = {0, 0, 0};
    zero.scaling = Standardizer::identity(3);
    EXPECT_EQ(zero.predict_proba(std::vector<double>{4, -2, 7}), 0.5);
    EXPECT_THROW(zero.predict_proba(std::vector<double>{1}), ArgumentError);

    testgen::Rng rng(9);
    const auto x = testgen::random_matrix(rng, 200, 5);
    const auto y = logistic_labels(rng, x, {1, -1, 0.5, 0, 2}, 0.2);
    const auto m = train_lr(x, y);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> p(5);
        for (auto& v : p) v = testgen::uniform_real(rng, -3, 3);
        const std::size_t j = testgen::uniform_int(rng, 0, 4);
        auto q = p;
        q[j] += testgen::uniform_real(rng, 0, 2);
        if (m.weights[j] > 0) EXPECT_GE(m.predict_proba(q), m.predict_proba(p));
        if (m.weights[j] < 0) EXPECT_LE(m.predict_proba(q), m.predict_proba(p));
    }
}

TEST(TrainLr, ScalingReplayedAtPredict) {
    testgen::Rng rng(12);
    const auto x = testgen::random_counts(rng, 80, 6);
    const auto y = testgen::random_labels(rng, 80);
    const auto m = train_lr(x, y);
    const auto s = Standardizer::fit(x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double z = m.bias;
        for (std::size_t j = 0; j < 6; ++j) z += m.weights[j] * ((x(i, j) - s.mean[j]) / s.scale[j]);
        EXPECT_NEAR(m.predict_proba(x.row(i)), 1.0 / (1.0 + std::exp(-z)), 1e-12);
    }
    EXPECT_THROW(train_lr(Matrix::from_rows({{NAN}}), std::vector<int>{1}), DataError);
}

TEST(TrainLr, Deterministic) {
    testgen::Rng rng(13);
    const auto x = testgen::random_counts(rng, 100, 10);
    const auto y = testgen::random_labels(rng, 100);
    EXPECT_EQ(serialized({train_lr(x, y)}), serialized({train_lr(x, y)}));
}

TEST(TrainSvm, SeparablePairReachesZeroHinge) {
    const auto x = Matrix::from_rows({{-1.0}, {1.0}});
    const std::vector<int> y{0, 1};
    SvmOptions opt;
    opt.reg_lambda = 1e-2;
    opt.epochs = 500;
    const auto m = train_svm(x, y, opt);
    EXPECT_LT(hinge_loss(m, x, y), 1e-2);
    EXPECT_LT(m.score(x.row(0)), 0);
    EXPECT_GT(m.score(x.row(1)), 0);
}

TEST(TrainSvm, ObjectiveTraceAndLabelFlipSymmetry) {
    testgen::Rng rng(14);
    const auto x = testgen::random_matrix(rng, 120, 4);
    const auto y = logistic_labels(rng, x, {2, -1, 0, 1}, 0);
    SvmOptions opt;
    opt.reg_lambda = 1e-2;
    opt.epochs = 30;
    opt.seed = 5;
    const auto m = train_svm(x, y, opt);
    // Averaged-iterate objective, non-increasing up to a small tolerance.
    for (std::size_t e = 1; e < m.objective_trace.size(); ++e) {
        EXPECT_LE(m.objective_trace[e], m.objective_trace[e - 1] + 1e-2 * m.objective_trace[e - 1]) << "epoch " << e;
    }
    EXPECT_LT(m.objective_trace.back(), m.objective_trace.front());

    std::vector<int> flipped(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) flipped[i] = 1 - y[i];
    const auto f = train_svm(x, flipped, opt);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double a = m.score(x.row(i)), b = f.score(x.row(i));
        if (a != 0) EXPECT_LT(a * b, 0) << i;
    }
}

TEST(Platt, RecoversLogisticLink) {
    testgen::Rng rng(15);
    std::vector<double> f(20000);
    std::vector<int> y(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] = testgen::uniform_real(rng, -4, 4);
        y[i] = testgen::coin(rng, 1.0 / (1.0 + std::exp(-(1.5 * f[i] - 0.5)))) ? 1 : 0;
    }
    const auto [a, b] = detail::fit_platt(f, y);
    EXPECT_NEAR(a, 1.5, 0.1);
    EXPECT_NEAR(b, -0.5, 0.1);
}

TEST(AdaBoost, AlphaClosedForm) {
    EXPECT_NEAR(adaboost_alpha(0.25), 0.5 * std::log(3.0), 1e-15);
    EXPECT_NEAR(0.5 * std::log(3.0), 0.5493, 5e-5);
    EXPECT_TRUE(std::isfinite(adaboost_alpha(0.0)));
}

TEST(AdaBoost, SeparableOneDimension) {
    const auto x = Matrix::from_rows({{0.1}, {0.4}, {0.5}, {0.9}, {1.3}});
    const std::vector<int> y{0, 0, 1, 1, 1};
    const auto m = train_adaboost(x, y, 20);
    ASSERT_EQ(m.stumps.size(), 1u);
    EXPECT_EQ(m.stumps[0].weighted_error, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) EXPECT_EQ(m.predict_proba(x.row(i)) >= 0.5, y[i] == 1);
    EXPECT_THROW(train_adaboost(x, std::vector<int>(5, 1), 3), DataError);
}

TEST(AdaBoost, LossNonIncreasingAndWeakLearnersBeatChance) {
    testgen::Rng rng(16);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = testgen::uniform_int(rng, 20, 120), k = testgen::uniform_int(rng, 1, 6);
        const auto x = testgen::random_matrix(rng, n, k);
        const auto y = testgen::random_labels(rng, n);
        const auto m = train_adaboost(x, y, 40);
        ASSERT_FALSE(m.stumps.empty());
        double prev = static_cast<double>(n);  // sum exp(0) before any round
        for (std::size_t r = 0; r < m.stumps.size(); ++r) {
            EXPECT_LT(m.stumps[r].weighted_error, 0.5);
            EXPECT_GT(m.stumps[r].alpha, 0.0);
            EXPECT_LE(m.exp_loss_trace[r], prev * (1 + 1e-12)) << "trial " << t << " round " << r;
            prev = m.exp_loss_trace[r];
        }
        // The trace is the loss of the returned ensemble.
        double loss = 0;
        for (std::size_t i = 0; i < n; ++i) loss += std::exp(-(y[i] ? 1.0 : -1.0) * m.score(x.row(i)));
        EXPECT_NEAR(loss, m.exp_loss_trace.back(), 1e-9 * loss);
    }
}

TEST(Forest, VoteFraction) {
    Forest f;
    f.n_features = 1;
    for (int t = 0; t < 10; ++t) {
        DecisionTree tree;
        TreeNode leaf;
        leaf.count1 = t < 7 ? 3 : 1;
        leaf.count0 = 2;
        tree.nodes.push_back(leaf);
        f.trees.push_back(tree);
    }
    EXPECT_DOUBLE_EQ(f.predict_proba(std::vector<double>{0.0}), 0.7);
    EXPECT_THROW(f.predict_proba(std::vector<double>{0.0, 1.0}), ArgumentError);
}

TEST(Forest, DepthZeroAndPureNodes) {
    testgen::Rng rng(17);
    const auto x = testgen::random_matrix(rng, 60, 3);
    const auto y = testgen::random_labels(rng, 60, 0.3);
    ForestOptions opt;
    opt.n_trees = 15;
    opt.max_depth = 0;
    const auto f = train_rf(x, y, opt);
    for (const auto& t : f.trees) EXPECT_EQ(t.nodes.size(), 1u);
    for (std::size_t i = 1; i < x.rows(); ++i) EXPECT_EQ(f.predict_proba(x.row(i)), f.predict_proba(x.row(0)));

    opt.max_depth = 12;
    const auto pure = train_rf(x, std::vector<int>(60, 0), opt);
    for (const auto& t : pure.trees) EXPECT_EQ(t.nodes.size(), 1u);

    const auto grown = train_rf(x, y, opt);
    for (const auto& t : grown.trees) {
        for (const auto& nd : t.nodes) {
            if (!nd.is_leaf()) {
                EXPECT_GE(nd.left, 0);
                EXPECT_GE(nd.right, 0);
                EXPECT_GT(nd.count0 * nd.count1, 0) << "pure node was split";
            }
        }
        EXPECT_LE(t.depth(), 12);
    }
}

TEST(Forest, SingleTreeMatchesReferenceCart) {
    testgen::Rng rng(18);
    int ambiguous = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t k = testgen::uniform_int(rng, 1, 4);
        // Coarse values make ties and repeated values common.
        Matrix x(10, k);
        for (std::size_t r = 0; r < 10; ++r) {
            for (std::size_t c = 0; c < k; ++c) x(r, c) = testgen::uniform_int(rng, -3, 3) * 0.5;
        }
        const auto y = testgen::random_labels(rng, 10);
        ForestOptions opt;
        opt.n_trees = 1;
        opt.bootstrap = false;
        opt.features_per_split = static_cast<int>(k);
        opt.max_depth = 50;
        opt.seed = static_cast<std::uint64_t>(t);
        const auto f = train_rf(x, y, opt);
        std::vector<int> rows(10);
        std::iota(rows.begin(), rows.end(), 0);
        const auto refs = reference_trees(x, y, rows);
        ambiguous += refs.size() > 1;
        std::vector<std::vector<double>> probes;
        for (int p = 0; p < 40; ++p) {
            std::vector<double> v(k);
            for (auto& e : v) e = testgen::uniform_real(rng, -2, 2);
            probes.push_back(v);
        }
        bool any = false;
        for (const auto& ref : refs) {
            bool same = true;
            for (const auto& v : probes) same = same && ref->predict(v) == f.trees[0].predict(v);
            for (std::size_t r = 0; r < 10; ++r) same = same && ref->predict(x.row(r)) == f.trees[0].predict(x.row(r));
            any = any || same;
        }
        EXPECT_TRUE(any) << "trial " << t << ": no reference tree agrees";
    }
    // Some instances must be tie-free so the comparison is not vacuous.
    EXPECT_LT(ambiguous, 190);
}

TEST(Forest, DeterministicAcrossJobs) {
    testgen::Rng rng(19);
    const auto x = testgen::random_counts(rng, 150, 12);
    const auto y = testgen::random_labels(rng, 150);
    ForestOptions opt;
    opt.n_trees = 25;
    opt.seed = 77;
    const auto a = serialized({train_rf(x, y, opt)});
    opt.jobs = 3;
    EXPECT_EQ(serialized({train_rf(x, y, opt)}), a);
    opt.seed = 78;
    EXPECT_NE(serialized({train_rf(x, y, opt)}), a);
}

TEST(ModelIo, RoundTripIsBitExact) {
    testgen::Rng rng(20);
    const auto x = testgen::random_counts(rng, 120, 8);
    const auto y = testgen::random_labels(rng, 120);
    TrainOptions opt;
    opt.adaboost_rounds = 15;
    opt.rf.n_trees = 10;
    opt.svm.epochs = 5;
    for (auto kind : {ModelKind::lr, ModelKind::svm, ModelKind::adaboost, ModelKind::rf}) {
        const Model m = train_model(kind, x, y, opt);
        const auto text = serialized(m);
        std::istringstream in(text);
        const Model back = load_model(in);
        EXPECT_EQ(back.kind(), kind);
        EXPECT_EQ(serialized(back), text) << to_string(kind);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            EXPECT_EQ(back.predict_proba(x.row(i)), m.predict_proba(x.row(i)));
            EXPECT_EQ(back.rank_score(x.row(i)), m.rank_score(x.row(i)));
        }
    }
}

TEST(ModelIo, RejectsDamagedFiles) {
    std::istringstream bad_header("not-a-model 1\n");
    EXPECT_THROW(load_model(bad_header), DataError);
    std::istringstream truncated("adpredict-model 1\nkind lr\ndim 2\nbias 0\n");
    EXPECT_THROW(load_model(truncated), DataError);
    EXPECT_THROW(parse_model_kind("gbm"), ConfigError);
}
