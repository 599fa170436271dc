#ifndef ADPREDICT_ADABOOST_HPP
#define ADPREDICT_ADABOOST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "adpredict/error.hpp"
#include "adpredict/matrix.hpp"

namespace adpredict {

/// h(x) = polarity if x[feature] > threshold, else -polarity.
struct Stump {
    std::size_t feature = 0;
    double threshold = 0.0;
    int polarity = 1;
    double alpha = 0.0;
    double weighted_error = 0.0;

    int predict(std::span<const double> x) const { return x[feature] > threshold ? polarity : -polarity; }
};

struct StumpEnsemble {
    std::size_t n_features = 0;
    std::vector<Stump> stumps;
    std::vector<double> exp_loss_trace;  // sum_i exp(-y_i F(x_i)) after each round

    /// Signed ensemble score F(x) = sum_t alpha_t h_t(x).
    double score(std::span<const double> x) const {
        if (x.size() != n_features) {
            throw ArgumentError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                                std::to_string(n_features));
        }
        double f = 0.0;
        for (const auto& s : stumps) f += s.alpha * s.predict(x);
        return f;
    }

    /// Logistic link matching the exponential loss: P(y=1|x) = 1 / (1 + exp(-2F)).
    double predict_proba(std::span<const double> x) const { return sigmoid(2.0 * score(x)); }
};

inline constexpr double adaboost_min_error = 1e-10;

inline double adaboost_alpha(double eps) {
    eps = std::clamp(eps, adaboost_min_error, 1.0 - adaboost_min_error);
    return 0.5 * std::log((1.0 - eps) / eps);
}

/// Discrete AdaBoost over depth-1 stumps. Labels are given as {0,1}.
inline StumpEnsemble train_adaboost(const Matrix& x, std::span<const int> y, int n_rounds) {
    check_training_data(x, y);
    if (n_rounds < 1) throw ArgumentError("n_rounds must be >= 1");
    const std::size_t n = x.rows(), k = x.cols();
    const auto n_pos = std::count(y.begin(), y.end(), 1);
    if (n_pos == 0 || n_pos == static_cast<long>(n)) throw DataError("adaboost: training labels are all one class");

    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] == 1 ? 1.0 : -1.0;

    // Per-feature sample order and sorted values, built once.
    std::vector<std::vector<std::uint32_t>> order(k, std::vector<std::uint32_t>(n));
    std::vector<std::vector<double>> sorted(k, std::vector<double>(n));
    for (std::size_t j = 0; j < k; ++j) {
        auto& o = order[j];
        std::iota(o.begin(), o.end(), 0u);
        std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, j) < x(b, j); });
        for (std::size_t r = 0; r < n; ++r) sorted[j][r] = x(o[r], j);
    }

    StumpEnsemble model;
    model.n_features = k;
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<double> f(n, 0.0);

    for (int round = 0; round < n_rounds; ++round) {
        double w_pos = 0.0, w_neg = 0.0;
        for (std::size_t i = 0; i < n; ++i) (ys[i] > 0 ? w_pos : w_neg) += w[i];

        Stump best;
        double best_err = 2.0;
        for (std::size_t j = 0; j < k; ++j) {
            const auto& o = order[j];
            const auto& v = sorted[j];
            double left_pos = 0.0, left_neg = 0.0;
            auto consider = [&](double threshold) {
                // polarity +1: right -> +1, so errors are left positives and right negatives.
                const double err_plus = left_pos + (w_neg - left_neg);
                const double err_minus = left_neg + (w_pos - left_pos);
                if (err_plus < best_err) {
                    best_err = err_plus;
                    best = {j, threshold, 1, 0.0, err_plus};
                }
                if (err_minus < best_err) {
                    best_err = err_minus;
                    best = {j, threshold, -1, 0.0, err_minus};
                }
            };
            // Threshold below every value: everything is on the right.
            consider(v[0] - 1.0);
            for (std::size_t r = 0; r < n; ++r) {
                const std::size_t i = o[r];
                (ys[i] > 0 ? left_pos : left_neg) += w[i];
                if (r + 1 < n && v[r] < v[r + 1]) consider(v[r] + (v[r + 1] - v[r]) / 2.0);
            }
        }

        const double eps = std::max(0.0, best_err);
        if (eps >= 0.5) break;
        best.weighted_error = eps;
        best.alpha = adaboost_alpha(eps);
        model.stumps.push_back(best);

        double total = 0.0, loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double h = best.predict(x.row(i));
            f[i] += best.alpha * h;
            w[i] *= std::exp(-best.alpha * ys[i] * h);
            total += w[i];
            loss += std::exp(-ys[i] * f[i]);
        }
        for (auto& v : w) v /= total;
        model.exp_loss_trace.push_back(loss);
        if (eps <= adaboost_min_error) break;
    }
    return model;
}

}  // namespace adpredict

#endif  // ADPREDICT_ADABOOST_HPP
