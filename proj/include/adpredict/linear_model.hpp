#ifndef ADPREDICT_LINEAR_MODEL_HPP
#define ADPREDICT_LINEAR_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "adpredict/error.hpp"
#include "adpredict/matrix.hpp"
#include "adpredict/random.hpp"

namespace adpredict {

/// Per-feature affine map fixed at fit time: z = (x - mean) / scale.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const Matrix& x) {
        Standardizer s;
        const std::size_t n = x.rows(), k = x.cols();
        s.mean.assign(k, 0.0);
        s.scale.assign(k, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = x.row(r);
            for (std::size_t j = 0; j < k; ++j) s.mean[j] += row[j];
        }
        for (auto& m : s.mean) m /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = x.row(r);
            for (std::size_t j = 0; j < k; ++j) {
                const double d = row[j] - s.mean[j];
                s.scale[j] += d * d;
            }
        }
        for (auto& v : s.scale) {
            v = std::sqrt(v / static_cast<double>(n));
            if (!(v > 1e-12)) v = 1.0;
        }
        return s;
    }

    static Standardizer identity(std::size_t k) { return {std::vector<double>(k, 0.0), std::vector<double>(k, 1.0)}; }

    Matrix apply(const Matrix& x) const {
        Matrix z(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const auto in = x.row(r);
            auto out = z.row(r);
            for (std::size_t j = 0; j < x.cols(); ++j) out[j] = (in[j] - mean[j]) / scale[j];
        }
        return z;
    }
};

enum class LinearKind { logistic, svm };

struct LinearModel {
    LinearKind kind = LinearKind::logistic;
    std::vector<double> weights;  // on the standardized scale
    double bias = 0.0;
    Standardizer scaling;
    double platt_a = 1.0;  // svm: p = sigmoid(platt_a * score + platt_b)
    double platt_b = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> objective_trace;

    std::size_t dim() const { return weights.size(); }

    /// Contribution of feature j to the score at x.
    double term(std::span<const double> x, std::size_t j) const {
        return weights[j] * ((x[j] - scaling.mean[j]) / scaling.scale[j]);
    }

    /// Every per-feature contribution, materialized so that sums over them do not depend
    /// on floating-point contraction choices made by the compiler.
    std::vector<double> terms(std::span<const double> x) const {
        check_dim(x);
        std::vector<double> t(weights.size());
        for (std::size_t j = 0; j < weights.size(); ++j) t[j] = term(x, j);
        return t;
    }

    /// Pre-sigmoid score (log-odds for logistic, margin for svm): the terms summed in
    /// feature order, then the bias.
    double score(std::span<const double> x) const {
        const auto t = terms(x);
        double s = 0.0;
        for (double v : t) s += v;
        return s + bias;
    }

    void check_dim(std::span<const double> x) const {
        if (x.size() != weights.size()) {
            throw ArgumentError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                                std::to_string(weights.size()));
        }
    }

    double predict_proba(std::span<const double> x) const {
        const double s = score(x);
        return kind == LinearKind::logistic ? sigmoid(s) : sigmoid(platt_a * s + platt_b);
    }
};

struct LrOptions {
    double l2_lambda = 1e-4;
    int max_iters = 500;
    double tol = 1e-6;
    std::uint64_t seed = 0;  // unused by the deterministic solver; kept for a uniform trainer signature
    bool balance_classes = false;
};

/// Mean binary cross-entropy plus (lambda/2)|w|^2 for a logistic model on standardized
/// features z = (x - mean) / scale. Parameters are laid out as [w_0 .. w_{k-1}, b].
/// The design is kept sparse in the raw coordinates; the affine map is folded into
/// each evaluation, so cost scales with the number of nonzero raw entries.
class LogisticObjective {
public:
    LogisticObjective(const Matrix& x, std::span<const int> y, double lambda, Standardizer scaling,
                      std::vector<double> sample_weight = {})
        : x_(SparseRows::from(x)), y_(y.begin(), y.end()), lambda_(lambda), scaling_(std::move(scaling)),
          sw_(std::move(sample_weight)) {
        if (sw_.empty()) sw_.assign(y_.size(), 1.0);
        norm_ = std::accumulate(sw_.begin(), sw_.end(), 0.0);
    }

    LogisticObjective(const Matrix& x, std::span<const int> y, double lambda)
        : LogisticObjective(x, y, lambda, Standardizer::identity(x.cols())) {}

    std::size_t dim() const { return x_.cols + 1; }

    double value(std::span<const double> theta) const {
        margins(theta);
        double loss = 0.0;
        for (std::size_t i = 0; i < y_.size(); ++i) loss += sw_[i] * (log1p_exp(m_[i]) - y_[i] * m_[i]);
        return loss / norm_ + penalty(theta);
    }

    /// Returns the objective value and writes the gradient into `grad`.
    double value_and_gradient(std::span<const double> theta, std::vector<double>& grad) const {
        margins(theta);
        const std::size_t k = x_.cols;
        grad.assign(k + 1, 0.0);
        double loss = 0.0, r_total = 0.0;
        for (std::size_t i = 0; i < y_.size(); ++i) {
            const double m = m_[i];
            loss += sw_[i] * (log1p_exp(m) - y_[i] * m);
            const double r = sw_[i] * (sigmoid(m) - y_[i]);
            r_total += r;
            for (std::size_t e = x_.row_start[i]; e < x_.row_start[i + 1]; ++e) grad[x_.index[e]] += r * x_.value[e];
        }
        for (std::size_t j = 0; j < k; ++j) {
            grad[j] = (grad[j] - scaling_.mean[j] * r_total) / scaling_.scale[j] / norm_ + lambda_ * theta[j];
        }
        grad[k] = r_total / norm_;
        return loss / norm_ + penalty(theta);
    }

private:
    double penalty(std::span<const double> theta) const {
        double sq = 0.0;
        for (std::size_t j = 0; j + 1 < theta.size(); ++j) sq += theta[j] * theta[j];
        return 0.5 * lambda_ * sq;
    }

    void margins(std::span<const double> theta) const {
        const std::size_t k = x_.cols;
        v_.resize(k);
        double offset = theta[k];
        for (std::size_t j = 0; j < k; ++j) {
            v_[j] = theta[j] / scaling_.scale[j];
            offset -= v_[j] * scaling_.mean[j];
        }
        m_.resize(x_.rows());
        for (std::size_t i = 0; i < x_.rows(); ++i) {
            double s = offset;
            for (std::size_t e = x_.row_start[i]; e < x_.row_start[i + 1]; ++e) s += v_[x_.index[e]] * x_.value[e];
            m_[i] = s;
        }
    }

    SparseRows x_;
    std::vector<int> y_;
    double lambda_;
    Standardizer scaling_;
    std::vector<double> sw_;
    double norm_ = 1.0;
    mutable std::vector<double> v_, m_;
};

namespace detail {
inline std::vector<double> balanced_weights(std::span<const int> y) {
    const double n = static_cast<double>(y.size());
    const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const double neg = n - pos;
    std::vector<double> w(y.size(), 1.0);
    if (pos == 0 || neg == 0) return w;
    for (std::size_t i = 0; i < y.size(); ++i) w[i] = y[i] == 1 ? n / (2 * pos) : n / (2 * neg);
    return w;
}
inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}
}  // namespace detail

/// Logistic regression by accelerated full-batch gradient descent with backtracking line
/// search and adaptive restart. Features are standardized with training statistics that
/// are stored in the model. Stops when the gradient max-norm drops below `tol`.
inline LinearModel train_lr(const Matrix& x, std::span<const int> y, const LrOptions& opt = {}) {
    check_training_data(x, y);
    if (opt.l2_lambda < 0) throw ArgumentError("l2_lambda must be >= 0");
    LinearModel model;
    model.kind = LinearKind::logistic;
    model.scaling = Standardizer::fit(x);
    const LogisticObjective obj(x, y, opt.l2_lambda, model.scaling,
                                opt.balance_classes ? detail::balanced_weights(y) : std::vector<double>{});

    const std::size_t d = obj.dim();
    std::vector<double> theta(d, 0.0), look(d, 0.0), next(d), grad;
    double f_theta = obj.value(theta);
    double lipschitz = 1.0;
    double t = 1.0;
    int it = 0;
    for (; it < opt.max_iters; ++it) {
        const double f_look = obj.value_and_gradient(look, grad);
        if (detail::max_abs(grad) < opt.tol && f_look <= f_theta) {
            theta = look;
            f_theta = f_look;
            model.converged = true;
            break;
        }
        double sq = 0.0;
        for (double g : grad) sq += g * g;
        double f_next = 0.0;
        for (;;) {
            for (std::size_t j = 0; j < d; ++j) next[j] = look[j] - grad[j] / lipschitz;
            f_next = obj.value(next);
            if (f_next <= f_look - 0.5 * sq / lipschitz || lipschitz > 1e12) break;
            lipschitz *= 2.0;
        }
        if (f_next > f_theta) {
            // Momentum overshot: restart from the current iterate.
            t = 1.0;
            look = theta;
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;
        for (std::size_t j = 0; j < d; ++j) look[j] = next[j] + beta * (next[j] - theta[j]);
        theta.swap(next);
        f_theta = f_next;
        t = t_next;
        lipschitz = std::max(1e-6, lipschitz * 0.9);
        model.objective_trace.push_back(f_theta);
    }
    if (!model.converged) {
        obj.value_and_gradient(theta, grad);
        model.converged = detail::max_abs(grad) < opt.tol;
    }
    model.iterations = it;
    model.weights.assign(theta.begin(), theta.end() - 1);
    model.bias = theta.back();
    return model;
}

struct SvmOptions {
    double reg_lambda = 1e-4;
    int epochs = 20;
    std::uint64_t seed = 0;
};

/// Primal hinge objective with the bias folded into the regularized weight vector.
inline double svm_objective(const Matrix& z, std::span<const int> y01, std::span<const double> w, double b,
                            double lambda) {
    double hinge = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const double yi = y01[i] == 1 ? 1.0 : -1.0;
        const auto row = z.row(i);
        double s = b;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * row[j];
        hinge += std::max(0.0, 1.0 - yi * s);
    }
    double sq = b * b;
    for (double v : w) sq += v * v;
    return hinge / static_cast<double>(z.rows()) + 0.5 * lambda * sq;
}

namespace detail {

/// Platt sigmoid fit by Newton's method with regularized targets; returns (a, b) such that
/// p = sigmoid(a * f + b).
inline std::pair<double, double> fit_platt(std::span<const double> f, std::span<const int> y) {
    const double prior1 = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const double prior0 = static_cast<double>(y.size()) - prior1;
    const double hi = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo = 1.0 / (prior0 + 2.0);
    std::vector<double> t(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] == 1 ? hi : lo;
    // Parameterization of the reference algorithm: P(y=1|f) = 1 / (1 + exp(A f + B)).
    double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
    auto fval_at = [&](double aa, double bb) {
        double v = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double fa = f[i] * aa + bb;
            v += fa >= 0 ? t[i] * fa + std::log1p(std::exp(-fa)) : (t[i] - 1.0) * fa + std::log1p(std::exp(fa));
        }
        return v;
    };
    double fval = fval_at(a, b);
    for (int iter = 0; iter < 100; ++iter) {
        double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double fa = f[i] * a + b;
            double p, q;
            if (fa >= 0) {
                p = std::exp(-fa) / (1.0 + std::exp(-fa));
                q = 1.0 / (1.0 + std::exp(-fa));
            } else {
                p = 1.0 / (1.0 + std::exp(fa));
                q = std::exp(fa) / (1.0 + std::exp(fa));
            }
            const double d2 = p * q;
            h11 += f[i] * f[i] * d2;
            h22 += d2;
            h21 += f[i] * d2;
            const double d1 = t[i] - p;
            g1 += f[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double step = 1.0;
        while (step >= 1e-10) {
            const double na = a + step * da, nb = b + step * db;
            const double nf = fval_at(na, nb);
            if (nf < fval + 1e-4 * step * gd) {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if (step < 1e-10) break;
    }
    return {-a, -b};
}

}  // namespace detail

/// Linear SVM by Pegasos stochastic subgradient descent on the hinge loss with a fixed
/// shuffle seed; the model keeps the running average of iterates. Probabilities come from
/// a Platt sigmoid fit on the training margins.
inline LinearModel train_svm(const Matrix& x, std::span<const int> y, const SvmOptions& opt = {}) {
    check_training_data(x, y);
    if (!(opt.reg_lambda > 0)) throw ArgumentError("reg_lambda must be > 0");
    if (opt.epochs < 1) throw ArgumentError("epochs must be >= 1");
    LinearModel model;
    model.kind = LinearKind::svm;
    model.scaling = Standardizer::fit(x);
    const Matrix z = model.scaling.apply(x);
    const std::size_t n = z.rows(), k = z.cols();
    const double lambda = opt.reg_lambda;
    const double radius = 1.0 / std::sqrt(lambda);

    std::vector<double> w(k + 1, 0.0), avg(k + 1, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(opt.seed);
    double steps = 0.0;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        for (std::size_t idx : order) {
            steps += 1.0;
            const double eta = 1.0 / (lambda * steps);
            const double yi = y[idx] == 1 ? 1.0 : -1.0;
            const auto row = z.row(idx);
            double s = w[k];
            for (std::size_t j = 0; j < k; ++j) s += w[j] * row[j];
            const double shrink = 1.0 - eta * lambda;
            for (auto& v : w) v *= shrink;
            if (yi * s < 1.0) {
                for (std::size_t j = 0; j < k; ++j) w[j] += eta * yi * row[j];
                w[k] += eta * yi;
            }
            double norm = 0.0;
            for (double v : w) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > radius) {
                for (auto& v : w) v *= radius / norm;
            }
            const double mix = 1.0 / steps;
            for (std::size_t j = 0; j <= k; ++j) avg[j] += (w[j] - avg[j]) * mix;
        }
        model.objective_trace.push_back(
            svm_objective(z, y, std::span<const double>(avg.data(), k), avg[k], lambda));
    }
    model.weights.assign(avg.begin(), avg.end() - 1);
    model.bias = avg.back();
    model.iterations = opt.epochs;
    model.converged = true;

    std::vector<double> margins(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        const auto row = z.row(i);
        for (std::size_t j = 0; j < k; ++j) s += model.weights[j] * row[j];
        margins[i] = s + model.bias;
    }
    const auto [a, b] = detail::fit_platt(margins, y);
    model.platt_a = a;
    model.platt_b = b;
    return model;
}

}  // namespace adpredict

#endif  // ADPREDICT_LINEAR_MODEL_HPP
