#ifndef ADPREDICT_METRICS_HPP
#define ADPREDICT_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "adpredict/error.hpp"

namespace adpredict {

struct Confusion {
    long tp = 0, fp = 0, tn = 0, fn = 0;

    long n() const { return tp + fp + tn + fn; }
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

namespace detail {
inline void check_scored(std::span<const double> scores, std::span<const int> labels) {
    if (scores.empty()) throw ArgumentError("no scores");
    if (scores.size() != labels.size()) throw ArgumentError("scores and labels differ in length");
    for (int y : labels) {
        if (y != 0 && y != 1) throw ArgumentError("labels must be 0 or 1");
    }
}
}  // namespace detail

/// Predicted positive iff score >= threshold.
inline Confusion confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
    detail::check_scored(scores, labels);
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (labels[i] == 1) {
            ++(pred ? c.tp : c.fn);
        } else {
            ++(pred ? c.fp : c.tn);
        }
    }
    return c;
}

struct Prf {
    double precision = 0, recall = 0, f1 = 0;
};

inline Prf prf(long tp, long fp, long fn) {
    if (tp < 0 || fp < 0 || fn < 0) throw ArgumentError("prf: negative count");
    Prf r;
    r.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    r.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    r.f1 = r.precision + r.recall == 0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

/// P(score_pos > score_neg) + 0.5 P(tie), from mid-rank sums.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    detail::check_scored(scores, labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    double n_pos = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // ranks i+1 .. j share the mid-rank (i + 1 + j) / 2
        const double mid = static_cast<double>(i + 1 + j) / 2.0;
        for (std::size_t r = i; r < j; ++r) {
            if (labels[order[r]] == 1) {
                pos_rank_sum += mid;
                n_pos += 1.0;
            }
        }
        i = j;
    }
    const double n_neg = static_cast<double>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw MetricUndefined("roc_auc needs both classes");
    return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

enum class PrAucMethod { average_precision, trapezoid };

/// Area under the precision-recall curve. Tied scores form one operating point.
inline double pr_auc(std::span<const double> scores, std::span<const int> labels,
                     PrAucMethod method = PrAucMethod::average_precision) {
    detail::check_scored(scores, labels);
    const std::size_t n = scores.size();
    const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    if (n_pos == 0) throw MetricUndefined("pr_auc needs at least one positive");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double tp = 0, fp = 0, area = 0;
    double prev_recall = 0, prev_precision = 1.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        double group_pos = 0;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            group_pos += labels[order[j]];
            ++j;
        }
        tp += group_pos;
        fp += static_cast<double>(j - i) - group_pos;
        const double precision = tp / (tp + fp);
        const double recall = tp / n_pos;
        if (method == PrAucMethod::average_precision) {
            area += precision * (group_pos / n_pos);
        } else {
            area += (recall - prev_recall) * (precision + prev_precision) / 2.0;
        }
        prev_recall = recall;
        prev_precision = precision;
        i = j;
    }
    return area;
}

/// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
    if (!(a > 0)) throw ArgumentError("gamma_q: a must be > 0");
    if (x < 0) throw ArgumentError("gamma_q: x must be >= 0");
    if (x == 0) return 1.0;
    const double log_prefix = a * std::log(x) - x - std::lgamma(a);
    constexpr double eps = 1e-16;
    if (x < a + 1.0) {
        // Series for P(a, x).
        double term = 1.0 / a, sum = term, ap = a;
        for (int n = 0; n < 10000; ++n) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * eps) break;
        }
        return std::max(0.0, 1.0 - sum * std::exp(log_prefix));
    }
    // Continued fraction for Q(a, x), modified Lentz.
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) break;
    }
    return std::min(1.0, std::exp(log_prefix) * h);
}

/// Survival function of the chi-square distribution with `df` degrees of freedom.
inline double chi_square_sf(double x, double df) {
    if (x < 0 || std::isnan(x)) throw ArgumentError("chi_square_sf: x must be >= 0");
    if (!(df >= 1)) throw ArgumentError("chi_square_sf: df must be >= 1");
    return gamma_q(df / 2.0, x / 2.0);
}

struct CalibrationGroup {
    std::size_t n = 0;
    double mean_prob = 0;
    double observed_rate = 0;
    double expected = 0;  // sum of probabilities
    double observed = 0;  // count of positives
};

struct HosmerLemeshow {
    double statistic = 0;
    double p_value = 1;
    int df = 0;
    std::vector<CalibrationGroup> groups;
};

/// Hosmer-Lemeshow test over `n_groups` quantile groups of the predicted probability.
/// Patients with identical probabilities always share a group.
inline HosmerLemeshow hosmer_lemeshow(std::span<const double> probs, std::span<const int> labels, int n_groups = 5) {
    detail::check_scored(probs, labels);
    if (n_groups < 3) throw ArgumentError("hosmer_lemeshow: n_groups must be >= 3 (df = n_groups - 2)");
    for (double p : probs) {
        if (!(p >= 0 && p <= 1)) throw ArgumentError("hosmer_lemeshow: probability outside [0, 1]");
    }
    const std::size_t n = probs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });

    HosmerLemeshow hl;
    hl.df = n_groups - 2;
    std::size_t start = 0;
    for (int g = 0; g < n_groups; ++g) {
        std::size_t end = g + 1 == n_groups ? n : (n * static_cast<std::size_t>(g + 1) + n_groups / 2) / n_groups;
        end = std::max(end, start);
        while (end < n && end > 0 && probs[order[end]] == probs[order[end - 1]]) ++end;
        if (end == start) {
            throw MetricUndefined("hosmer_lemeshow: group " + std::to_string(g + 1) + " is empty after tie handling");
        }
        CalibrationGroup cg;
        cg.n = end - start;
        for (std::size_t r = start; r < end; ++r) {
            cg.expected += probs[order[r]];
            cg.observed += labels[order[r]];
        }
        cg.mean_prob = cg.expected / static_cast<double>(cg.n);
        cg.observed_rate = cg.observed / static_cast<double>(cg.n);
        const double denom = cg.expected * (1.0 - cg.expected / static_cast<double>(cg.n));
        if (!(denom > 0)) {
            throw MetricUndefined("hosmer_lemeshow: group " + std::to_string(g + 1) +
                                  " has expected count 0 or n_g (degenerate)");
        }
        hl.statistic += (cg.observed - cg.expected) * (cg.observed - cg.expected) / denom;
        hl.groups.push_back(cg);
        start = end;
    }
    hl.p_value = chi_square_sf(hl.statistic, hl.df);
    return hl;
}

struct EvalReport {
    Prf case_class;
    Prf control_class;
    Confusion counts;
    double accuracy = 0;
    double roc_auc = std::numeric_limits<double>::quiet_NaN();
    double pr_auc = std::numeric_limits<double>::quiet_NaN();
    double hl_statistic = std::numeric_limits<double>::quiet_NaN();
    double hl_p_value = std::numeric_limits<double>::quiet_NaN();
    std::vector<CalibrationGroup> calibration;
    long n = 0;
    long n_positive = 0;
    double threshold = 0.5;
};

/// Threshold metrics and calibration come from `probs`; ROC and PR areas from `rank_scores`.
/// Undefined areas or calibration are left as NaN rather than thrown.
inline EvalReport evaluate(std::span<const double> probs, std::span<const double> rank_scores,
                           std::span<const int> labels, double threshold = 0.5, int hl_groups = 5,
                           PrAucMethod pr_method = PrAucMethod::average_precision) {
    EvalReport r;
    r.threshold = threshold;
    r.counts = confusion(probs, labels, threshold);
    r.n = r.counts.n();
    r.n_positive = r.counts.tp + r.counts.fn;
    r.case_class = prf(r.counts.tp, r.counts.fp, r.counts.fn);
    r.control_class = prf(r.counts.tn, r.counts.fn, r.counts.fp);
    r.accuracy = static_cast<double>(r.counts.tp + r.counts.tn) / static_cast<double>(r.n);
    try {
        r.roc_auc = roc_auc(rank_scores, labels);
    } catch (const MetricUndefined&) {
    }
    try {
        r.pr_auc = pr_auc(rank_scores, labels, pr_method);
    } catch (const MetricUndefined&) {
    }
    try {
        const auto hl = hosmer_lemeshow(probs, labels, hl_groups);
        r.hl_statistic = hl.statistic;
        r.hl_p_value = hl.p_value;
        r.calibration = hl.groups;
    } catch (const MetricUndefined&) {
    }
    return r;
}

struct MetricsRow {
    std::string model;
    std::string setting;
    int clean_years = 0;
    std::string subgroup;
    EvalReport report;
};

inline std::string format_metric(double v) {
    if (std::isnan(v)) return "NA";
    return fmt::format("{:.6f}", v);
}

inline void write_metrics_header(std::ostream& out) {
    out << "model,setting,clean_years,subgroup,precision_case,recall_case,f1_case,precision_ctrl,recall_ctrl,"
           "f1_ctrl,accuracy,pr_auc,roc_auc,hl_stat,hl_p\n";
}

inline void write_metrics_row(std::ostream& out, const MetricsRow& row) {
    const auto& r = row.report;
    out << row.model << ',' << row.setting << ',' << row.clean_years << ',' << row.subgroup << ','
        << format_metric(r.case_class.precision) << ',' << format_metric(r.case_class.recall) << ','
        << format_metric(r.case_class.f1) << ',' << format_metric(r.control_class.precision) << ','
        << format_metric(r.control_class.recall) << ',' << format_metric(r.control_class.f1) << ','
        << format_metric(r.accuracy) << ',' << format_metric(r.pr_auc) << ',' << format_metric(r.roc_auc) << ','
        << format_metric(r.hl_statistic) << ',' << format_metric(r.hl_p_value) << '\n';
}

}  // namespace adpredict

#endif  // ADPREDICT_METRICS_HPP
