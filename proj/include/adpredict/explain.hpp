#ifndef ADPREDICT_EXPLAIN_HPP
#define ADPREDICT_EXPLAIN_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "adpredict/error.hpp"
#include "adpredict/features.hpp"
#include "adpredict/lexicon.hpp"
#include "adpredict/linear_model.hpp"
#include "adpredict/matrix.hpp"

namespace adpredict {

/// Shapley attribution of one prediction on the pre-sigmoid score scale.
struct Attribution {
    std::vector<double> per_feature;
    double base_value = 0;  // score at the background point
    double score = 0;       // score at x
};

/// phi_j = w_j (x_j - m_j) in the model's standardized coordinates; exact for linear scores.
/// With the training means as background, base_value is the bias and
/// sum(phi) + base_value reproduces score(x) exactly.
inline Attribution linear_shap(const LinearModel& model, std::span<const double> x,
                               std::span<const double> background_mean) {
    if (x.size() != model.dim() || background_mean.size() != model.dim()) {
        throw ArgumentError("linear_shap: dimension mismatch");
    }
    const auto tx = model.terms(x);
    const auto tb = model.terms(background_mean);
    Attribution a;
    a.per_feature.resize(model.dim());
    double base = 0.0;
    for (std::size_t j = 0; j < model.dim(); ++j) {
        a.per_feature[j] = tx[j] - tb[j];
        base += tb[j];
    }
    a.base_value = base + model.bias;
    double s = 0.0;
    for (double v : tx) s += v;
    a.score = s + model.bias;
    return a;
}

/// sum(phi) + base in feature order, the same order score() uses.
inline double attribution_total(const Attribution& a) {
    double s = 0.0;
    for (double v : a.per_feature) s += v;
    return s + a.base_value;
}

/// Exact Shapley values by enumerating every coalition. Features outside the coalition
/// take their background value. Exponential in K, so K is capped.
inline std::vector<double> exact_shap_bruteforce(const std::function<double(std::span<const double>)>& f,
                                                 std::span<const double> x, std::span<const double> background,
                                                 std::size_t max_features = 12) {
    const std::size_t k = x.size();
    if (background.size() != k) throw ArgumentError("exact_shap_bruteforce: dimension mismatch");
    if (k > max_features) {
        throw ArgumentError("exact_shap_bruteforce: " + std::to_string(k) + " features exceeds limit " +
                            std::to_string(max_features));
    }
    const std::size_t n_sets = std::size_t{1} << k;
    std::vector<double> value(n_sets);
    std::vector<double> point(k);
    for (std::size_t s = 0; s < n_sets; ++s) {
        for (std::size_t j = 0; j < k; ++j) point[j] = (s >> j) & 1u ? x[j] : background[j];
        value[s] = f(point);
    }
    // weight[m] = m! (k - m - 1)! / k!
    std::vector<double> weight(k, 0.0);
    for (std::size_t m = 0; m < k; ++m) {
        weight[m] = std::exp(std::lgamma(m + 1.0) + std::lgamma(static_cast<double>(k - m)) - std::lgamma(k + 1.0));
    }
    std::vector<double> phi(k, 0.0);
    for (std::size_t s = 0; s < n_sets; ++s) {
        const auto size = static_cast<std::size_t>(std::popcount(s));
        for (std::size_t j = 0; j < k; ++j) {
            if ((s >> j) & 1u) continue;
            phi[j] += weight[size] * (value[s | (std::size_t{1} << j)] - value[s]);
        }
    }
    return phi;
}

/// Patient-age bands used for importance summaries.
inline std::string importance_age_band(int age) {
    if (age < 60) return "<60";
    if (age < 70) return "60-69";
    if (age < 80) return "70-79";
    return "80+";
}

inline const std::vector<std::string>& importance_age_bands() {
    static const std::vector<std::string> bands{"<60", "60-69", "70-79", "80+"};
    return bands;
}

struct FeatureImportance {
    std::string keyword;
    int age = 0;
    KeywordGroup group = KeywordGroup::cognition_other;
    double mean_abs_phi = 0;
    int rank = 0;
};

struct GroupImportance {
    std::string age_band;  // "all" or one of importance_age_bands()
    KeywordGroup group = KeywordGroup::cognition_other;
    double importance = 0;  // sum of mean |phi| over the group's features in the band
    double share = 0;       // fraction of the band's total importance
    int rank = 0;           // within the band
};

struct KeywordImportance {
    std::string keyword;
    KeywordGroup group = KeywordGroup::cognition_other;
    double importance = 0;
    int rank = 0;
};

struct ImportanceSummary {
    std::vector<FeatureImportance> features;  // ranked
    std::vector<KeywordImportance> keywords;  // ranked
    std::vector<GroupImportance> groups;      // "all" band first, then each age band; ranked within band
};

/// Mean |phi| over a set of attributions, aggregated per feature, keyword, keyword group,
/// and age band. Ties rank by keyword text then age.
inline ImportanceSummary group_importance(const std::vector<Attribution>& attributions, const PairVocabulary& vocab,
                                          const Lexicon& lexicon) {
    ImportanceSummary out;
    const std::size_t k = vocab.size();
    std::vector<double> mean_abs(k, 0.0);
    for (const auto& a : attributions) {
        if (a.per_feature.size() != k) throw ArgumentError("group_importance: attribution size differs from vocabulary");
        for (std::size_t j = 0; j < k; ++j) mean_abs[j] += std::abs(a.per_feature[j]);
    }
    if (!attributions.empty()) {
        for (auto& v : mean_abs) v /= static_cast<double>(attributions.size());
    }
    for (std::size_t j = 0; j < k; ++j) {
        out.features.push_back(
            {vocab.keywords[j], vocab.pairs[j].age, lexicon[vocab.pairs[j].keyword].group, mean_abs[j], 0});
    }
    std::stable_sort(out.features.begin(), out.features.end(), [](const auto& a, const auto& b) {
        if (a.mean_abs_phi != b.mean_abs_phi) return a.mean_abs_phi > b.mean_abs_phi;
        if (a.keyword != b.keyword) return a.keyword < b.keyword;
        return a.age < b.age;
    });
    for (std::size_t i = 0; i < out.features.size(); ++i) out.features[i].rank = static_cast<int>(i + 1);

    std::map<std::string, KeywordImportance> by_keyword;
    std::map<std::string, std::map<KeywordGroup, double>> by_band;
    for (const auto& g : all_keyword_groups) {
        by_band["all"][g] = 0.0;
        for (const auto& b : importance_age_bands()) by_band[b][g] = 0.0;
    }
    for (const auto& f : out.features) {
        auto& kw = by_keyword[f.keyword];
        kw.keyword = f.keyword;
        kw.group = f.group;
        kw.importance += f.mean_abs_phi;
        by_band["all"][f.group] += f.mean_abs_phi;
        by_band[importance_age_band(f.age)][f.group] += f.mean_abs_phi;
    }
    for (auto& [_, v] : by_keyword) out.keywords.push_back(v);
    std::stable_sort(out.keywords.begin(), out.keywords.end(), [](const auto& a, const auto& b) {
        if (a.importance != b.importance) return a.importance > b.importance;
        return a.keyword < b.keyword;
    });
    for (std::size_t i = 0; i < out.keywords.size(); ++i) out.keywords[i].rank = static_cast<int>(i + 1);

    std::vector<std::string> band_order{"all"};
    band_order.insert(band_order.end(), importance_age_bands().begin(), importance_age_bands().end());
    for (const auto& band : band_order) {
        std::vector<GroupImportance> rows;
        double total = 0.0;
        for (const auto g : all_keyword_groups) {
            rows.push_back({band, g, by_band[band][g], 0.0, 0});
            total += by_band[band][g];
        }
        for (auto& r : rows) r.share = total > 0 ? r.importance / total : 0.0;
        std::stable_sort(rows.begin(), rows.end(),
                         [](const auto& a, const auto& b) { return a.importance > b.importance; });
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = static_cast<int>(i + 1);
        out.groups.insert(out.groups.end(), rows.begin(), rows.end());
    }
    return out;
}

/// importance.csv. Attributions are on the log-odds scale.
inline void write_importance_csv(std::ostream& out, const ImportanceSummary& s) {
    out << "keyword,age,group,mean_abs_phi,rank\n";
    for (const auto& f : s.features) {
        out << f.keyword << ',' << f.age << ',' << to_string(f.group) << ',' << fmt::format("{:.10g}", f.mean_abs_phi)
            << ',' << f.rank << '\n';
    }
}

inline void write_group_importance_csv(std::ostream& out, const ImportanceSummary& s) {
    out << "age_band,group,mean_abs_phi,share,rank\n";
    for (const auto& g : s.groups) {
        out << g.age_band << ',' << to_string(g.group) << ',' << fmt::format("{:.10g}", g.importance) << ','
            << fmt::format("{:.6f}", g.share) << ',' << g.rank << '\n';
    }
}

}  // namespace adpredict

#endif  // ADPREDICT_EXPLAIN_HPP
