#ifndef ADPREDICT_TRENDS_HPP
#define ADPREDICT_TRENDS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "adpredict/cohort.hpp"
#include "adpredict/error.hpp"
#include "adpredict/features.hpp"
#include "adpredict/random.hpp"

namespace adpredict {

enum class TrendNormalization { raw, per_note };

inline const char* to_string(TrendNormalization n) { return n == TrendNormalization::raw ? "raw" : "per_note"; }

struct TrendCurve {
    TrendNormalization normalization = TrendNormalization::raw;
    std::string stratum = "all";
    std::vector<int> x;  // offset in years (-15..0) or absolute age
    std::vector<double> case_mean;
    std::vector<double> control_mean;
    std::vector<int> case_n;
    std::vector<int> control_n;
};

struct TrendOptions {
    NoteFilter note_filter = NoteFilter::all();
    TrendNormalization normalization = TrendNormalization::raw;
    int max_offset = 15;
    int sample_n = 0;  // > 0: random subsample of this many patients per arm
    std::uint64_t seed = 0;
};

/// One aligned patient: cases use their own index date, controls the index date of the
/// first case (in cohort order) they were matched to.
struct AlignedPatient {
    const ScannedPatient* patient = nullptr;
    Date origin;
    bool is_case = false;
    int diagnosis_age = 0;  // age of the owning case at its index date
};

using ScanLookup = std::function<const ScannedPatient*(const std::string&)>;

inline std::vector<AlignedPatient> align_cohort(const std::vector<CohortPair>& pairs, const ScanLookup& lookup) {
    std::vector<AlignedPatient> out;
    std::unordered_set<std::string> seen;
    for (const auto& pr : pairs) {
        const auto* c = lookup(pr.case_record.patient_id);
        if (!c) throw DataError("trends: no scan for case " + pr.case_record.patient_id);
        const Date index = pr.case_record.index_date;
        const int age = c->summary.age_at(index);
        out.push_back({c, index, true, age});
        seen.insert(pr.case_record.patient_id);
        for (const auto& id : pr.controls) {
            if (!seen.insert(id).second) continue;
            const auto* p = lookup(id);
            if (!p) throw DataError("trends: no scan for control " + id);
            out.push_back({p, index, false, age});
        }
    }
    return out;
}

namespace detail {

inline std::vector<AlignedPatient> subsample_arms(std::vector<AlignedPatient> all, int n, std::uint64_t seed) {
    if (n <= 0) return all;
    std::vector<AlignedPatient> out;
    for (const bool arm : {true, false}) {
        std::vector<AlignedPatient> group;
        for (const auto& a : all) {
            if (a.is_case == arm) group.push_back(a);
        }
        Rng rng = make_rng(seed, streams::subsample, arm ? 1 : 0);
        const std::size_t take = std::min(group.size(), static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < take; ++i) std::swap(group[i], group[i + uniform_index(rng, group.size() - i)]);
        out.insert(out.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(take));
    }
    return out;
}

/// Offset year y (0-based, counting back) holding `d`, or -1 if d is outside [origin - (max+1) y, origin).
inline int offset_year(Date d, Date origin, int max_offset) {
    if (!(d < origin)) return -1;
    for (int y = 0; y <= max_offset; ++y) {
        if (d >= origin.plus_years(-(y + 1))) return y;
    }
    return -1;
}

struct Accumulator {
    std::map<int, double> case_sum, control_sum;
    std::map<int, int> case_n, control_n;

    void add(bool is_case, int x, double v) {
        (is_case ? case_sum : control_sum)[x] += v;
        (is_case ? case_n : control_n)[x] += 1;
    }

    TrendCurve curve(TrendNormalization norm, std::string stratum, const std::vector<int>& xs) const {
        TrendCurve c;
        c.normalization = norm;
        c.stratum = std::move(stratum);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (int x : xs) {
            c.x.push_back(x);
            const auto cn = case_n.count(x) ? case_n.at(x) : 0;
            const auto kn = control_n.count(x) ? control_n.at(x) : 0;
            c.case_n.push_back(cn);
            c.control_n.push_back(kn);
            c.case_mean.push_back(cn ? case_sum.at(x) / cn : nan);
            c.control_mean.push_back(kn ? control_sum.at(x) / kn : nan);
        }
        return c;
    }
};

/// Per patient-year (hits, notes) keyed by offset year, for notes passing the filter.
inline std::map<int, std::pair<int, int>> yearly_counts(const AlignedPatient& a, const TrendOptions& opt) {
    std::map<int, std::pair<int, int>> years;
    const auto& s = a.patient->summary;
    for (std::size_t i = 0; i < s.note_dates.size(); ++i) {
        if (!opt.note_filter.accepts(s.note_types[i])) continue;
        const int y = offset_year(s.note_dates[i], a.origin, opt.max_offset);
        if (y >= 0) ++years[y].second;
    }
    for (const auto& h : a.patient->hits) {
        if (!opt.note_filter.accepts(h.note_type)) continue;
        const int y = offset_year(h.date, a.origin, opt.max_offset);
        if (y >= 0) ++years[y].first;
    }
    return years;
}

inline double year_value(const std::pair<int, int>& hits_notes, TrendNormalization norm) {
    return norm == TrendNormalization::raw ? hits_notes.first
                                           : static_cast<double>(hits_notes.first) / hits_notes.second;
}

}  // namespace detail

/// Mean keyword hits per patient per year before the index date. A patient contributes to
/// an offset year only if it has at least one (filtered) note in that year.
inline TrendCurve trend_by_year(const std::vector<CohortPair>& pairs, const ScanLookup& lookup,
                                const TrendOptions& opt = {}) {
    if (pairs.empty()) throw ArgumentError("trend_by_year: empty cohort");
    const auto aligned = detail::subsample_arms(align_cohort(pairs, lookup), opt.sample_n, opt.seed);
    detail::Accumulator acc;
    for (const auto& a : aligned) {
        for (const auto& [y, hn] : detail::yearly_counts(a, opt)) {
            if (hn.second == 0) continue;
            acc.add(a.is_case, -y, detail::year_value(hn, opt.normalization));
        }
    }
    std::vector<int> xs;
    for (int y = opt.max_offset; y >= 0; --y) xs.push_back(-y);
    return acc.curve(opt.normalization, "all", xs);
}

struct AgeBand {
    std::string label;
    int lo = 0;   // inclusive
    int hi = 0;   // exclusive
};

inline std::vector<AgeBand> default_diagnosis_age_bands() {
    return {{"<65", 0, 65}, {"65-70", 65, 70}, {"70-75", 70, 75}, {"75-80", 75, 80}, {"80-85", 80, 85}, {"85+", 85, 200}};
}

/// One curve per diagnosis-age band, indexed by the patient's absolute age at the note.
/// Bands with no patients are omitted; bands lacking cases are kept with the case series empty.
inline std::vector<TrendCurve> trend_by_age_group(const std::vector<CohortPair>& pairs, const ScanLookup& lookup,
                                                  const std::vector<AgeBand>& bands = default_diagnosis_age_bands(),
                                                  const TrendOptions& opt = {}) {
    if (pairs.empty()) throw ArgumentError("trend_by_age_group: empty cohort");
    const auto aligned = detail::subsample_arms(align_cohort(pairs, lookup), opt.sample_n, opt.seed);
    std::vector<TrendCurve> out;
    for (const auto& band : bands) {
        detail::Accumulator acc;
        int n_cases = 0, n_patients = 0;
        int min_age = std::numeric_limits<int>::max(), max_age = std::numeric_limits<int>::min();
        for (const auto& a : aligned) {
            if (a.diagnosis_age < band.lo || a.diagnosis_age >= band.hi) continue;
            ++n_patients;
            n_cases += a.is_case;
            // (hits, notes) per absolute age inside the offset range.
            std::map<int, std::pair<int, int>> ages;
            const auto& s = a.patient->summary;
            for (std::size_t i = 0; i < s.note_dates.size(); ++i) {
                if (!opt.note_filter.accepts(s.note_types[i])) continue;
                if (detail::offset_year(s.note_dates[i], a.origin, opt.max_offset) < 0) continue;
                ++ages[s.age_at(s.note_dates[i])].second;
            }
            for (const auto& h : a.patient->hits) {
                if (!opt.note_filter.accepts(h.note_type)) continue;
                if (detail::offset_year(h.date, a.origin, opt.max_offset) < 0) continue;
                ++ages[s.age_at(h.date)].first;
            }
            for (const auto& [age, hn] : ages) {
                if (hn.second == 0) continue;
                acc.add(a.is_case, age, detail::year_value(hn, opt.normalization));
                min_age = std::min(min_age, age);
                max_age = std::max(max_age, age);
            }
        }
        if (n_patients == 0 || min_age > max_age) {
            spdlog::warn("trends: diagnosis-age band {} is empty, omitted", band.label);
            continue;
        }
        if (n_cases == 0) spdlog::warn("trends: diagnosis-age band {} has controls only", band.label);
        std::vector<int> xs;
        for (int age = min_age; age <= max_age; ++age) xs.push_back(age);
        out.push_back(acc.curve(opt.normalization, band.label, xs));
    }
    return out;
}

inline void write_trends_header(std::ostream& out) {
    out << "normalization,stratum,offset_or_age,case_mean,control_mean,case_n,control_n\n";
}

inline void write_trend_rows(std::ostream& out, const TrendCurve& c) {
    auto num = [](double v) { return std::isnan(v) ? std::string("NA") : fmt::format("{:.6f}", v); };
    for (std::size_t i = 0; i < c.x.size(); ++i) {
        out << to_string(c.normalization) << ',' << c.stratum << ',' << c.x[i] << ',' << num(c.case_mean[i]) << ','
            << num(c.control_mean[i]) << ',' << c.case_n[i] << ',' << c.control_n[i] << '\n';
    }
}

}  // namespace adpredict

#endif  // ADPREDICT_TRENDS_HPP
