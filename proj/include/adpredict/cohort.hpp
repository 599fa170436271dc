#ifndef ADPREDICT_COHORT_HPP
#define ADPREDICT_COHORT_HPP

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <spdlog/spdlog.h>

#include "adpredict/date.hpp"
#include "adpredict/error.hpp"
#include "adpredict/kv_config.hpp"
#include "adpredict/parallel.hpp"
#include "adpredict/random.hpp"
#include "adpredict/records.hpp"

namespace adpredict {

/// Text-free view of a patient: everything cohort construction and the structured
/// predictors need.
struct PatientSummary {
    std::string patient_id;
    Date birth_date;
    Sex sex = Sex::male;
    Race race = Race::white;
    Ethnicity ethnicity = Ethnicity::not_hispanic_or_latino;
    std::vector<Date> note_dates;  // ascending
    std::vector<NoteType> note_types;
    std::vector<DiagnosisEvent> diagnoses;
    std::vector<MedicationEvent> medications;
    std::vector<Date> visit_dates;  // ascending, all encounters
    std::vector<int> visit_stations;

    Date first_visit() const {
        if (visit_dates.empty()) throw DataError("patient " + patient_id + " has no visits");
        return visit_dates.front();
    }

    bool has_visit_in_year(int year) const {
        const auto lo = std::lower_bound(visit_dates.begin(), visit_dates.end(), Date::ymd(year, 1, 1));
        return lo != visit_dates.end() && lo->year() == year;
    }

    int age_at(Date d) const { return whole_years_between(birth_date, d); }
};

inline PatientSummary summarize(const PatientRecord& p) {
    PatientSummary s;
    s.patient_id = p.patient_id;
    s.birth_date = p.birth_date;
    s.sex = p.sex;
    s.race = p.race;
    s.ethnicity = p.ethnicity;
    s.note_dates.reserve(p.notes.size());
    s.note_types.reserve(p.notes.size());
    for (const auto& n : p.notes) {
        s.note_dates.push_back(n.date);
        s.note_types.push_back(n.note_type);
    }
    s.diagnoses = p.diagnoses;
    s.medications = p.medications;
    auto visits = visits_of(p);
    std::stable_sort(visits.begin(), visits.end(), [](const Visit& a, const Visit& b) { return a.date < b.date; });
    for (const auto& v : visits) {
        s.visit_dates.push_back(v.date);
        s.visit_stations.push_back(v.station);
    }
    return s;
}

struct CaseRecord {
    std::string patient_id;
    Date index_date;
    AscertainmentPath ascertainment_path = AscertainmentPath::multi_with_specialty;

    friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

struct CohortPair {
    CaseRecord case_record;
    std::vector<std::string> controls;
};

enum class AgeReference { index_date, first_visit };

struct CohortCriteria {
    std::set<std::string> ad_icd_codes{"G30.0", "G30.1", "G30.8", "G30.9"};
    std::set<ProviderType> permitted_providers{ProviderType::neurology, ProviderType::vascular_neurology,
                                               ProviderType::psychiatry, ProviderType::neuropsychology,
                                               ProviderType::geriatric_medicine};
    Date study_start = Date::ymd(2004, 1, 1);
    Date index_from = Date::ymd(2016, 1, 1);
    Date index_to = Date::ymd(2021, 10, 1);
    int min_history_years = 5;
    double continuity_gap_years = 3.0;
    int match_ratio = 9;
    int age_tolerance = 1;
    AgeReference age_reference = AgeReference::index_date;
    bool strict_matching = false;

    static CohortCriteria from_kv(const KeyValueConfig& kv) {
        CohortCriteria c;
        if (kv.has("cohort.ad_icd_codes")) {
            const auto codes = kv.get_list("cohort.ad_icd_codes", {});
            c.ad_icd_codes = {codes.begin(), codes.end()};
        }
        c.study_start = Date::parse(kv.get_string("cohort.study_start", c.study_start.str()));
        c.index_from = Date::parse(kv.get_string("cohort.index_from", c.index_from.str()));
        c.index_to = Date::parse(kv.get_string("cohort.index_to", c.index_to.str()));
        c.min_history_years = static_cast<int>(kv.get_int("cohort.min_history_years", c.min_history_years));
        c.continuity_gap_years = kv.get_double("cohort.continuity_gap_years", c.continuity_gap_years);
        c.match_ratio = static_cast<int>(kv.get_int("cohort.match_ratio", c.match_ratio));
        c.age_tolerance = static_cast<int>(kv.get_int("cohort.age_tolerance", c.age_tolerance));
        const auto ref = kv.get_string("cohort.age_reference", "index_date");
        if (ref == "index_date") {
            c.age_reference = AgeReference::index_date;
        } else if (ref == "first_visit") {
            c.age_reference = AgeReference::first_visit;
        } else {
            throw ConfigError("cohort.age_reference must be index_date or first_visit");
        }
        c.strict_matching = kv.get_bool("cohort.strict_matching", c.strict_matching);
        if (c.match_ratio < 1) throw ConfigError("cohort.match_ratio must be >= 1");
        if (c.min_history_years < 0) throw ConfigError("cohort.min_history_years must be >= 0");
        return c;
    }
};

inline bool is_ad_diagnosis(const DiagnosisEvent& d, const CohortCriteria& c) {
    return c.ad_icd_codes.count(d.icd_code) != 0;
}

inline bool has_ad_diagnosis(const PatientSummary& p, const CohortCriteria& c) {
    return std::any_of(p.diagnoses.begin(), p.diagnoses.end(),
                       [&](const DiagnosisEvent& d) { return is_ad_diagnosis(d, c); });
}

/// Applies the confirmation rule to one patient's diagnoses. A patient qualifies with a
/// dementia-clinic AD diagnosis, or with AD diagnoses on at least two distinct dates of which
/// at least one came from a specialty clinic with a permitted provider. The index date is
/// the earliest AD diagnosis date. The date-range check is left to the caller.
inline std::optional<CaseRecord> ascertain_patient(const std::string& patient_id,
                                                   const std::vector<DiagnosisEvent>& diagnoses,
                                                   const CohortCriteria& c) {
    std::set<Date> dates;
    bool dementia_clinic = false;
    bool specialty = false;
    for (const auto& d : diagnoses) {
        if (!is_ad_diagnosis(d, c)) continue;
        dates.insert(d.date);
        dementia_clinic = dementia_clinic || d.is_dementia_clinic;
        specialty = specialty || (d.is_specialty_clinic && c.permitted_providers.count(d.provider_type));
    }
    if (dates.empty()) return std::nullopt;
    const bool multi = dates.size() >= 2 && specialty;
    if (!multi && !dementia_clinic) return std::nullopt;
    return CaseRecord{patient_id, *dates.begin(),
                      multi ? AscertainmentPath::multi_with_specialty : AscertainmentPath::single_dementia_clinic};
}

struct PatientDiagnoses {
    std::string patient_id;
    const std::vector<DiagnosisEvent>* diagnoses = nullptr;
};

/// Confirmed cases whose index date falls in the configured range, in input order.
inline std::vector<CaseRecord> ascertain_cases(const std::vector<PatientDiagnoses>& patients,
                                               const CohortCriteria& c) {
    std::vector<CaseRecord> out;
    for (const auto& p : patients) {
        auto rec = ascertain_patient(p.patient_id, *p.diagnoses, c);
        if (rec && rec->index_date >= c.index_from && rec->index_date <= c.index_to) out.push_back(*rec);
    }
    return out;
}

/// At least `min_history_years` of history before the index date, and no gap between
/// consecutive notes (or between the last note and the index date) longer than the
/// continuity threshold anywhere in that pre-index history.
inline bool apply_inclusion(const CaseRecord& c, const std::vector<Date>& note_dates, const CohortCriteria& crit) {
    auto end = std::lower_bound(note_dates.begin(), note_dates.end(), c.index_date);
    if (end == note_dates.begin()) return false;
    if (note_dates.front() > c.index_date.plus_years(-crit.min_history_years)) return false;
    const double max_gap_days = crit.continuity_gap_years * 365.25;
    Date prev = note_dates.front();
    for (auto it = note_dates.begin() + 1; it != end; ++it) {
        if (it->days() - prev.days() > max_gap_days) return false;
        prev = *it;
    }
    return c.index_date.days() - prev.days() <= max_gap_days;
}

/// Non-case patients bucketed by (sex, first-visit year) for fast eligibility scans.
class ControlPool {
public:
    ControlPool(const std::vector<const PatientSummary*>& pool, const CohortCriteria& crit) : crit_(crit) {
        for (const auto* p : pool) {
            if (p->visit_dates.empty()) continue;
            buckets_[{p->sex, p->first_visit().year()}].push_back(p);
        }
    }

    /// Eligible controls in pool order.
    std::vector<const PatientSummary*> eligible(const PatientSummary& case_patient, Date index_date) const {
        std::vector<const PatientSummary*> out;
        const auto it = buckets_.find({case_patient.sex, case_patient.first_visit().year()});
        if (it == buckets_.end()) return out;
        const int case_age = age_for(case_patient, index_date);
        for (const auto* p : it->second) {
            if (std::abs(age_for(*p, index_date) - case_age) > crit_.age_tolerance) continue;
            if (!p->has_visit_in_year(index_date.year())) continue;
            out.push_back(p);
        }
        return out;
    }

    int age_for(const PatientSummary& p, Date index_date) const {
        return crit_.age_reference == AgeReference::index_date ? p.age_at(index_date) : p.age_at(p.first_visit());
    }

private:
    CohortCriteria crit_;
    std::map<std::pair<Sex, int>, std::vector<const PatientSummary*>> buckets_;
};

struct MatchResult {
    CohortPair pair;
    bool partial = false;
    std::size_t eligible_count = 0;
};

/// Draws `ratio` distinct eligible controls uniformly at random. Controls may be reused
/// across cases; callers guarantee the pool holds no AD-coded patients.
inline MatchResult match_controls(const CaseRecord& c, const PatientSummary& case_patient, const ControlPool& pool,
                                  int ratio, std::uint64_t seed, bool strict) {
    auto eligible = pool.eligible(case_patient, c.index_date);
    MatchResult r;
    r.pair.case_record = c;
    r.eligible_count = eligible.size();
    if (eligible.size() < static_cast<std::size_t>(ratio)) {
        if (strict) {
            throw DataError("case " + c.patient_id + ": only " + std::to_string(eligible.size()) +
                            " eligible controls for ratio " + std::to_string(ratio));
        }
        r.partial = true;
        spdlog::debug("case {}: partial match, {} of {} controls", c.patient_id, eligible.size(), ratio);
    }
    Rng rng(seed);
    const std::size_t take = std::min(eligible.size(), static_cast<std::size_t>(ratio));
    for (std::size_t i = 0; i < take; ++i) {
        const auto j = i + uniform_index(rng, eligible.size() - i);
        std::swap(eligible[i], eligible[j]);
        r.pair.controls.push_back(eligible[i]->patient_id);
    }
    return r;
}

struct ObservationWindow {
    Date start;
    Date end;  // inclusive
    int clean_years = 0;
    bool excluded = false;

    bool contains(Date d) const { return d >= start && d <= end; }
};

/// Window from the study start up to the clean-window boundary. Flags patients whose
/// history inside the window is shorter than `min_history_years`.
inline ObservationWindow frame_window(Date history_start, Date index_date, int clean_years, Date study_start,
                                      int min_history_years = 5) {
    if (clean_years < 0 || clean_years > 10) {
        throw ArgumentError("clean_years must be in [0, 10], got " + std::to_string(clean_years));
    }
    ObservationWindow w;
    w.start = study_start;
    w.clean_years = clean_years;
    w.end = clean_years == 0 ? index_date.plus_days(-1) : index_date.plus_years(-clean_years);
    const Date effective = std::max(study_start, history_start);
    w.excluded = effective.plus_years(min_history_years) > w.end;
    return w;
}

struct Exclusion {
    std::string patient_id;
    std::string reason;
};

struct Cohort {
    std::vector<CohortPair> pairs;
    std::vector<Exclusion> exclusions;
    std::size_t partial_matches = 0;
};

/// Case ascertainment, inclusion, and 1:ratio matching over a patient set.
inline Cohort build_cohort(const std::vector<const PatientSummary*>& patients, const CohortCriteria& crit,
                           std::uint64_t seed, unsigned jobs = 1) {
    Cohort cohort;
    std::vector<CaseRecord> cases;
    std::vector<const PatientSummary*> case_patients;
    std::vector<const PatientSummary*> pool;
    for (const auto* pp : patients) {
        const auto& p = *pp;
        const auto rec = ascertain_patient(p.patient_id, p.diagnoses, crit);
        if (!rec) {
            if (has_ad_diagnosis(p, crit)) {
                cohort.exclusions.push_back({p.patient_id, "ad_diagnosis_not_confirmed"});
            } else {
                pool.push_back(&p);
            }
            continue;
        }
        if (rec->index_date < crit.index_from || rec->index_date > crit.index_to) {
            cohort.exclusions.push_back({p.patient_id, "index_date_outside_study_period"});
            continue;
        }
        if (!apply_inclusion(*rec, p.note_dates, crit)) {
            cohort.exclusions.push_back({p.patient_id, "insufficient_continuous_history"});
            continue;
        }
        cases.push_back(*rec);
        case_patients.push_back(&p);
    }
    const ControlPool control_pool(pool, crit);
    std::vector<MatchResult> results(cases.size());
    parallel_for(cases.size(), jobs, [&](std::size_t i) {
        results[i] = match_controls(cases[i], *case_patients[i], control_pool, crit.match_ratio,
                                    derive_seed(seed, streams::matching, i), crit.strict_matching);
    });
    for (auto& r : results) {
        if (r.pair.controls.empty()) {
            cohort.exclusions.push_back({r.pair.case_record.patient_id, "no_eligible_controls"});
            continue;
        }
        if (r.partial) ++cohort.partial_matches;
        cohort.pairs.push_back(std::move(r.pair));
    }
    return cohort;
}

inline Cohort build_cohort(const std::vector<PatientSummary>& patients, const CohortCriteria& crit,
                           std::uint64_t seed, unsigned jobs = 1) {
    std::vector<const PatientSummary*> ptrs;
    ptrs.reserve(patients.size());
    for (const auto& p : patients) ptrs.push_back(&p);
    return build_cohort(ptrs, crit, seed, jobs);
}

inline void write_cohort_csv(std::ostream& out, const Cohort& cohort) {
    out << "case_id,index_date,ascertainment_path,control_ids\n";
    for (const auto& pr : cohort.pairs) {
        out << pr.case_record.patient_id << ',' << pr.case_record.index_date.str() << ','
            << to_string(pr.case_record.ascertainment_path) << ',';
        for (std::size_t i = 0; i < pr.controls.size(); ++i) out << (i ? ";" : "") << pr.controls[i];
        out << '\n';
    }
}

inline void write_exclusions_csv(std::ostream& out, const Cohort& cohort) {
    out << "patient_id,reason\n";
    for (const auto& e : cohort.exclusions) out << e.patient_id << ',' << e.reason << '\n';
}

inline std::vector<CohortPair> read_cohort_csv(std::istream& in) {
    std::vector<CohortPair> pairs;
    std::string line;
    if (!std::getline(in, line) || line.rfind("case_id,", 0) != 0) throw DataError("cohort.csv: missing header");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cols = detail::split(line, ',');
        if (cols.size() != 4) throw DataError("cohort.csv:" + std::to_string(lineno) + ": expected 4 columns");
        CohortPair pr;
        pr.case_record.patient_id = cols[0];
        pr.case_record.index_date = Date::parse(cols[1]);
        pr.case_record.ascertainment_path = parse_ascertainment_path(cols[2]);
        if (!cols[3].empty()) pr.controls = detail::split(cols[3], ';');
        pairs.push_back(std::move(pr));
    }
    return pairs;
}

}  // namespace adpredict

#endif  // ADPREDICT_COHORT_HPP
