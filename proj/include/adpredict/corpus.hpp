#ifndef ADPREDICT_CORPUS_HPP
#define ADPREDICT_CORPUS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "adpredict/date.hpp"
#include "adpredict/error.hpp"
#include "adpredict/kv_config.hpp"
#include "adpredict/lexicon.hpp"
#include "adpredict/parallel.hpp"
#include "adpredict/random.hpp"
#include "adpredict/records.hpp"

namespace adpredict {

enum class Arm { case_arm, control_arm };

/// Expected keyword mentions per year around the index date.
struct TrajectoryProfile {
    double baseline_rate = 10.0;
    double peak_rate = 45.0;
    double ramp_start_years_before_index = 14.0;
    double noise_dispersion = 0.05;  // variance of the per-year gamma multiplier
    double notes_per_year = 6.0;

    void validate() const {
        if (!(baseline_rate > 0)) throw ConfigError("trajectory: baseline_rate must be > 0");
        if (!(peak_rate >= baseline_rate)) throw ConfigError("trajectory: peak_rate must be >= baseline_rate");
        if (!(ramp_start_years_before_index >= 0)) {
            throw ConfigError("trajectory: ramp_start_years_before_index must be >= 0");
        }
        if (!(noise_dispersion >= 0)) throw ConfigError("trajectory: noise_dispersion must be >= 0");
        if (!(notes_per_year >= 1)) throw ConfigError("trajectory: notes_per_year must be >= 1");
    }
};

/// Controls stay at baseline. Cases stay at baseline until the ramp start, then rise
/// linearly to the peak at the index date and hold it afterwards.
inline double keyword_rate(double years_to_index, Arm arm, const TrajectoryProfile& p) {
    if (arm == Arm::control_arm) return p.baseline_rate;
    const double ramp = p.ramp_start_years_before_index;
    if (years_to_index >= 0) return p.peak_rate;
    if (years_to_index <= -ramp) return p.baseline_rate;
    const double frac = (years_to_index + ramp) / ramp;
    return p.baseline_rate + (p.peak_rate - p.baseline_rate) * frac;
}

struct DemographicsConfig {
    double female_fraction = 0.026;
    double age_mean = 76.6;  // at the age reference date
    double age_sd = 8.9;
    double age_min = 50;
    double age_max = 100;
    std::array<double, 6> race_weights{0.799, 0.103, 0.007, 0.008, 0.006, 0.078};  // order of all_races
    double hispanic_fraction = 0.045;

    static DemographicsConfig case_defaults() {
        DemographicsConfig d;
        d.female_fraction = 0.029;
        d.age_mean = 76.7;
        d.age_sd = 8.6;
        d.race_weights = {0.774, 0.141, 0.007, 0.010, 0.005, 0.062};
        d.hispanic_fraction = 0.112;
        return d;
    }
    static DemographicsConfig control_defaults() { return {}; }
};

/// Synthetic clinic attributes for one note source.
struct ClinicProfile {
    int stop_code;
    bool specialty;
    bool dementia;
    ProviderType provider;
};

inline ClinicProfile clinic_of(NoteType t) {
    switch (t) {
        case NoteType::primary_care: return {323, false, false, ProviderType::primary_care};
        case NoteType::memory_clinic: return {318, true, true, ProviderType::geriatric_medicine};
        case NoteType::neurology: return {315, true, false, ProviderType::neurology};
        case NoteType::geriatric_psychiatry: return {319, true, false, ProviderType::psychiatry};
        case NoteType::geriatric_medicine: return {320, true, false, ProviderType::geriatric_medicine};
        case NoteType::cognitive_nursing: return {118, false, false, ProviderType::nursing};
        case NoteType::mental_health: return {502, true, false, ProviderType::psychiatry};
        case NoteType::comp_and_pension: return {450, false, false, ProviderType::other};
        case NoteType::consultation: return {301, false, false, ProviderType::other};
    }
    return {323, false, false, ProviderType::primary_care};
}

inline const std::vector<std::string>& default_ad_icd_codes() {
    static const std::vector<std::string> codes{"G30.0", "G30.1", "G30.8", "G30.9"};
    return codes;
}

inline const std::vector<std::string>& default_background_icd_codes() {
    static const std::vector<std::string> codes{"I10",   "E11.9", "E78.5",  "M54.5", "J44.9", "N18.3",
                                                "I25.10", "F32.9", "G47.00", "H91.90", "K21.9", "Z79.4"};
    return codes;
}

inline const std::vector<std::string>& default_medication_classes() {
    static const std::vector<std::string> classes{"antihypertensive", "statin", "metformin", "ssri",
                                                  "analgesic",        "ppi",    "insulin",   "anticoagulant"};
    return classes;
}

inline const std::vector<std::string>& default_filler_words() {
    static const std::vector<std::string> words{
        "patient", "seen",    "today",      "for",     "follow",    "up",      "vitals",   "stable",
        "reviewed", "labs",   "plan",       "continue", "current",  "regimen", "denies",   "chest",
        "pain",    "blood",   "pressure",   "controlled", "noted",  "discussed", "with",   "family",
        "return",  "in",      "months",     "exam",    "unremarkable", "lungs", "clear",  "heart",
        "regular", "rhythm",  "no",         "acute",   "distress", "refill",  "ordered",  "veteran",
        "reports", "doing",   "well",       "overall", "the",      "and",     "was",      "on"};
    return words;
}

struct CorpusConfig {
    int n_cases = 2000;
    int n_controls = 18000;
    int n_unconfirmed = 0;  // AD-coded patients who fail case ascertainment
    int history_years_min = 20;
    int history_years_max = 20;
    Date index_start = Date::ymd(2016, 1, 1);
    Date study_end = Date::ymd(2021, 10, 1);
    Date age_reference_date = Date::ymd(2016, 1, 1);
    int station_count = 130;
    double station_size_sigma = 0.5;
    double home_station_share = 0.85;
    TrajectoryProfile profile;
    double case_utilization_boost = 1.0;  // relative extra notes/year at the end of the ramp
    double primary_care_share = 0.56;
    double primary_care_share_case_late = 0.25;
    double single_path_fraction = 0.018;
    double single_path_label_noise = 0.0;
    DemographicsConfig case_demographics = DemographicsConfig::case_defaults();
    DemographicsConfig control_demographics = DemographicsConfig::control_defaults();
    double icd_rate = 3.0;         // background diagnoses per year
    double medication_rate = 2.0;  // medication events per year
    int filler_min = 4;
    int filler_max = 10;
    std::array<double, 8> baseline_group_weight{0.5, 1.0, 1.0, 3.0, 3.0, 0.3, 0.3, 2.0};
    std::array<double, 8> ramp_group_weight{3.0, 2.5, 2.0, 0.5, 1.0, 3.0, 0.3, 0.5};
    // Nonempty: excess (ramp) keywords are drawn uniformly from this list and
    // ramp_group_weight is ignored. A short list keeps the early signal inside the
    // most frequent keyword-age pairs.
    std::vector<std::string> ramp_keywords{"memory", "forgetfulness", "confusion", "word finding", "mmse"};
    Lexicon lexicon = default_lexicon();

    int n_patients() const { return n_cases + n_controls + n_unconfirmed; }

    void validate() const {
        if (n_cases < 0 || n_controls < 0 || n_unconfirmed < 0) throw ConfigError("corpus: negative group size");
        if (n_patients() == 0) throw ConfigError("corpus: zero patients requested");
        if (history_years_min < 5 || history_years_max < history_years_min) {
            throw ConfigError("corpus: need 5 <= history_years_min <= history_years_max");
        }
        if (!(index_start.plus_days(60) < study_end)) throw ConfigError("corpus: index range too short");
        if (station_count < 1) throw ConfigError("corpus: station_count must be >= 1");
        if (home_station_share < 0 || home_station_share > 1) throw ConfigError("corpus: home_station_share in [0,1]");
        profile.validate();
        auto unit = [](double v, const char* name) {
            if (!(v >= 0 && v <= 1)) throw ConfigError(std::string("corpus: ") + name + " must be in [0,1]");
        };
        unit(primary_care_share, "primary_care_share");
        unit(primary_care_share_case_late, "primary_care_share_case_late");
        unit(single_path_fraction, "single_path_fraction");
        unit(single_path_label_noise, "single_path_label_noise");
        if (case_utilization_boost < 0) throw ConfigError("corpus: case_utilization_boost must be >= 0");
        if (icd_rate < 0 || medication_rate < 0) throw ConfigError("corpus: negative event rate");
        if (filler_min < 1 || filler_max < filler_min) throw ConfigError("corpus: need 1 <= filler_min <= filler_max");
        for (const auto* demo : {&case_demographics, &control_demographics}) {
            unit(demo->female_fraction, "female_fraction");
            unit(demo->hispanic_fraction, "hispanic_fraction");
            if (!(demo->age_sd >= 0) || demo->age_min > demo->age_max) throw ConfigError("corpus: bad age settings");
            for (double w : demo->race_weights) {
                if (w < 0) throw ConfigError("corpus: negative race weight");
            }
        }
        for (double w : baseline_group_weight) {
            if (w < 0) throw ConfigError("corpus: negative baseline group weight");
        }
        for (double w : ramp_group_weight) {
            if (w < 0) throw ConfigError("corpus: negative ramp group weight");
        }
        for (const auto& k : ramp_keywords) {
            if (!lexicon.find(k)) throw ConfigError("corpus: ramp keyword not in lexicon: " + k);
        }
        if (lexicon.empty()) throw ConfigError("corpus: empty lexicon");
    }

    /// Reads `corpus.*` and `trajectory.*` keys; unspecified keys keep their defaults.
    static CorpusConfig from_kv(const KeyValueConfig& kv) {
        CorpusConfig c;
        c.n_cases = static_cast<int>(kv.get_int("corpus.n_cases", c.n_cases));
        c.n_controls = static_cast<int>(kv.get_int("corpus.n_controls", c.n_controls));
        c.n_unconfirmed = static_cast<int>(kv.get_int("corpus.n_unconfirmed", c.n_unconfirmed));
        c.history_years_min = static_cast<int>(kv.get_int("corpus.history_years_min", c.history_years_min));
        c.history_years_max = static_cast<int>(kv.get_int("corpus.history_years_max", c.history_years_max));
        c.index_start = Date::parse(kv.get_string("corpus.index_start", c.index_start.str()));
        c.study_end = Date::parse(kv.get_string("corpus.study_end", c.study_end.str()));
        c.age_reference_date = Date::parse(kv.get_string("corpus.age_reference_date", c.age_reference_date.str()));
        c.station_count = static_cast<int>(kv.get_int("corpus.station_count", c.station_count));
        c.station_size_sigma = kv.get_double("corpus.station_size_sigma", c.station_size_sigma);
        c.home_station_share = kv.get_double("corpus.home_station_share", c.home_station_share);
        c.profile.baseline_rate = kv.get_double("trajectory.baseline_rate", c.profile.baseline_rate);
        c.profile.peak_rate = kv.get_double("trajectory.peak_rate", c.profile.peak_rate);
        c.profile.ramp_start_years_before_index =
            kv.get_double("trajectory.ramp_start_years_before_index", c.profile.ramp_start_years_before_index);
        c.profile.noise_dispersion = kv.get_double("trajectory.noise_dispersion", c.profile.noise_dispersion);
        c.profile.notes_per_year = kv.get_double("trajectory.notes_per_year", c.profile.notes_per_year);
        c.case_utilization_boost = kv.get_double("corpus.case_utilization_boost", c.case_utilization_boost);
        c.primary_care_share = kv.get_double("corpus.primary_care_share", c.primary_care_share);
        c.primary_care_share_case_late =
            kv.get_double("corpus.primary_care_share_case_late", c.primary_care_share_case_late);
        c.single_path_fraction = kv.get_double("corpus.single_path_fraction", c.single_path_fraction);
        c.single_path_label_noise = kv.get_double("corpus.single_path_label_noise", c.single_path_label_noise);
        c.icd_rate = kv.get_double("corpus.icd_rate", c.icd_rate);
        c.medication_rate = kv.get_double("corpus.medication_rate", c.medication_rate);
        c.filler_min = static_cast<int>(kv.get_int("corpus.filler_min", c.filler_min));
        c.filler_max = static_cast<int>(kv.get_int("corpus.filler_max", c.filler_max));
        for (std::size_t g = 0; g < all_keyword_groups.size(); ++g) {
            const std::string name(to_string(all_keyword_groups[g]));
            c.baseline_group_weight[g] =
                kv.get_double("corpus.baseline_group_weight." + name, c.baseline_group_weight[g]);
            c.ramp_group_weight[g] = kv.get_double("corpus.ramp_group_weight." + name, c.ramp_group_weight[g]);
        }
        c.ramp_keywords = kv.get_list("corpus.ramp_keywords", c.ramp_keywords);
        for (auto [demo, prefix] : {std::pair{&c.case_demographics, "corpus.case."},
                                    std::pair{&c.control_demographics, "corpus.control."}}) {
            const std::string p(prefix);
            demo->female_fraction = kv.get_double(p + "female_fraction", demo->female_fraction);
            demo->age_mean = kv.get_double(p + "age_mean", demo->age_mean);
            demo->age_sd = kv.get_double(p + "age_sd", demo->age_sd);
            demo->hispanic_fraction = kv.get_double(p + "hispanic_fraction", demo->hispanic_fraction);
        }
        const auto lexicon_path = kv.get_string("lexicon.path", "");
        if (!lexicon_path.empty()) c.lexicon = Lexicon::load(lexicon_path);
        c.validate();
        return c;
    }
};

enum class PatientRole { control, case_multi, case_single, unconfirmed };

namespace detail {

template <typename Weights>
std::size_t draw_weighted(Rng& rng, const Weights& w) {
    double total = 0;
    for (double x : w) total += x;
    double u = uniform01(rng) * total;
    std::size_t i = 0;
    for (; i + 1 < std::size(w); ++i) {
        if (u < w[i]) return i;
        u -= w[i];
    }
    return i;
}

inline int poisson(Rng& rng, double mean) {
    if (mean <= 0) return 0;
    std::poisson_distribution<int> dist(mean);
    return dist(rng);
}

inline Date uniform_date(Rng& rng, Date from, Date to_exclusive) {
    const int span = std::max(1, to_exclusive.days() - from.days());
    return from.plus_days(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(span))));
}

/// Per-keyword emission weights: group weight shared evenly inside each group.
inline std::vector<double> keyword_weights(const Lexicon& lex, const std::array<double, 8>& group_weight,
                                           const std::vector<std::string>& only) {
    std::vector<double> w(lex.size(), 0.0);
    if (!only.empty()) {
        for (const auto& k : only) w[lex.index_of(k)] = 1.0;
        return w;
    }
    std::array<int, 8> members{};
    for (const auto& e : lex.entries()) ++members[static_cast<std::size_t>(e.group)];
    for (std::size_t i = 0; i < lex.size(); ++i) {
        const auto g = static_cast<std::size_t>(lex[i].group);
        w[i] = group_weight[g] / members[g];
    }
    return w;
}

}  // namespace detail

/// Patient generator bound to one configuration. Station sizes and emission tables are
/// fixed at construction; each patient is a pure function of (role, index, seed).
class CorpusGenerator {
public:
    CorpusGenerator(CorpusConfig config, std::uint64_t master_seed)
        : config_(std::move(config)), master_seed_(master_seed) {
        config_.validate();
        baseline_weights_ = detail::keyword_weights(config_.lexicon, config_.baseline_group_weight, {});
        ramp_weights_ = detail::keyword_weights(config_.lexicon, config_.ramp_group_weight, config_.ramp_keywords);
        if (std::accumulate(baseline_weights_.begin(), baseline_weights_.end(), 0.0) <= 0 ||
            std::accumulate(ramp_weights_.begin(), ramp_weights_.end(), 0.0) <= 0) {
            throw ConfigError("corpus: keyword emission weights sum to zero");
        }
        auto rng = make_rng(master_seed_, streams::station);
        std::lognormal_distribution<double> size(0.0, config_.station_size_sigma);
        station_weights_.resize(static_cast<std::size_t>(config_.station_count));
        for (auto& w : station_weights_) w = config_.station_size_sigma > 0 ? size(rng) : 1.0;
        roles_ = assign_roles();
    }

    const CorpusConfig& config() const noexcept { return config_; }
    std::size_t size() const noexcept { return roles_.size(); }
    PatientRole role(std::size_t i) const { return roles_.at(i); }

    static std::string patient_id(std::size_t index) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "P%06zu", index + 1);
        return buf;
    }

    PatientRecord patient(std::size_t index) const {
        return sample_patient(roles_.at(index), index, derive_seed(master_seed_, streams::patient, index));
    }

    /// Draws one patient. Same (role, index, seed) always yields the same record.
    PatientRecord sample_patient(PatientRole role, std::size_t index, std::uint64_t seed) const {
        Rng rng(seed);
        const auto& cfg = config_;
        const bool is_case = role == PatientRole::case_multi || role == PatientRole::case_single;
        const Arm demo_arm = is_case || role == PatientRole::unconfirmed ? Arm::case_arm : Arm::control_arm;
        const auto& demo = demo_arm == Arm::case_arm ? cfg.case_demographics : cfg.control_demographics;

        PatientRecord p;
        p.patient_id = patient_id(index);
        p.sex = uniform01(rng) < demo.female_fraction ? Sex::female : Sex::male;
        p.race = all_races[detail::draw_weighted(rng, demo.race_weights)];
        p.ethnicity = uniform01(rng) < demo.hispanic_fraction ? Ethnicity::hispanic_or_latino
                                                              : Ethnicity::not_hispanic_or_latino;
        std::normal_distribution<double> age_dist(demo.age_mean, demo.age_sd);
        const double age = std::clamp(age_dist(rng), demo.age_min, demo.age_max);
        const int age_years = static_cast<int>(std::floor(age));
        const int age_days = static_cast<int>((age - age_years) * 365.0);
        p.birth_date = cfg.age_reference_date.plus_years(-age_years).plus_days(-age_days);

        const Date reference = detail::uniform_date(rng, cfg.index_start, cfg.study_end.plus_days(-60));
        p.reference_date_truth = reference;
        p.is_case_truth = is_case;
        if (is_case) {
            p.index_date_truth = reference;
            p.path_truth = role == PatientRole::case_single ? AscertainmentPath::single_dementia_clinic
                                                            : AscertainmentPath::multi_with_specialty;
            p.label_noise_truth =
                role == PatientRole::case_single && uniform01(rng) < cfg.single_path_label_noise;
        }
        const bool ramps = (is_case && !p.label_noise_truth) || role == PatientRole::unconfirmed;
        const Arm trajectory = ramps ? Arm::case_arm : Arm::control_arm;

        const int history = cfg.history_years_min +
                            static_cast<int>(uniform_index(
                                rng, static_cast<std::uint64_t>(cfg.history_years_max - cfg.history_years_min + 1)));
        const int home = static_cast<int>(detail::draw_weighted(rng, station_weights_));
        auto draw_station = [&] {
            if (uniform01(rng) < cfg.home_station_share) return home;
            return static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.station_count)));
        };

        const Date study_end_excl = cfg.study_end.plus_days(1);
        const auto& prof = cfg.profile;
        const double ramp_span = prof.peak_rate - prof.baseline_rate;
        const auto& filler = default_filler_words();

        std::gamma_distribution<double> gamma(prof.noise_dispersion > 0 ? 1.0 / prof.noise_dispersion : 1.0,
                                              prof.noise_dispersion > 0 ? prof.noise_dispersion : 1.0);

        // Year buckets: pre-index bucket y covers [R-(y+1)y, R-y y) with rate at -y;
        // post-index bucket k covers [R+k y, R+(k+1) y) with rate at k+1.
        for (int b = -history; reference.plus_years(b) < study_end_excl; ++b) {
            const Date from = reference.plus_years(b);
            const Date full_to = reference.plus_years(b + 1);
            const Date to = std::min(full_to, study_end_excl);
            const double coverage =
                static_cast<double>(to.days() - from.days()) / std::max(1, full_to.days() - from.days());
            if (from < p.birth_date) continue;
            const double rate = keyword_rate(static_cast<double>(b + 1), trajectory, prof);
            const double ramp_frac = ramp_span > 0 ? (rate - prof.baseline_rate) / ramp_span : 0.0;

            const double note_mean = prof.notes_per_year * (1.0 + cfg.case_utilization_boost * ramp_frac) * coverage;
            const int n_notes = 1 + detail::poisson(rng, note_mean - 1.0);
            const std::size_t first_note = p.notes.size();
            const double pc_share =
                cfg.primary_care_share + (cfg.primary_care_share_case_late - cfg.primary_care_share) * ramp_frac;
            for (int n = 0; n < n_notes; ++n) {
                Note note;
                note.date = (first_note == 0 && n == 0) ? from : detail::uniform_date(rng, from, to);
                note.note_type = draw_note_type(rng, pc_share, ramp_frac);
                note.clinic_stop_code = clinic_of(note.note_type).stop_code;
                note.station = draw_station();
                p.notes.push_back(std::move(note));
            }

            const double g = prof.noise_dispersion > 0 ? gamma(rng) : 1.0;
            const int n_base = detail::poisson(rng, prof.baseline_rate * g * coverage);
            const int n_excess = detail::poisson(rng, (rate - prof.baseline_rate) * g * coverage);
            std::vector<std::vector<std::size_t>> per_note(static_cast<std::size_t>(n_notes));
            for (int k = 0; k < n_base + n_excess; ++k) {
                const auto kw = detail::draw_weighted(rng, k < n_base ? baseline_weights_ : ramp_weights_);
                per_note[uniform_index(rng, static_cast<std::uint64_t>(n_notes))].push_back(kw);
            }
            for (int n = 0; n < n_notes; ++n) {
                p.notes[first_note + static_cast<std::size_t>(n)].text =
                    compose_text(rng, per_note[static_cast<std::size_t>(n)], filler);
            }

            const int n_icd = detail::poisson(rng, cfg.icd_rate * coverage);
            const auto& icd = default_background_icd_codes();
            for (int k = 0; k < n_icd; ++k) {
                const auto type = draw_note_type(rng, cfg.primary_care_share, 0.0);
                p.diagnoses.push_back(make_diagnosis(detail::uniform_date(rng, from, to),
                                                     icd[uniform_index(rng, icd.size())], type, draw_station()));
            }
            const int n_med = detail::poisson(rng, cfg.medication_rate * coverage);
            const auto& meds = default_medication_classes();
            for (int k = 0; k < n_med; ++k) {
                p.medications.push_back(
                    {detail::uniform_date(rng, from, to), meds[uniform_index(rng, meds.size())], draw_station()});
            }
            if (b >= 0 && is_case && uniform01(rng) < 0.8 * coverage) {
                p.medications.push_back({detail::uniform_date(rng, std::max(from, reference), to),
                                         "cholinesterase_inhibitor", draw_station()});
            }
        }

        add_ad_diagnoses(rng, role, reference, p, draw_station);

        auto by_date = [](const auto& a, const auto& b) { return a.date < b.date; };
        std::stable_sort(p.notes.begin(), p.notes.end(), by_date);
        std::stable_sort(p.diagnoses.begin(), p.diagnoses.end(), by_date);
        std::stable_sort(p.medications.begin(), p.medications.end(), by_date);
        return p;
    }

private:
    std::vector<PatientRole> assign_roles() const {
        const auto& c = config_;
        const auto n = static_cast<std::size_t>(c.n_patients());
        std::vector<PatientRole> roles;
        roles.reserve(n);
        const int n_single = static_cast<int>(std::lround(c.n_cases * c.single_path_fraction));
        for (int i = 0; i < c.n_cases; ++i) {
            roles.push_back(i < n_single ? PatientRole::case_single : PatientRole::case_multi);
        }
        roles.insert(roles.end(), static_cast<std::size_t>(c.n_controls), PatientRole::control);
        roles.insert(roles.end(), static_cast<std::size_t>(c.n_unconfirmed), PatientRole::unconfirmed);
        auto rng = make_rng(master_seed_, streams::patient, UINT64_MAX);
        for (std::size_t i = n; i > 1; --i) std::swap(roles[i - 1], roles[uniform_index(rng, i)]);
        return roles;
    }

    NoteType draw_note_type(Rng& rng, double pc_share, double ramp_frac) const {
        if (uniform01(rng) < pc_share) return NoteType::primary_care;
        // Non-primary mix drifts toward memory and neurology clinics along the ramp.
        static constexpr std::array<double, 8> early{0.02, 0.08, 0.06, 0.18, 0.04, 0.22, 0.20, 0.20};
        static constexpr std::array<double, 8> late{0.22, 0.18, 0.10, 0.14, 0.08, 0.10, 0.06, 0.12};
        std::array<double, 8> w{};
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = early[i] + (late[i] - early[i]) * ramp_frac;
        return all_note_types[1 + detail::draw_weighted(rng, w)];
    }

    static DiagnosisEvent make_diagnosis(Date date, std::string code, NoteType clinic, int station) {
        const auto c = clinic_of(clinic);
        return {date, std::move(code), c.stop_code, c.specialty, c.dementia, c.provider, station};
    }

    template <typename StationFn>
    void add_ad_diagnoses(Rng& rng, PatientRole role, Date reference, PatientRecord& p, StationFn&& station) const {
        const auto& ad = default_ad_icd_codes();
        auto code = [&] { return ad[uniform_index(rng, ad.size())]; };
        static constexpr std::array<NoteType, 3> specialty{NoteType::neurology, NoteType::geriatric_medicine,
                                                           NoteType::geriatric_psychiatry};
        switch (role) {
            case PatientRole::control: return;
            case PatientRole::case_single:
                p.diagnoses.push_back(make_diagnosis(reference, code(), NoteType::memory_clinic, station()));
                return;
            case PatientRole::unconfirmed:
                p.diagnoses.push_back(make_diagnosis(reference, code(), NoteType::primary_care, station()));
                return;
            case PatientRole::case_multi: {
                const NoteType first =
                    uniform01(rng) < 0.5 ? NoteType::primary_care : specialty[uniform_index(rng, specialty.size())];
                p.diagnoses.push_back(make_diagnosis(reference, code(), first, station()));
                Date second = reference.plus_days(30 + static_cast<int>(uniform_index(rng, 336)));
                second = std::min(second, config_.study_end);
                p.diagnoses.push_back(
                    make_diagnosis(second, code(), specialty[uniform_index(rng, specialty.size())], station()));
                if (uniform01(rng) < 0.5 && second.plus_days(30) <= config_.study_end) {
                    p.diagnoses.push_back(make_diagnosis(detail::uniform_date(rng, second.plus_days(1),
                                                                              config_.study_end.plus_days(1)),
                                                         code(), NoteType::primary_care, station()));
                }
                return;
            }
        }
    }

    std::string compose_text(Rng& rng, const std::vector<std::size_t>& keywords,
                             const std::vector<std::string>& filler) const {
        const int n_filler = config_.filler_min + static_cast<int>(uniform_index(
                                                      rng, static_cast<std::uint64_t>(config_.filler_max -
                                                                                      config_.filler_min + 1)));
        std::vector<std::string> tokens;
        tokens.reserve(static_cast<std::size_t>(n_filler) + keywords.size());
        for (int i = 0; i < n_filler; ++i) tokens.push_back(filler[uniform_index(rng, filler.size())]);
        for (auto k : keywords) {
            std::string w = config_.lexicon[k].keyword;
            const double u = uniform01(rng);
            if (u < 0.05) {
                for (auto& c : w) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            } else if (u < 0.25) {
                w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
            }
            tokens.push_back(std::move(w));
        }
        for (std::size_t i = tokens.size(); i > 1; --i) std::swap(tokens[i - 1], tokens[uniform_index(rng, i)]);
        std::string text;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i > 0) {
                const double u = uniform01(rng);
                text += u < 0.05 ? ". " : (u < 0.15 ? ", " : " ");
            }
            text += tokens[i];
        }
        text += '.';
        return text;
    }

    CorpusConfig config_;
    std::uint64_t master_seed_;
    std::vector<double> baseline_weights_;
    std::vector<double> ramp_weights_;
    std::vector<double> station_weights_;
    std::vector<PatientRole> roles_;
};

/// Generates patients in index order, handing each to `sink`. Patients are drawn in
/// parallel batches but delivered serially, so output is independent of `jobs`.
inline void generate_corpus_streaming(const CorpusConfig& config, std::uint64_t seed, unsigned jobs,
                                      const std::function<void(PatientRecord&&)>& sink) {
    const CorpusGenerator gen(config, seed);
    const std::size_t n = gen.size();
    const std::size_t batch = std::max<std::size_t>(64, 16 * static_cast<std::size_t>(std::max(1u, jobs)));
    std::vector<PatientRecord> buffer;
    for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t count = std::min(batch, n - start);
        buffer.assign(count, PatientRecord{});
        parallel_for(count, jobs, [&](std::size_t i) { buffer[i] = gen.patient(start + i); });
        for (auto& p : buffer) sink(std::move(p));
    }
}

inline std::vector<PatientRecord> generate_corpus(const CorpusConfig& config, std::uint64_t seed, unsigned jobs = 1) {
    std::vector<PatientRecord> out;
    out.reserve(static_cast<std::size_t>(std::max(0, config.n_patients())));
    generate_corpus_streaming(config, seed, jobs, [&](PatientRecord&& p) { out.push_back(std::move(p)); });
    return out;
}

}  // namespace adpredict

#endif  // ADPREDICT_CORPUS_HPP
