#ifndef ADPREDICT_RECORDS_HPP
#define ADPREDICT_RECORDS_HPP

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adpredict/date.hpp"
#include "adpredict/error.hpp"

namespace adpredict {

enum class Sex { female, male };

enum class Race { white, black, asian, pacific_islander, american_indian, unknown };

enum class Ethnicity { hispanic_or_latino, not_hispanic_or_latino };

/// The nine note sources retained for analysis.
enum class NoteType {
    primary_care,
    memory_clinic,
    neurology,
    geriatric_psychiatry,
    geriatric_medicine,
    cognitive_nursing,
    mental_health,
    comp_and_pension,
    consultation,
};

enum class ProviderType {
    neurology,
    vascular_neurology,
    psychiatry,
    neuropsychology,
    geriatric_medicine,
    primary_care,
    nursing,
    other,
};

enum class AscertainmentPath { single_dementia_clinic, multi_with_specialty };

inline constexpr std::array<NoteType, 9> all_note_types{
    NoteType::primary_care,      NoteType::memory_clinic,   NoteType::neurology,
    NoteType::geriatric_psychiatry, NoteType::geriatric_medicine, NoteType::cognitive_nursing,
    NoteType::mental_health,     NoteType::comp_and_pension, NoteType::consultation,
};

inline constexpr std::array<Race, 6> all_races{Race::white,           Race::black,           Race::asian,
                                               Race::pacific_islander, Race::american_indian, Race::unknown};

inline constexpr std::array<ProviderType, 8> all_provider_types{
    ProviderType::neurology,          ProviderType::vascular_neurology, ProviderType::psychiatry,
    ProviderType::neuropsychology,    ProviderType::geriatric_medicine, ProviderType::primary_care,
    ProviderType::nursing,            ProviderType::other,
};

// Enum <-> text. Every enum round-trips through its snake_case name.

inline std::string_view to_string(Sex s) { return s == Sex::female ? "female" : "male"; }

inline std::string_view to_string(Race r) {
    switch (r) {
        case Race::white: return "white";
        case Race::black: return "black";
        case Race::asian: return "asian";
        case Race::pacific_islander: return "pacific_islander";
        case Race::american_indian: return "american_indian";
        case Race::unknown: return "unknown";
    }
    return "unknown";
}

inline std::string_view to_string(Ethnicity e) {
    return e == Ethnicity::hispanic_or_latino ? "hispanic_or_latino" : "not_hispanic_or_latino";
}

inline std::string_view to_string(NoteType t) {
    switch (t) {
        case NoteType::primary_care: return "primary_care";
        case NoteType::memory_clinic: return "memory_clinic";
        case NoteType::neurology: return "neurology";
        case NoteType::geriatric_psychiatry: return "geriatric_psychiatry";
        case NoteType::geriatric_medicine: return "geriatric_medicine";
        case NoteType::cognitive_nursing: return "cognitive_nursing";
        case NoteType::mental_health: return "mental_health";
        case NoteType::comp_and_pension: return "comp_and_pension";
        case NoteType::consultation: return "consultation";
    }
    return "primary_care";
}

inline std::string_view to_string(ProviderType p) {
    switch (p) {
        case ProviderType::neurology: return "neurology";
        case ProviderType::vascular_neurology: return "vascular_neurology";
        case ProviderType::psychiatry: return "psychiatry";
        case ProviderType::neuropsychology: return "neuropsychology";
        case ProviderType::geriatric_medicine: return "geriatric_medicine";
        case ProviderType::primary_care: return "primary_care";
        case ProviderType::nursing: return "nursing";
        case ProviderType::other: return "other";
    }
    return "other";
}

inline std::string_view to_string(AscertainmentPath p) {
    return p == AscertainmentPath::single_dementia_clinic ? "single_dementia_clinic" : "multi_with_specialty";
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<Enum, N>& values, std::string_view what) {
    for (auto v : values) {
        if (to_string(v) == text) return v;
    }
    throw DataError("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

inline Sex parse_sex(std::string_view s) {
    return parse_enum(s, std::array<Sex, 2>{Sex::female, Sex::male}, "sex");
}
inline Race parse_race(std::string_view s) { return parse_enum(s, all_races, "race"); }
inline Ethnicity parse_ethnicity(std::string_view s) {
    return parse_enum(s, std::array<Ethnicity, 2>{Ethnicity::hispanic_or_latino, Ethnicity::not_hispanic_or_latino},
                      "ethnicity");
}
inline NoteType parse_note_type(std::string_view s) { return parse_enum(s, all_note_types, "note type"); }
inline ProviderType parse_provider_type(std::string_view s) {
    return parse_enum(s, all_provider_types, "provider type");
}
inline AscertainmentPath parse_ascertainment_path(std::string_view s) {
    return parse_enum(s,
                      std::array<AscertainmentPath, 2>{AscertainmentPath::single_dementia_clinic,
                                                       AscertainmentPath::multi_with_specialty},
                      "ascertainment path");
}

struct Note {
    Date date;
    NoteType note_type = NoteType::primary_care;
    int clinic_stop_code = 0;
    int station = 0;
    std::string text;

    friend bool operator==(const Note&, const Note&) = default;
};

struct DiagnosisEvent {
    Date date;
    std::string icd_code;
    int clinic_stop_code = 0;
    bool is_specialty_clinic = false;
    bool is_dementia_clinic = false;
    ProviderType provider_type = ProviderType::primary_care;
    int station = 0;

    friend bool operator==(const DiagnosisEvent&, const DiagnosisEvent&) = default;
};

struct MedicationEvent {
    Date date;
    std::string drug_class;
    int station = 0;

    friend bool operator==(const MedicationEvent&, const MedicationEvent&) = default;
};

/// One person's demographics and longitudinal record. The `*_truth` fields are
/// generator ground truth and are never read by cohort construction or modelling.
struct PatientRecord {
    std::string patient_id;
    Date birth_date;
    Sex sex = Sex::male;
    Race race = Race::white;
    Ethnicity ethnicity = Ethnicity::not_hispanic_or_latino;
    std::vector<Note> notes;  // ascending by date
    std::vector<DiagnosisEvent> diagnoses;
    std::vector<MedicationEvent> medications;

    bool is_case_truth = false;
    std::optional<Date> index_date_truth;
    std::optional<AscertainmentPath> path_truth;
    bool label_noise_truth = false;  // case whose notes follow the control trajectory
    Date reference_date_truth;       // index date for cases, pseudo-index for everyone else

    friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

/// Stop-code, station and date of every encounter (notes, diagnoses, medications).
struct Visit {
    Date date;
    int station = 0;
};

inline std::vector<Visit> visits_of(const PatientRecord& p) {
    std::vector<Visit> v;
    v.reserve(p.notes.size() + p.diagnoses.size() + p.medications.size());
    for (const auto& n : p.notes) v.push_back({n.date, n.station});
    for (const auto& d : p.diagnoses) v.push_back({d.date, d.station});
    for (const auto& m : p.medications) v.push_back({m.date, m.station});
    return v;
}

}  // namespace adpredict

#endif  // ADPREDICT_RECORDS_HPP
