#ifndef ADPREDICT_CORPUS_IO_HPP
#define ADPREDICT_CORPUS_IO_HPP

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "adpredict/error.hpp"
#include "adpredict/records.hpp"

// Corpus on disk, one JSON object per line:
//   patients.jsonl   patient_id, birth_date, sex, race, ethnicity, medications[{date, drug_class, station}]
//   notes.jsonl      patient_id, date, note_type, clinic_stop_code, station, text
//   diagnoses.jsonl  patient_id, date, icd_code, clinic_stop_code, is_specialty_clinic,
//                    is_dementia_clinic, provider_type, station
//   manifest.jsonl   first line {"record":"run", ...}; then one {"record":"patient", patient_id,
//                    is_case, index_date, ascertainment_path, label_noise, reference_date} per patient
// Notes and diagnoses are grouped by patient, in patients.jsonl order.

namespace adpredict {

namespace fs = std::filesystem;
using nlohmann::json;

class CorpusWriter {
public:
    CorpusWriter(const fs::path& dir, const json& run_info) {
        fs::create_directories(dir);
        open(patients_, dir / "patients.jsonl");
        open(notes_, dir / "notes.jsonl");
        open(diagnoses_, dir / "diagnoses.jsonl");
        open(manifest_, dir / "manifest.jsonl");
        json run = run_info;
        run["record"] = "run";
        manifest_ << run.dump() << '\n';
    }

    void write(const PatientRecord& p) {
        json meds = json::array();
        for (const auto& m : p.medications) {
            meds.push_back({{"date", m.date.str()}, {"drug_class", m.drug_class}, {"station", m.station}});
        }
        json row{{"patient_id", p.patient_id},
                 {"birth_date", p.birth_date.str()},
                 {"sex", to_string(p.sex)},
                 {"race", to_string(p.race)},
                 {"ethnicity", to_string(p.ethnicity)},
                 {"medications", std::move(meds)}};
        patients_ << row.dump() << '\n';
        for (const auto& n : p.notes) {
            json r{{"patient_id", p.patient_id},        {"date", n.date.str()},
                   {"note_type", to_string(n.note_type)}, {"clinic_stop_code", n.clinic_stop_code},
                   {"station", n.station},             {"text", n.text}};
            notes_ << r.dump() << '\n';
        }
        for (const auto& d : p.diagnoses) {
            json r{{"patient_id", p.patient_id},
                   {"date", d.date.str()},
                   {"icd_code", d.icd_code},
                   {"clinic_stop_code", d.clinic_stop_code},
                   {"is_specialty_clinic", d.is_specialty_clinic},
                   {"is_dementia_clinic", d.is_dementia_clinic},
                   {"provider_type", to_string(d.provider_type)},
                   {"station", d.station}};
            diagnoses_ << r.dump() << '\n';
        }
        json m{{"record", "patient"},
               {"patient_id", p.patient_id},
               {"is_case", p.is_case_truth},
               {"index_date", p.index_date_truth ? json(p.index_date_truth->str()) : json(nullptr)},
               {"ascertainment_path", p.path_truth ? json(std::string(to_string(*p.path_truth))) : json(nullptr)},
               {"label_noise", p.label_noise_truth},
               {"reference_date", p.reference_date_truth.str()}};
        manifest_ << m.dump() << '\n';
    }

private:
    static void open(std::ofstream& out, const fs::path& path) {
        out.open(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + path.string());
    }

    std::ofstream patients_, notes_, diagnoses_, manifest_;
};

namespace detail {

class JsonlReader {
public:
    explicit JsonlReader(const fs::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw DataError("cannot open " + path.string());
    }

    bool next(json& out) {
        std::string line;
        while (std::getline(in_, line)) {
            ++lineno_;
            if (line.empty()) continue;
            try {
                out = json::parse(line);
            } catch (const json::parse_error& e) {
                throw DataError(path_.string() + ":" + std::to_string(lineno_) + ": " + e.what());
            }
            return true;
        }
        return false;
    }

    std::string where() const { return path_.string() + ":" + std::to_string(lineno_); }

private:
    fs::path path_;
    std::ifstream in_;
    long lineno_ = 0;
};

template <typename T>
T field(const json& j, const char* key, const detail::JsonlReader& r) {
    const auto it = j.find(key);
    if (it == j.end()) throw DataError(r.where() + ": missing field '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw DataError(r.where() + ": field '" + key + "': " + e.what());
    }
}

/// Pulls the contiguous run of rows for `id` from a patient-grouped file.
class GroupedRows {
public:
    explicit GroupedRows(const fs::path& path) : reader_(path) { has_ = reader_.next(pending_); }

    template <typename Fn>
    void take(const std::string& id, Fn&& fn) {
        while (has_ && field<std::string>(pending_, "patient_id", reader_) == id) {
            fn(pending_, reader_);
            has_ = reader_.next(pending_);
        }
    }

    void expect_exhausted() const {
        if (has_) {
            throw DataError(reader_.where() + ": row for patient '" +
                            pending_.value("patient_id", std::string("?")) +
                            "' is out of order or has no patients.jsonl entry");
        }
    }

private:
    JsonlReader reader_;
    json pending_;
    bool has_ = false;
};

}  // namespace detail

/// Streams a corpus directory patient by patient. Ground-truth fields are filled from
/// manifest.jsonl when present.
inline void read_corpus_streaming(const fs::path& dir, const std::function<void(PatientRecord&&)>& sink) {
    detail::JsonlReader patients(dir / "patients.jsonl");
    detail::GroupedRows notes(dir / "notes.jsonl");
    detail::GroupedRows diagnoses(dir / "diagnoses.jsonl");

    std::unordered_map<std::string, json> truth;
    if (fs::exists(dir / "manifest.jsonl")) {
        detail::JsonlReader manifest(dir / "manifest.jsonl");
        json row;
        while (manifest.next(row)) {
            if (row.value("record", std::string()) == "patient") {
                truth.emplace(detail::field<std::string>(row, "patient_id", manifest), row);
            }
        }
    }

    json row;
    while (patients.next(row)) {
        using detail::field;
        PatientRecord p;
        p.patient_id = field<std::string>(row, "patient_id", patients);
        p.birth_date = Date::parse(field<std::string>(row, "birth_date", patients));
        p.sex = parse_sex(field<std::string>(row, "sex", patients));
        p.race = parse_race(field<std::string>(row, "race", patients));
        p.ethnicity = parse_ethnicity(field<std::string>(row, "ethnicity", patients));
        if (row.contains("medications")) {
            for (const auto& m : row.at("medications")) {
                p.medications.push_back({Date::parse(field<std::string>(m, "date", patients)),
                                         field<std::string>(m, "drug_class", patients),
                                         field<int>(m, "station", patients)});
            }
        }
        notes.take(p.patient_id, [&](const json& r, const detail::JsonlReader& src) {
            Note n;
            n.date = Date::parse(field<std::string>(r, "date", src));
            n.note_type = parse_note_type(field<std::string>(r, "note_type", src));
            n.clinic_stop_code = field<int>(r, "clinic_stop_code", src);
            n.station = field<int>(r, "station", src);
            n.text = field<std::string>(r, "text", src);
            if (n.text.empty()) throw DataError(src.where() + ": empty note text");
            p.notes.push_back(std::move(n));
        });
        diagnoses.take(p.patient_id, [&](const json& r, const detail::JsonlReader& src) {
            DiagnosisEvent d;
            d.date = Date::parse(field<std::string>(r, "date", src));
            d.icd_code = field<std::string>(r, "icd_code", src);
            d.clinic_stop_code = field<int>(r, "clinic_stop_code", src);
            d.is_specialty_clinic = field<bool>(r, "is_specialty_clinic", src);
            d.is_dementia_clinic = field<bool>(r, "is_dementia_clinic", src);
            d.provider_type = parse_provider_type(field<std::string>(r, "provider_type", src));
            d.station = field<int>(r, "station", src);
            p.diagnoses.push_back(std::move(d));
        });
        for (std::size_t i = 1; i < p.notes.size(); ++i) {
            if (p.notes[i].date < p.notes[i - 1].date) {
                throw DataError("notes for " + p.patient_id + " are not sorted by date");
            }
        }
        if (const auto it = truth.find(p.patient_id); it != truth.end()) {
            const auto& t = it->second;
            p.is_case_truth = t.value("is_case", false);
            if (t.contains("index_date") && !t["index_date"].is_null()) {
                p.index_date_truth = Date::parse(t["index_date"].get<std::string>());
            }
            if (t.contains("ascertainment_path") && !t["ascertainment_path"].is_null()) {
                p.path_truth = parse_ascertainment_path(t["ascertainment_path"].get<std::string>());
            }
            p.label_noise_truth = t.value("label_noise", false);
            if (t.contains("reference_date")) p.reference_date_truth = Date::parse(t["reference_date"].get<std::string>());
        }
        sink(std::move(p));
    }
    notes.expect_exhausted();
    diagnoses.expect_exhausted();
}

inline std::vector<PatientRecord> read_corpus(const fs::path& dir) {
    std::vector<PatientRecord> out;
    read_corpus_streaming(dir, [&](PatientRecord&& p) { out.push_back(std::move(p)); });
    return out;
}

}  // namespace adpredict

#endif  // ADPREDICT_CORPUS_IO_HPP
