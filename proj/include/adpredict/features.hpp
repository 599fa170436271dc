#ifndef ADPREDICT_FEATURES_HPP
#define ADPREDICT_FEATURES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
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
#include "adpredict/lexicon.hpp"
#include "adpredict/matcher.hpp"
#include "adpredict/records.hpp"

namespace adpredict {

inline constexpr int max_pair_age = 120;

struct KeywordAgePair {
    std::uint32_t keyword = 0;  // lexicon index
    int age = 0;

    std::uint32_t key() const { return keyword * (max_pair_age + 1) + static_cast<std::uint32_t>(age); }
    static KeywordAgePair from_key(std::uint32_t k) {
        return {k / (max_pair_age + 1), static_cast<int>(k % (max_pair_age + 1))};
    }
    friend bool operator==(const KeywordAgePair&, const KeywordAgePair&) = default;
};

/// Multiset of keyword-age pairs for one patient: pair key -> occurrence count.
using PairCounts = std::map<std::uint32_t, int>;

/// Bit set over NoteType.
class NoteFilter {
public:
    static NoteFilter all() {
        NoteFilter f;
        f.mask_ = (1u << all_note_types.size()) - 1;
        return f;
    }
    static NoteFilter only(NoteType t) {
        NoteFilter f;
        f.mask_ = 1u << static_cast<unsigned>(t);
        return f;
    }
    bool accepts(NoteType t) const { return (mask_ >> static_cast<unsigned>(t)) & 1u; }

private:
    std::uint32_t mask_ = 0;
};

inline int pair_age(Date birth, Date note_date) {
    if (note_date < birth) throw DataError("note dated " + note_date.str() + " precedes birth " + birth.str());
    const int age = whole_years_between(birth, note_date);
    if (age > max_pair_age) {
        throw DataError("note dated " + note_date.str() + " gives age " + std::to_string(age) + " outside [0, 120]");
    }
    return age;
}

/// Keyword-age pairs from the notes of `patient` that fall inside `window` and pass `filter`.
/// Every surface mention counts; context such as negation is ignored.
inline PairCounts scan_patient(const PatientRecord& patient, const ObservationWindow& window,
                               const KeywordMatcher& matcher, const NoteFilter& filter) {
    PairCounts out;
    std::vector<KeywordHit> hits;
    for (const auto& note : patient.notes) {
        if (!window.contains(note.date) || !filter.accepts(note.note_type)) continue;
        hits.clear();
        matcher.scan(note.text, hits);
        if (hits.empty()) continue;
        const int age = pair_age(patient.birth_date, note.date);
        for (const auto& h : hits) ++out[KeywordAgePair{h.keyword, age}.key()];
    }
    return out;
}

/// One keyword mention with its note's date and type.
struct DatedHit {
    Date date;
    std::uint16_t keyword = 0;
    NoteType note_type = NoteType::primary_care;
};

/// A patient scanned once over the full history; windows are applied afterwards.
struct ScannedPatient {
    PatientSummary summary;
    std::vector<DatedHit> hits;  // ascending by date
    bool is_case_truth = false;
    bool label_noise_truth = false;
};

inline ScannedPatient scan_full(const PatientRecord& patient, const KeywordMatcher& matcher) {
    ScannedPatient s;
    s.summary = summarize(patient);
    s.is_case_truth = patient.is_case_truth;
    s.label_noise_truth = patient.label_noise_truth;
    std::vector<KeywordHit> hits;
    for (const auto& note : patient.notes) {
        hits.clear();
        matcher.scan(note.text, hits);
        for (const auto& h : hits) s.hits.push_back({note.date, static_cast<std::uint16_t>(h.keyword), note.note_type});
    }
    return s;
}

/// Same result as scan_patient on the original record, from a pre-scanned patient.
inline PairCounts pairs_in_window(const ScannedPatient& p, const ObservationWindow& window, const NoteFilter& filter,
                                  const std::vector<bool>* keyword_mask = nullptr) {
    PairCounts out;
    for (const auto& h : p.hits) {
        if (!window.contains(h.date) || !filter.accepts(h.note_type)) continue;
        if (keyword_mask && !(*keyword_mask)[h.keyword]) continue;
        ++out[KeywordAgePair{h.keyword, pair_age(p.summary.birth_date, h.date)}.key()];
    }
    return out;
}

enum class SelectionMetric { document_frequency, total_count };

struct PatientPairs {
    std::string patient_id;
    const PairCounts* counts = nullptr;
};

/// The selected predictors. Entry i of every array describes feature column i.
struct PairVocabulary {
    std::vector<KeywordAgePair> pairs;
    std::vector<std::string> keywords;  // keyword text per pair
    std::vector<int> doc_freq;
    int n_train = 0;
    std::vector<std::string> source_ids;  // patients the vocabulary was fit on

    std::size_t size() const { return pairs.size(); }
};

/// Top-K pairs by training document frequency (or total count). Ties break on
/// (keyword text, age) ascending. Must only ever see training patients.
inline PairVocabulary select_vocabulary(const std::vector<PatientPairs>& training, std::size_t k,
                                        const Lexicon& lexicon,
                                        SelectionMetric metric = SelectionMetric::document_frequency) {
    std::unordered_map<std::uint32_t, std::pair<int, long long>> stats;  // df, total
    PairVocabulary v;
    v.n_train = static_cast<int>(training.size());
    v.source_ids.reserve(training.size());
    for (const auto& p : training) {
        v.source_ids.push_back(p.patient_id);
        for (const auto& [key, count] : *p.counts) {
            if (count <= 0) continue;
            auto& s = stats[key];
            s.first += 1;
            s.second += count;
        }
    }
    struct Candidate {
        KeywordAgePair pair;
        const std::string* keyword;
        int df;
        long long total;
    };
    std::vector<Candidate> cands;
    cands.reserve(stats.size());
    for (const auto& [key, s] : stats) {
        const auto pair = KeywordAgePair::from_key(key);
        cands.push_back({pair, &lexicon[pair.keyword].keyword, s.first, s.second});
    }
    std::sort(cands.begin(), cands.end(), [metric](const Candidate& a, const Candidate& b) {
        const long long sa = metric == SelectionMetric::document_frequency ? a.df : a.total;
        const long long sb = metric == SelectionMetric::document_frequency ? b.df : b.total;
        if (sa != sb) return sa > sb;
        if (*a.keyword != *b.keyword) return *a.keyword < *b.keyword;
        return a.pair.age < b.pair.age;
    });
    if (cands.size() < k) {
        spdlog::warn("vocabulary: only {} distinct keyword-age pairs available, requested {}", cands.size(), k);
    }
    const std::size_t n = std::min(k, cands.size());
    for (std::size_t i = 0; i < n; ++i) {
        v.pairs.push_back(cands[i].pair);
        v.keywords.push_back(*cands[i].keyword);
        v.doc_freq.push_back(cands[i].df);
    }
    return v;
}

/// count * ln(n_train / doc_freq).
inline double tfidf_weight(double count, int doc_freq, int n_train) {
    if (doc_freq <= 0) throw ArgumentError("tfidf_weight: doc_freq must be >= 1");
    if (n_train < doc_freq) throw ArgumentError("tfidf_weight: n_train < doc_freq");
    if (count == 0 || doc_freq == n_train) return 0.0;
    return count * std::log(static_cast<double>(n_train) / doc_freq);
}

struct FeatureVector {
    std::string patient_id;
    std::vector<double> values;
    ObservationWindow window;
};

inline std::vector<double> vectorize(const PairCounts& counts, const PairVocabulary& vocab) {
    std::vector<double> values(vocab.size(), 0.0);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        const auto it = counts.find(vocab.pairs[i].key());
        if (it != counts.end()) values[i] = tfidf_weight(it->second, vocab.doc_freq[i], vocab.n_train);
    }
    return values;
}

inline void write_vocab_csv(std::ostream& out, const PairVocabulary& v) {
    out << "rank,keyword,age,doc_freq\n";
    for (std::size_t i = 0; i < v.size(); ++i) {
        out << (i + 1) << ',' << v.keywords[i] << ',' << v.pairs[i].age << ',' << v.doc_freq[i] << '\n';
    }
}

/// Reads vocab.csv; `n_train` is not part of the file and must be supplied.
inline PairVocabulary read_vocab_csv(std::istream& in, const Lexicon& lexicon, int n_train) {
    PairVocabulary v;
    v.n_train = n_train;
    std::string line;
    if (!std::getline(in, line) || line != "rank,keyword,age,doc_freq") throw DataError("vocab.csv: bad header");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cols = detail::split(line, ',');
        if (cols.size() != 4) throw DataError("vocab.csv:" + std::to_string(lineno) + ": expected 4 columns");
        const auto kw = lexicon.find(cols[1]);
        if (!kw) throw DataError("vocab.csv:" + std::to_string(lineno) + ": keyword not in lexicon: " + cols[1]);
        v.pairs.push_back({static_cast<std::uint32_t>(*kw), std::stoi(cols[2])});
        v.keywords.push_back(cols[1]);
        v.doc_freq.push_back(std::stoi(cols[3]));
    }
    return v;
}

/// features.csv: header `patient_id,label,f1..fK`, one row per patient.
inline void write_features_csv(std::ostream& out, const std::vector<std::string>& column_names,
                               const std::vector<FeatureVector>& rows, const std::vector<int>& labels) {
    out << "patient_id,label";
    for (const auto& c : column_names) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << rows[r].patient_id << ',' << labels[r];
        for (double x : rows[r].values) out << ',' << fmt::format("{:.17g}", x);
        out << '\n';
    }
}

struct FeatureTable {
    std::vector<std::string> columns;
    std::vector<std::string> patient_ids;
    std::vector<int> labels;
    std::vector<std::vector<double>> rows;
};

inline FeatureTable read_features_csv(std::istream& in) {
    FeatureTable t;
    std::string line;
    if (!std::getline(in, line)) throw DataError("features.csv: empty file");
    auto header = detail::split(line, ',');
    if (header.size() < 2 || header[0] != "patient_id" || header[1] != "label") {
        throw DataError("features.csv: bad header");
    }
    t.columns.assign(header.begin() + 2, header.end());
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cols = detail::split(line, ',');
        if (cols.size() != header.size()) {
            throw DataError("features.csv:" + std::to_string(lineno) + ": column count mismatch");
        }
        t.patient_ids.push_back(cols[0]);
        t.labels.push_back(std::stoi(cols[1]));
        std::vector<double> row;
        row.reserve(cols.size() - 2);
        for (std::size_t i = 2; i < cols.size(); ++i) row.push_back(std::stod(cols[i]));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline std::vector<std::string> vocab_column_names(const PairVocabulary& v) {
    std::vector<std::string> names;
    names.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::string kw = v.keywords[i];
        std::replace(kw.begin(), kw.end(), ' ', '_');
        names.push_back(fmt::format("{}@{}", kw, v.pairs[i].age));
    }
    return names;
}

}  // namespace adpredict

#endif  // ADPREDICT_FEATURES_HPP
