#ifndef ADPREDICT_EXPERIMENT_HPP
#define ADPREDICT_EXPERIMENT_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "adpredict/cohort.hpp"
#include "adpredict/error.hpp"
#include "adpredict/explain.hpp"
#include "adpredict/features.hpp"
#include "adpredict/kv_config.hpp"
#include "adpredict/lexicon.hpp"
#include "adpredict/matcher.hpp"
#include "adpredict/metrics.hpp"
#include "adpredict/model_io.hpp"
#include "adpredict/parallel.hpp"
#include "adpredict/random.hpp"
#include "adpredict/trends.hpp"

namespace adpredict {

enum class Setting { random_split, station_holdout };

enum class PredictorSet {
    keywords,
    icd_only,
    structured_only,
    structured_plus_keywords,
    keywords_no_cognitive_tests,
    primary_care_notes_only,
};

inline constexpr std::array<PredictorSet, 6> all_predictor_sets{
    PredictorSet::keywords,        PredictorSet::icd_only,
    PredictorSet::structured_only, PredictorSet::structured_plus_keywords,
    PredictorSet::keywords_no_cognitive_tests, PredictorSet::primary_care_notes_only};

inline const char* to_string(Setting s) { return s == Setting::random_split ? "random_split" : "station_holdout"; }

inline const char* to_string(PredictorSet p) {
    switch (p) {
        case PredictorSet::keywords: return "keywords";
        case PredictorSet::icd_only: return "icd_only";
        case PredictorSet::structured_only: return "structured_only";
        case PredictorSet::structured_plus_keywords: return "structured_plus_keywords";
        case PredictorSet::keywords_no_cognitive_tests: return "keywords_no_cognitive_tests";
        case PredictorSet::primary_care_notes_only: return "primary_care_notes_only";
    }
    return "?";
}

inline PredictorSet parse_predictor_set(const std::string& s) {
    for (auto p : all_predictor_sets) {
        if (s == to_string(p)) return p;
    }
    throw ArgumentError("unknown predictor set '" + s + "'");
}

inline Setting parse_setting(const std::string& s) {
    if (s == "random_split") return Setting::random_split;
    if (s == "station_holdout") return Setting::station_holdout;
    throw ConfigError("experiment.setting must be random_split or station_holdout, got '" + s + "'");
}

enum class SubgroupKind { sex, age_band, race_ethnicity };

inline SubgroupKind parse_subgroup_kind(const std::string& s) {
    if (s == "sex") return SubgroupKind::sex;
    if (s == "age_band") return SubgroupKind::age_band;
    if (s == "race_ethnicity") return SubgroupKind::race_ethnicity;
    throw ConfigError("unknown subgroup '" + s + "' (expected sex, age_band, race_ethnicity)");
}

inline const char* to_string(SubgroupKind k) {
    switch (k) {
        case SubgroupKind::sex: return "sex";
        case SubgroupKind::age_band: return "age_band";
        case SubgroupKind::race_ethnicity: return "race_ethnicity";
    }
    return "?";
}

struct ExperimentConfig {
    Setting setting = Setting::random_split;
    double split_fraction = 0.8;  // training share under random_split
    int holdout_station_count = 10;
    std::vector<int> clean_years{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int report_clean_years = 10;  // cell used for vocab.csv, importance and saved models
    std::vector<ModelKind> models{ModelKind::lr, ModelKind::svm, ModelKind::adaboost, ModelKind::rf};
    std::vector<PredictorSet> predictor_sets{PredictorSet::keywords};
    std::vector<SubgroupKind> subgroups;
    bool subgroup_retrain = false;  // train a separate model per subgroup instead of slicing the test set
    bool diagnosis_strata = true;
    std::size_t vocab_size = 1000;
    std::size_t icd_vocab_size = 200;
    SelectionMetric selection_metric = SelectionMetric::document_frequency;
    int hl_groups = 5;
    PrAucMethod pr_method = PrAucMethod::average_precision;
    TrainOptions train = [] {
        TrainOptions t;
        t.lr.l2_lambda = 3e-2;
        return t;
    }();
    bool explain = true;
    bool trends = true;
    int trends_sample_n = 0;
    std::uint64_t seed = 42;
    unsigned jobs = 1;

    void validate() const {
        if (!(split_fraction > 0 && split_fraction < 1)) throw ConfigError("experiment.split_fraction must be in (0,1)");
        if (clean_years.empty()) throw ConfigError("experiment.clean_years is empty");
        for (int c : clean_years) {
            if (c < 0 || c > 10) throw ConfigError("experiment.clean_years entries must be in [0,10]");
        }
        if (std::find(clean_years.begin(), clean_years.end(), report_clean_years) == clean_years.end()) {
            throw ConfigError("experiment.report_clean_years must be one of experiment.clean_years");
        }
        if (models.empty()) throw ConfigError("experiment.models is empty");
        if (predictor_sets.empty()) throw ConfigError("experiment.predictor_sets is empty");
        if (vocab_size == 0) throw ConfigError("experiment.vocab_size must be >= 1");
        if (hl_groups < 3) throw ConfigError("experiment.hl_groups must be >= 3");
    }

    static ExperimentConfig from_kv(const KeyValueConfig& kv) {
        ExperimentConfig c;
        c.setting = parse_setting(kv.get_string("experiment.setting", to_string(c.setting)));
        c.split_fraction = kv.get_double("experiment.split_fraction", c.split_fraction);
        c.holdout_station_count =
            static_cast<int>(kv.get_int("experiment.holdout_station_count", c.holdout_station_count));
        if (kv.has("experiment.clean_years")) {
            c.clean_years.clear();
            for (const auto& s : kv.get_list("experiment.clean_years", {})) {
                const auto dash = s.find('-');
                try {
                    if (dash != std::string::npos && dash > 0) {
                        const int lo = std::stoi(s.substr(0, dash)), hi = std::stoi(s.substr(dash + 1));
                        for (int y = lo; y <= hi; ++y) c.clean_years.push_back(y);
                    } else {
                        c.clean_years.push_back(std::stoi(s));
                    }
                } catch (const std::logic_error&) {
                    throw ConfigError("experiment.clean_years: bad entry '" + s + "'");
                }
            }
        }
        c.report_clean_years = static_cast<int>(
            kv.get_int("experiment.report_clean_years", *std::max_element(c.clean_years.begin(), c.clean_years.end())));
        if (kv.has("experiment.models")) {
            c.models.clear();
            for (const auto& s : kv.get_list("experiment.models", {})) c.models.push_back(parse_model_kind(s));
        }
        if (kv.has("experiment.predictor_sets")) {
            c.predictor_sets.clear();
            for (const auto& s : kv.get_list("experiment.predictor_sets", {})) {
                try {
                    c.predictor_sets.push_back(parse_predictor_set(s));
                } catch (const ArgumentError& e) {
                    throw ConfigError(e.what());
                }
            }
        }
        for (const auto& s : kv.get_list("experiment.subgroups", {})) c.subgroups.push_back(parse_subgroup_kind(s));
        c.subgroup_retrain = kv.get_bool("experiment.subgroup_retrain", c.subgroup_retrain);
        c.diagnosis_strata = kv.get_bool("experiment.diagnosis_strata", c.diagnosis_strata);
        c.vocab_size = static_cast<std::size_t>(kv.get_int("experiment.vocab_size", static_cast<long long>(c.vocab_size)));
        c.icd_vocab_size =
            static_cast<std::size_t>(kv.get_int("experiment.icd_vocab_size", static_cast<long long>(c.icd_vocab_size)));
        const auto metric = kv.get_string("experiment.selection_metric", "document_frequency");
        if (metric == "document_frequency") {
            c.selection_metric = SelectionMetric::document_frequency;
        } else if (metric == "total_count") {
            c.selection_metric = SelectionMetric::total_count;
        } else {
            throw ConfigError("experiment.selection_metric must be document_frequency or total_count");
        }
        c.hl_groups = static_cast<int>(kv.get_int("experiment.hl_groups", c.hl_groups));
        const auto pr = kv.get_string("experiment.pr_auc", "average_precision");
        if (pr == "average_precision") {
            c.pr_method = PrAucMethod::average_precision;
        } else if (pr == "trapezoid") {
            c.pr_method = PrAucMethod::trapezoid;
        } else {
            throw ConfigError("experiment.pr_auc must be average_precision or trapezoid");
        }
        c.train.lr.l2_lambda = kv.get_double("model.lr.l2_lambda", c.train.lr.l2_lambda);
        c.train.lr.max_iters = static_cast<int>(kv.get_int("model.lr.max_iters", c.train.lr.max_iters));
        c.train.lr.tol = kv.get_double("model.lr.tol", c.train.lr.tol);
        c.train.lr.balance_classes = kv.get_bool("model.lr.balance_classes", c.train.lr.balance_classes);
        c.train.svm.reg_lambda = kv.get_double("model.svm.reg_lambda", c.train.svm.reg_lambda);
        c.train.svm.epochs = static_cast<int>(kv.get_int("model.svm.epochs", c.train.svm.epochs));
        c.train.adaboost_rounds = static_cast<int>(kv.get_int("model.adaboost.rounds", c.train.adaboost_rounds));
        c.train.rf.n_trees = static_cast<int>(kv.get_int("model.rf.n_trees", c.train.rf.n_trees));
        c.train.rf.max_depth = static_cast<int>(kv.get_int("model.rf.max_depth", c.train.rf.max_depth));
        c.train.rf.features_per_split =
            static_cast<int>(kv.get_int("model.rf.features_per_split", c.train.rf.features_per_split));
        c.explain = kv.get_bool("explain.enabled", c.explain);
        c.trends = kv.get_bool("trends.enabled", c.trends);
        c.trends_sample_n = static_cast<int>(kv.get_int("trends.sample_n", c.trends_sample_n));
        c.validate();
        return c;
    }
};

/// Modal station over all visits; ties go to the smallest station id.
inline int assign_station(const std::vector<int>& visit_stations) {
    if (visit_stations.empty()) throw DataError("assign_station: patient has no visits");
    std::map<int, int> counts;
    for (int s : visit_stations) ++counts[s];
    int best = counts.begin()->first, best_n = 0;
    for (const auto& [s, n] : counts) {
        if (n > best_n) {
            best = s;
            best_n = n;
        }
    }
    return best;
}

/// One analysis unit. Controls matched to several cases appear once, attached to the
/// first case (in cohort order) that drew them; they inherit that case's index date.
struct StudyPatient {
    std::string id;
    int label = 0;
    Date origin;
    std::size_t group = 0;  // index of the owning cohort pair
    int station = 0;
    AscertainmentPath path = AscertainmentPath::multi_with_specialty;  // cases only
    const ScannedPatient* scan = nullptr;
};

struct Study {
    std::vector<StudyPatient> patients;
    std::size_t n_groups = 0;
};

inline Study assemble_study(const std::vector<CohortPair>& pairs, const ScanLookup& lookup) {
    Study s;
    s.n_groups = pairs.size();
    std::unordered_set<std::string> seen;
    for (std::size_t g = 0; g < pairs.size(); ++g) {
        const auto& pr = pairs[g];
        auto add = [&](const std::string& id, int label) {
            if (!seen.insert(id).second) return;
            const auto* scan = lookup(id);
            if (!scan) throw DataError("study: no record for patient " + id);
            s.patients.push_back({id, label, pr.case_record.index_date, g,
                                  assign_station(scan->summary.visit_stations), pr.case_record.ascertainment_path,
                                  scan});
        };
        if (seen.count(pr.case_record.patient_id)) {
            throw DataError("study: case " + pr.case_record.patient_id + " also appears as a control");
        }
        add(pr.case_record.patient_id, 1);
        for (const auto& c : pr.controls) add(c, 0);
    }
    return s;
}

struct SplitIds {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

/// Random split over matched groups so no group straddles train and test.
inline SplitIds split_setting1(const Study& study, double fraction, std::uint64_t seed) {
    if (!(fraction > 0 && fraction < 1)) throw ArgumentError("split fraction must be in (0,1)");
    std::vector<std::size_t> groups(study.n_groups);
    std::iota(groups.begin(), groups.end(), std::size_t{0});
    Rng rng = make_rng(seed, streams::split);
    for (std::size_t i = groups.size(); i > 1; --i) std::swap(groups[i - 1], groups[uniform_index(rng, i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(groups.size())));
    std::vector<bool> is_train(study.n_groups, false);
    for (std::size_t i = 0; i < n_train; ++i) is_train[groups[i]] = true;
    SplitIds out;
    for (const auto& p : study.patients) (is_train[p.group] ? out.train : out.test).push_back(p.id);
    return out;
}

/// Holds out every patient whose assigned station is among `holdout_count` stations drawn
/// from `stations`.
inline SplitIds split_setting2(const Study& study, const std::vector<int>& stations, int holdout_count,
                               std::uint64_t seed) {
    std::vector<int> pool(stations.begin(), stations.end());
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    if (holdout_count <= 0) throw ArgumentError("holdout_count must be >= 1 (empty test set)");
    if (static_cast<std::size_t>(holdout_count) >= pool.size()) {
        throw ArgumentError("holdout_count must be smaller than the number of stations (" +
                            std::to_string(pool.size()) + ")");
    }
    Rng rng = make_rng(seed, streams::station);
    for (std::size_t i = 0; i < static_cast<std::size_t>(holdout_count); ++i) {
        std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    }
    const std::set<int> held(pool.begin(), pool.begin() + holdout_count);
    std::map<int, int> per_station;
    SplitIds out;
    for (const auto& p : study.patients) {
        if (held.count(p.station)) {
            out.test.push_back(p.id);
            ++per_station[p.station];
        } else {
            out.train.push_back(p.id);
        }
    }
    for (int s : held) {
        if (!per_station.count(s)) spdlog::warn("station holdout: station {} has no cohort patients", s);
    }
    return out;
}

/// Every station any cohort patient visited.
inline std::vector<int> study_stations(const Study& study) {
    std::set<int> s;
    for (const auto& p : study.patients) s.insert(p.scan->summary.visit_stations.begin(), p.scan->summary.visit_stations.end());
    return {s.begin(), s.end()};
}

/// Code and drug-class vocabularies for the structured predictors, fit on training patients.
struct StructuredVocab {
    std::vector<std::string> icd_codes;
    std::vector<std::string> medication_classes;
    bool demographics = true;

    std::size_t size() const {
        return (demographics ? 2 + all_races.size() + 2 : 0) + icd_codes.size() + medication_classes.size();
    }

    std::vector<std::string> column_names() const {
        std::vector<std::string> names;
        if (demographics) {
            names.push_back("sex=female");
            names.push_back("sex=male");
            for (auto r : all_races) names.push_back("race=" + std::string(to_string(r)));
            names.push_back("ethnicity=hispanic_or_latino");
            names.push_back("ethnicity=not_hispanic_or_latino");
        }
        for (const auto& c : icd_codes) names.push_back("icd:" + c);
        for (const auto& m : medication_classes) names.push_back("med:" + m);
        return names;
    }
};

namespace detail {
template <typename Fn>
std::vector<std::string> top_by_doc_freq(const std::vector<const PatientSummary*>& train, std::size_t k, Fn&& items) {
    std::map<std::string, int> df;
    for (const auto* p : train) {
        std::set<std::string> seen;
        items(*p, [&](const std::string& s) { seen.insert(s); });
        for (const auto& s : seen) ++df[s];
    }
    std::vector<std::pair<std::string, int>> v(df.begin(), df.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, v.size()); ++i) out.push_back(v[i].first);
    return out;
}
}  // namespace detail

/// `windows[i]` is the observation window of `train[i]`.
inline StructuredVocab fit_structured_vocab(const std::vector<const PatientSummary*>& train,
                                            const std::vector<ObservationWindow>& windows, std::size_t icd_top_k,
                                            bool demographics) {
    StructuredVocab v;
    v.demographics = demographics;
    std::unordered_map<const PatientSummary*, const ObservationWindow*> win;
    for (std::size_t i = 0; i < train.size(); ++i) win[train[i]] = &windows[i];
    v.icd_codes = detail::top_by_doc_freq(train, icd_top_k, [&](const PatientSummary& p, auto&& emit) {
        for (const auto& d : p.diagnoses) {
            if (win.at(&p)->contains(d.date)) emit(d.icd_code);
        }
    });
    if (demographics) {
        v.medication_classes =
            detail::top_by_doc_freq(train, std::numeric_limits<std::size_t>::max(), [&](const PatientSummary& p, auto&& emit) {
                for (const auto& m : p.medications) {
                    if (win.at(&p)->contains(m.date)) emit(m.drug_class);
                }
            });
        std::sort(v.medication_classes.begin(), v.medication_classes.end());
    }
    return v;
}

/// Demographic one-hots, then in-window ICD code counts, then in-window medication-class counts.
inline std::vector<double> structured_vector(const PatientSummary& p, const ObservationWindow& window,
                                             const StructuredVocab& v) {
    std::vector<double> x;
    x.reserve(v.size());
    if (v.demographics) {
        x.push_back(p.sex == Sex::female);
        x.push_back(p.sex == Sex::male);
        for (auto r : all_races) x.push_back(p.race == r);
        x.push_back(p.ethnicity == Ethnicity::hispanic_or_latino);
        x.push_back(p.ethnicity == Ethnicity::not_hispanic_or_latino);
    }
    std::unordered_map<std::string, std::size_t> icd_col, med_col;
    for (std::size_t i = 0; i < v.icd_codes.size(); ++i) icd_col[v.icd_codes[i]] = i;
    for (std::size_t i = 0; i < v.medication_classes.size(); ++i) med_col[v.medication_classes[i]] = i;
    const std::size_t icd_base = x.size();
    x.resize(icd_base + v.icd_codes.size() + v.medication_classes.size(), 0.0);
    const std::size_t med_base = icd_base + v.icd_codes.size();
    for (const auto& d : p.diagnoses) {
        if (!window.contains(d.date)) continue;
        if (const auto it = icd_col.find(d.icd_code); it != icd_col.end()) x[icd_base + it->second] += 1.0;
    }
    for (const auto& m : p.medications) {
        if (!window.contains(m.date)) continue;
        if (const auto it = med_col.find(m.drug_class); it != med_col.end()) x[med_base + it->second] += 1.0;
    }
    return x;
}

/// Feature matrices for one (clean window, predictor set) cell.
struct CellData {
    int clean_years = 0;
    PredictorSet predictor_set = PredictorSet::keywords;
    std::vector<std::size_t> train_idx, test_idx;  // into Study::patients
    std::vector<std::size_t> excluded_idx;
    Matrix x_train, x_test;
    std::vector<int> y_train, y_test;
    std::vector<std::string> columns;
    std::optional<PairVocabulary> vocab;  // keyword part, when present
    std::size_t keyword_offset = 0;       // first keyword column
    std::optional<StructuredVocab> structured;
};

inline bool uses_keywords(PredictorSet p) {
    return p != PredictorSet::icd_only && p != PredictorSet::structured_only;
}

/// Frames windows, drops patients with too little in-window history, fits every
/// vocabulary on the training side only, and vectorizes both sides.
inline CellData build_cell(const Study& study, const std::vector<bool>& is_train, int clean_years,
                           PredictorSet predictor_set, const ExperimentConfig& cfg, const Lexicon& lexicon,
                           const CohortCriteria& criteria) {
    CellData cell;
    cell.clean_years = clean_years;
    cell.predictor_set = predictor_set;
    const std::size_t n = study.patients.size();
    std::vector<ObservationWindow> windows(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = study.patients[i];
        windows[i] = frame_window(p.scan->summary.first_visit(), p.origin, clean_years, criteria.study_start,
                                  criteria.min_history_years);
        if (windows[i].excluded) {
            cell.excluded_idx.push_back(i);
        } else {
            (is_train[i] ? cell.train_idx : cell.test_idx).push_back(i);
        }
    }
    if (cell.train_idx.empty()) throw DataError("no training patients left at clean_years=" + std::to_string(clean_years));

    std::vector<std::vector<double>> rows(n);
    // Keyword part.
    if (uses_keywords(predictor_set)) {
        const NoteFilter filter =
            predictor_set == PredictorSet::primary_care_notes_only ? NoteFilter::only(NoteType::primary_care) : NoteFilter::all();
        std::vector<bool> mask(lexicon.size(), true);
        if (predictor_set == PredictorSet::keywords_no_cognitive_tests) {
            for (std::size_t k = 0; k < lexicon.size(); ++k) mask[k] = !lexicon[k].is_cognitive_test;
        }
        std::vector<PairCounts> counts(n);
        parallel_for(n, cfg.jobs, [&](std::size_t i) {
            if (!windows[i].excluded) counts[i] = pairs_in_window(*study.patients[i].scan, windows[i], filter, &mask);
        });
        std::vector<PatientPairs> training;
        training.reserve(cell.train_idx.size());
        for (auto i : cell.train_idx) training.push_back({study.patients[i].id, &counts[i]});
        cell.vocab = select_vocabulary(training, cfg.vocab_size, lexicon, cfg.selection_metric);
        for (std::size_t i = 0; i < n; ++i) {
            if (!windows[i].excluded) rows[i] = vectorize(counts[i], *cell.vocab);
        }
    }
    // Structured part.
    if (predictor_set == PredictorSet::icd_only || predictor_set == PredictorSet::structured_only ||
        predictor_set == PredictorSet::structured_plus_keywords) {
        std::vector<const PatientSummary*> train;
        std::vector<ObservationWindow> train_windows;
        for (auto i : cell.train_idx) {
            train.push_back(&study.patients[i].scan->summary);
            train_windows.push_back(windows[i]);
        }
        cell.structured = fit_structured_vocab(train, train_windows, cfg.icd_vocab_size,
                                               predictor_set != PredictorSet::icd_only);
        for (std::size_t i = 0; i < n; ++i) {
            if (windows[i].excluded) continue;
            auto s = structured_vector(study.patients[i].scan->summary, windows[i], *cell.structured);
            // Structured columns go first so keyword columns keep a contiguous block.
            s.insert(s.end(), rows[i].begin(), rows[i].end());
            rows[i] = std::move(s);
        }
        cell.columns = cell.structured->column_names();
        cell.keyword_offset = cell.structured->size();
    }
    if (cell.vocab) {
        const auto kw = vocab_column_names(*cell.vocab);
        cell.columns.insert(cell.columns.end(), kw.begin(), kw.end());
    }
    const std::size_t k = cell.columns.size();
    auto fill = [&](const std::vector<std::size_t>& idx, Matrix& x, std::vector<int>& y) {
        x = Matrix(idx.size(), k);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            std::copy(rows[idx[r]].begin(), rows[idx[r]].end(), x.row(r).begin());
            y.push_back(study.patients[idx[r]].label);
        }
    };
    fill(cell.train_idx, cell.x_train, cell.y_train);
    fill(cell.test_idx, cell.x_test, cell.y_test);
    return cell;
}

/// Checks that no test patient reached vocabulary selection or any fitted statistic.
inline nlohmann::json audit_cell(const Study& study, const CellData& cell) {
    std::unordered_set<std::string> test_ids;
    for (auto i : cell.test_idx) test_ids.insert(study.patients[i].id);
    std::size_t leaked = 0;
    if (cell.vocab) {
        for (const auto& id : cell.vocab->source_ids) leaked += test_ids.count(id);
        if (cell.vocab->source_ids.size() != cell.train_idx.size()) {
            throw DataError("audit: vocabulary fit on " + std::to_string(cell.vocab->source_ids.size()) +
                            " patients, training side has " + std::to_string(cell.train_idx.size()));
        }
    }
    std::set<std::size_t> groups_train, groups_test;
    for (auto i : cell.train_idx) groups_train.insert(study.patients[i].group);
    for (auto i : cell.test_idx) groups_test.insert(study.patients[i].group);
    if (leaked) throw DataError("audit: " + std::to_string(leaked) + " test patients used in vocabulary selection");
    return {{"clean_years", cell.clean_years},
            {"predictor_set", to_string(cell.predictor_set)},
            {"n_train", cell.train_idx.size()},
            {"n_test", cell.test_idx.size()},
            {"n_excluded_short_history", cell.excluded_idx.size()},
            {"n_features", cell.columns.size()},
            {"vocab_fit_patients", cell.vocab ? cell.vocab->source_ids.size() : cell.train_idx.size()},
            {"test_patients_in_vocab_fit", leaked},
            {"standardization_fit_rows", cell.train_idx.size()},
            {"calibration_fit_rows", cell.train_idx.size()},
            {"passed", true}};
}

struct Predictions {
    std::vector<double> proba;
    std::vector<double> rank;
};

inline Predictions predict_all(const Model& m, const Matrix& x) {
    Predictions p;
    p.proba.reserve(x.rows());
    p.rank.reserve(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        p.proba.push_back(m.predict_proba(x.row(r)));
        p.rank.push_back(m.rank_score(x.row(r)));
    }
    return p;
}

inline std::string model_label(ModelKind k, PredictorSet p) {
    return p == PredictorSet::keywords ? to_string(k) : std::string(to_string(k)) + "/" + to_string(p);
}

/// Subgroup label of a test patient, e.g. "sex=female".
inline std::string subgroup_label(const StudyPatient& p, SubgroupKind kind) {
    const auto& s = p.scan->summary;
    switch (kind) {
        case SubgroupKind::sex: return "sex=" + std::string(to_string(s.sex));
        case SubgroupKind::age_band: {
            const int age = s.age_at(p.origin);
            for (const auto& b : default_diagnosis_age_bands()) {
                if (age >= b.lo && age < b.hi) return "age=" + b.label;
            }
            return "age=other";
        }
        case SubgroupKind::race_ethnicity:
            if (s.ethnicity == Ethnicity::hispanic_or_latino) return "ethnicity=hispanic_or_latino";
            return "race=" + std::string(to_string(s.race));
    }
    return "?";
}

inline EvalReport evaluate_subset(const Predictions& pred, const std::vector<int>& y,
                                  const std::vector<std::size_t>& rows, const ExperimentConfig& cfg) {
    std::vector<double> proba, rank;
    std::vector<int> labels;
    for (auto r : rows) {
        proba.push_back(pred.proba[r]);
        rank.push_back(pred.rank[r]);
        labels.push_back(y[r]);
    }
    return evaluate(proba, rank, labels, 0.5, cfg.hl_groups, cfg.pr_method);
}

/// Per-ascertainment-path evaluation: each stratum's test cases plus all test controls.
inline std::vector<std::pair<std::string, EvalReport>> diagnosis_strata_eval(const Study& study, const CellData& cell,
                                                                            const Predictions& pred,
                                                                            const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, EvalReport>> out;
    for (auto path : {AscertainmentPath::single_dementia_clinic, AscertainmentPath::multi_with_specialty}) {
        std::vector<std::size_t> rows;
        std::size_t n_cases = 0;
        for (std::size_t r = 0; r < cell.test_idx.size(); ++r) {
            const auto& p = study.patients[cell.test_idx[r]];
            if (p.label == 0) {
                rows.push_back(r);
            } else if (p.path == path) {
                rows.push_back(r);
                ++n_cases;
            }
        }
        const std::string label = "dx=" + std::string(to_string(path));
        if (n_cases == 0) {
            spdlog::warn("diagnosis stratum {} has no test cases at clean_years={}, skipped", label, cell.clean_years);
            continue;
        }
        out.emplace_back(label, evaluate_subset(pred, cell.y_test, rows, cfg));
    }
    return out;
}

/// Trains model `m` on the training patients of one subgroup and scores that
/// subgroup's test rows. Throws DataError when the training slice has one class.
inline EvalReport retrained_subgroup_eval(const Study& study, const CellData& cell, SubgroupKind kind,
                                          const std::string& label, const std::vector<std::size_t>& test_rows,
                                          std::size_t m, const ExperimentConfig& cfg) {
    std::vector<std::size_t> train_rows;
    for (std::size_t r = 0; r < cell.train_idx.size(); ++r) {
        if (subgroup_label(study.patients[cell.train_idx[r]], kind) == label) train_rows.push_back(r);
    }
    Matrix x(train_rows.size(), cell.x_train.cols());
    std::vector<int> y;
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
        const auto src = cell.x_train.row(train_rows[i]);
        std::copy(src.begin(), src.end(), x.row(i).begin());
        y.push_back(cell.y_train[train_rows[i]]);
    }
    if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) {
        throw DataError("training slice has a single class");
    }
    TrainOptions opt = cfg.train;
    opt.lr.seed = opt.svm.seed = opt.rf.seed = derive_seed(cfg.seed, streams::model, m);
    const Model model = train_model(cfg.models[m], x, y, opt);
    return evaluate_subset(predict_all(model, cell.x_test), cell.y_test, test_rows, cfg);
}

struct ExperimentResult {
    std::vector<MetricsRow> metrics;
    std::optional<PairVocabulary> report_vocab;
    std::vector<std::string> report_columns;
    std::map<ModelKind, Model> report_models;
    std::optional<ImportanceSummary> importance;
    std::vector<TrendCurve> trends;
    nlohmann::json manifest;
};

/// Runs a pipeline stage, re-raising failures tagged with the stage name and exit code.
template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const ConfigError& e) {
        throw StageError(stage, e.what(), 1);
    } catch (const ArgumentError& e) {
        throw StageError(stage, e.what(), 1);
    } catch (const DataError& e) {
        throw StageError(stage, e.what(), 2);
    } catch (const MetricUndefined& e) {
        throw StageError(stage, e.what(), 3);
    }
}

inline std::vector<TrendCurve> compute_trends(const std::vector<CohortPair>& pairs, const ScanLookup& lookup,
                                              int sample_n, std::uint64_t seed) {
    std::vector<TrendCurve> out;
    for (auto norm : {TrendNormalization::raw, TrendNormalization::per_note}) {
        TrendOptions opt;
        opt.normalization = norm;
        opt.sample_n = sample_n;
        opt.seed = seed;
        out.push_back(trend_by_year(pairs, lookup, opt));
        auto bands = trend_by_age_group(pairs, lookup, default_diagnosis_age_bands(), opt);
        out.insert(out.end(), bands.begin(), bands.end());
    }
    TrendOptions pc;
    pc.note_filter = NoteFilter::only(NoteType::primary_care);
    auto curve = trend_by_year(pairs, lookup, pc);
    curve.stratum = "primary_care";
    out.push_back(curve);
    return out;
}

/// The full design: split, then for every (clean window, predictor set) cell build features,
/// train each model, evaluate on the test side (overall, subgroups, diagnosis strata), and
/// for the report cell keep the vocabulary, models, and LR attributions.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Study& study,
                                       const std::vector<CohortPair>& pairs, const ScanLookup& lookup,
                                       const Lexicon& lexicon, const CohortCriteria& criteria) {
    cfg.validate();
    ExperimentResult result;
    if (study.patients.empty()) throw StageError("split", "cohort is empty", 2);

    const SplitIds split = run_stage("split", [&] {
        return cfg.setting == Setting::random_split
                   ? split_setting1(study, cfg.split_fraction, cfg.seed)
                   : split_setting2(study, study_stations(study), cfg.holdout_station_count, cfg.seed);
    });
    const std::unordered_set<std::string> train_ids(split.train.begin(), split.train.end());
    std::vector<bool> is_train(study.patients.size());
    for (std::size_t i = 0; i < study.patients.size(); ++i) is_train[i] = train_ids.count(study.patients[i].id) != 0;
    if (split.test.empty()) throw StageError("split", "test set is empty", 2);

    nlohmann::json cells = nlohmann::json::array();
    for (int clean : cfg.clean_years) {
        for (auto pset : cfg.predictor_sets) {
            const CellData cell = run_stage("extract", [&] {
                return build_cell(study, is_train, clean, pset, cfg, lexicon, criteria);
            });
            cells.push_back(run_stage("audit", [&] { return audit_cell(study, cell); }));
            spdlog::info("cell clean_years={} predictors={}: {} train, {} test, {} features", clean, to_string(pset),
                         cell.train_idx.size(), cell.test_idx.size(), cell.columns.size());

            std::vector<Model> models(cfg.models.size());
            run_stage("train", [&] {
                parallel_for(models.size(), cfg.jobs, [&](std::size_t m) {
                    TrainOptions opt = cfg.train;
                    opt.lr.seed = opt.svm.seed = opt.rf.seed = derive_seed(cfg.seed, streams::model, m);
                    opt.rf.jobs = static_cast<int>(cfg.jobs);
                    models[m] = train_model(cfg.models[m], cell.x_train, cell.y_train, opt);
                });
                return 0;
            });
            const bool report_cell = clean == cfg.report_clean_years && pset == cfg.predictor_sets.front();
            run_stage("evaluate", [&] {
                for (std::size_t m = 0; m < models.size(); ++m) {
                    const auto pred = predict_all(models[m], cell.x_test);
                    const auto name = model_label(cfg.models[m], pset);
                    const std::string setting = to_string(cfg.setting);
                    std::vector<std::size_t> all(cell.test_idx.size());
                    std::iota(all.begin(), all.end(), std::size_t{0});
                    result.metrics.push_back({name, setting, clean, "all", evaluate_subset(pred, cell.y_test, all, cfg)});
                    for (auto kind : cfg.subgroups) {
                        std::map<std::string, std::vector<std::size_t>> slices;
                        for (std::size_t r = 0; r < cell.test_idx.size(); ++r) {
                            slices[subgroup_label(study.patients[cell.test_idx[r]], kind)].push_back(r);
                        }
                        for (const auto& [label, rows] : slices) {
                            try {
                                const auto rep = cfg.subgroup_retrain
                                                     ? retrained_subgroup_eval(study, cell, kind, label, rows, m, cfg)
                                                     : evaluate_subset(pred, cell.y_test, rows, cfg);
                                result.metrics.push_back({name, setting, clean, label, rep});
                            } catch (const DataError& e) {
                                spdlog::warn("subgroup {} skipped at clean_years={}: {}", label, clean, e.what());
                            }
                        }
                    }
                    if (cfg.diagnosis_strata) {
                        for (auto& [label, rep] : diagnosis_strata_eval(study, cell, pred, cfg)) {
                            result.metrics.push_back({name, setting, clean, label, rep});
                        }
                    }
                }
                return 0;
            });
            if (report_cell) {
                result.report_vocab = cell.vocab;
                result.report_columns = cell.columns;
                for (std::size_t m = 0; m < models.size(); ++m) result.report_models[cfg.models[m]] = models[m];
                const auto lr = std::find(cfg.models.begin(), cfg.models.end(), ModelKind::lr);
                if (cfg.explain && lr != cfg.models.end() && cell.vocab && pset == PredictorSet::keywords) {
                    run_stage("explain", [&] {
                        const auto& model = std::get<LinearModel>(models[lr - cfg.models.begin()].fit);
                        std::vector<Attribution> attributions(cell.x_test.rows());
                        parallel_for(attributions.size(), cfg.jobs, [&](std::size_t r) {
                            attributions[r] = linear_shap(model, cell.x_test.row(r), model.scaling.mean);
                            if (attribution_total(attributions[r]) != attributions[r].score) {
                                throw DataError("efficiency identity violated for test row " + std::to_string(r));
                            }
                        });
                        result.importance = group_importance(attributions, *cell.vocab, lexicon);
                        return 0;
                    });
                }
            }
        }
    }
    if (cfg.trends) {
        result.trends = run_stage("trends", [&] { return compute_trends(pairs, lookup, cfg.trends_sample_n, cfg.seed); });
    }

    std::size_t n_cases = 0;
    for (const auto& p : study.patients) n_cases += p.label;
    std::vector<std::string> models;
    for (auto m : cfg.models) models.push_back(to_string(m));
    std::vector<std::string> psets;
    for (auto p : cfg.predictor_sets) psets.push_back(to_string(p));
    result.manifest = {
        {"seed", cfg.seed},
        {"setting", to_string(cfg.setting)},
        {"split_fraction", cfg.split_fraction},
        {"holdout_station_count", cfg.holdout_station_count},
        {"clean_years", cfg.clean_years},
        {"report_clean_years", cfg.report_clean_years},
        {"models", models},
        {"predictor_sets", psets},
        {"vocab_size", cfg.vocab_size},
        {"study", {{"patients", study.patients.size()}, {"cases", n_cases}, {"matched_groups", study.n_groups}}},
        {"split", {{"train", split.train.size()}, {"test", split.test.size()}}},
        {"cells", cells},
        {"decisions",
         {"matched groups split whole under random_split",
          "shared controls belong to the first case that drew them",
          "vocabulary, standardization and calibration fit on training patients only",
          "ROC/PR computed on raw margins for svm and adaboost",
          fmt::format("HL test uses {} quantile groups, df = groups - 2", cfg.hl_groups),
          cfg.pr_method == PrAucMethod::average_precision ? "PR AUC is average precision"
                                                          : "PR AUC is the trapezoid under the PR curve",
          cfg.subgroup_retrain ? "subgroups retrained on their own training slice"
                               : "subgroups evaluated by slicing the test set of the global model",
          "Shapley values on the log-odds scale with training means as background"}},
    };
    return result;
}

/// A corpus reduced to what the analyses need: per-patient scans indexed by id.
struct ScannedCorpus {
    std::vector<ScannedPatient> patients;
    std::unordered_map<std::string, std::size_t> by_id;

    const ScannedPatient* find(const std::string& id) const {
        const auto it = by_id.find(id);
        return it == by_id.end() ? nullptr : &patients[it->second];
    }

    ScanLookup lookup() const {
        return [this](const std::string& id) { return find(id); };
    }

    std::vector<const PatientSummary*> summaries() const {
        std::vector<const PatientSummary*> out;
        out.reserve(patients.size());
        for (const auto& p : patients) out.push_back(&p.summary);
        return out;
    }
};

/// Scans every record delivered by `source` once, keeping only dated keyword hits.
inline ScannedCorpus scan_corpus(const std::function<void(const std::function<void(PatientRecord&&)>&)>& source,
                                 const KeywordMatcher& matcher) {
    ScannedCorpus c;
    source([&](PatientRecord&& p) {
        if (c.by_id.count(p.patient_id)) throw DataError("duplicate patient id " + p.patient_id);
        c.by_id.emplace(p.patient_id, c.patients.size());
        c.patients.push_back(scan_full(p, matcher));
    });
    return c;
}

}  // namespace adpredict

#endif  // ADPREDICT_EXPERIMENT_HPP
