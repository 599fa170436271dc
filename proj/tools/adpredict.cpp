// adpredict: command-line driver for the synthetic AD keyword-prediction pipeline.
//
//   adpredict generate --out run          # synthetic corpus -> run/corpus/*.jsonl
//   adpredict cohort   --out run          # cohort.csv, exclusions.csv
//   adpredict extract  --out run --clean-years 10
//   adpredict train    --out run          # models/model_<kind>.txt
//   adpredict evaluate --out run          # metrics.csv
//   adpredict explain  --out run          # importance.csv, group_importance_by_ageband.csv
//   adpredict trends   --out run          # trends.csv
//   adpredict sweep    --out run          # everything above for every configured cell
//   adpredict report   --out run          # report.md from the CSVs in run/
//
// Exit codes: 0 ok, 1 configuration error, 2 data error, 3 metric undefined.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "adpredict/adpredict.hpp"

namespace fs = std::filesystem;
using namespace adpredict;
using nlohmann::json;

namespace {

struct GlobalOptions {
    std::optional<fs::path> config;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    fs::path out = "run";
    std::optional<fs::path> corpus;
    std::string log_level = "info";
};

PipelineConfig load_config(const GlobalOptions& g) {
    auto cfg = PipelineConfig::load(g.config, g.overrides);
    if (g.seed) cfg.set_seed(*g.seed);
    if (g.jobs) cfg.set_jobs(*g.jobs);
    return cfg;
}

fs::path corpus_dir(const GlobalOptions& g) { return g.corpus ? *g.corpus : g.out / "corpus"; }

std::ifstream open_input(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    return in;
}

json read_json(const fs::path& p) {
    auto in = open_input(p);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(p.string() + ": " + e.what());
    }
}

std::vector<CohortPair> load_pairs(const GlobalOptions& g) {
    auto in = open_input(g.out / "cohort.csv");
    return read_cohort_csv(in);
}

ScannedCorpus load_scanned(const GlobalOptions& g, const PipelineConfig& cfg) {
    return run_stage("generate", [&] { return load_or_generate_corpus(cfg, corpus_dir(g)); });
}

// ---------------------------------------------------------------------------

int cmd_generate(const GlobalOptions& g) {
    const auto cfg = load_config(g);
    const auto dir = corpus_dir(g);
    const json info{{"seed", cfg.seed},
                    {"n_cases", cfg.corpus.n_cases},
                    {"n_controls", cfg.corpus.n_controls},
                    {"n_unconfirmed", cfg.corpus.n_unconfirmed},
                    {"history_years", {cfg.corpus.history_years_min, cfg.corpus.history_years_max}},
                    {"station_count", cfg.corpus.station_count},
                    {"baseline_rate", cfg.corpus.profile.baseline_rate},
                    {"peak_rate", cfg.corpus.profile.peak_rate},
                    {"ramp_start_years_before_index", cfg.corpus.profile.ramp_start_years_before_index}};
    std::size_t n = 0;
    run_stage("generate", [&] {
        CorpusWriter writer(dir, info);
        generate_corpus_streaming(cfg.corpus, cfg.seed, cfg.jobs, [&](PatientRecord&& p) {
            writer.write(p);
            ++n;
        });
        return 0;
    });
    spdlog::info("wrote {} patients to {}", n, dir.string());
    return 0;
}

int cmd_cohort(const GlobalOptions& g) {
    const auto cfg = load_config(g);
    const auto prepared = prepare_study(cfg, corpus_dir(g));
    write_file(g.out / "cohort.csv", [&](auto& o) { write_cohort_csv(o, prepared.cohort); });
    write_file(g.out / "exclusions.csv", [&](auto& o) { write_exclusions_csv(o, prepared.cohort); });
    std::size_t n_controls = 0;
    for (const auto& p : prepared.study.patients) n_controls += p.label == 0;
    spdlog::info("{} cases, {} distinct controls, {} exclusions", prepared.cohort.pairs.size(), n_controls,
                 prepared.cohort.exclusions.size());
    return 0;
}

struct ExtractOptions {
    std::optional<int> clean_years;
    std::optional<std::string> predictors;
};

int cmd_extract(const GlobalOptions& g, const ExtractOptions& x) {
    const auto cfg = load_config(g);
    const auto& ec = cfg.experiment;
    const int clean = x.clean_years.value_or(ec.report_clean_years);
    if (clean < 0 || clean > 10) throw ConfigError("--clean-years must be in [0,10]");
    const PredictorSet pset = x.predictors ? parse_predictor_set(*x.predictors) : ec.predictor_sets.front();

    const auto corpus = load_scanned(g, cfg);
    const auto pairs = fs::exists(g.out / "cohort.csv")
                           ? load_pairs(g)
                           : run_stage("cohort", [&] {
                                 return build_cohort(corpus.summaries(), cfg.criteria, cfg.seed, cfg.jobs).pairs;
                             });
    const auto study = run_stage("cohort", [&] { return assemble_study(pairs, corpus.lookup()); });
    const SplitIds split = run_stage("split", [&] {
        return ec.setting == Setting::random_split
                   ? split_setting1(study, ec.split_fraction, ec.seed)
                   : split_setting2(study, study_stations(study), ec.holdout_station_count, ec.seed);
    });
    const std::unordered_set<std::string> train_ids(split.train.begin(), split.train.end());
    std::vector<bool> is_train(study.patients.size());
    for (std::size_t i = 0; i < study.patients.size(); ++i) is_train[i] = train_ids.count(study.patients[i].id) != 0;

    const auto cell = run_stage("extract", [&] {
        return build_cell(study, is_train, clean, pset, ec, cfg.corpus.lexicon, cfg.criteria);
    });
    const auto audit = run_stage("audit", [&] { return audit_cell(study, cell); });

    std::vector<FeatureVector> rows;
    std::vector<int> labels;
    auto add_rows = [&](const std::vector<std::size_t>& idx, const Matrix& m, const std::vector<int>& y) {
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const auto row = m.row(r);
            rows.push_back({study.patients[idx[r]].id, {row.begin(), row.end()}, {}});
            labels.push_back(y[r]);
        }
    };
    add_rows(cell.train_idx, cell.x_train, cell.y_train);
    add_rows(cell.test_idx, cell.x_test, cell.y_test);

    write_file(g.out / "features.csv", [&](auto& o) { write_features_csv(o, cell.columns, rows, labels); });
    write_file(g.out / "split.csv", [&](auto& o) {
        o << "patient_id,split,stratum\n";
        for (const auto& [idx, side] : {std::pair{&cell.train_idx, "train"}, std::pair{&cell.test_idx, "test"}}) {
            for (auto i : *idx) {
                const auto& p = study.patients[i];
                o << p.id << ',' << side << ',' << (p.label ? std::string(to_string(p.path)) : "control") << '\n';
            }
        }
    });
    if (cell.vocab) write_file(g.out / "vocab.csv", [&](auto& o) { write_vocab_csv(o, *cell.vocab); });
    json meta{{"clean_years", clean},
              {"predictor_set", to_string(pset)},
              {"setting", to_string(ec.setting)},
              {"keyword_offset", cell.keyword_offset},
              {"n_vocab_train", cell.vocab ? cell.vocab->n_train : 0},
              {"audit", audit}};
    write_file(g.out / "extract.json", [&](auto& o) { o << meta.dump(2) << '\n'; });
    spdlog::info("extracted {} train / {} test rows, {} columns ({} excluded for short history)", cell.train_idx.size(),
                 cell.test_idx.size(), cell.columns.size(), cell.excluded_idx.size());
    return 0;
}

/// features.csv joined with split.csv.
struct ExtractedData {
    FeatureTable table;
    std::vector<std::string> side;     // "train" / "test" per row
    std::vector<std::string> stratum;  // ascertainment path or "control"
    json meta;

    std::pair<Matrix, std::vector<int>> rows_of(const std::string& which) const {
        std::vector<std::size_t> idx;
        for (std::size_t r = 0; r < side.size(); ++r) {
            if (side[r] == which) idx.push_back(r);
        }
        Matrix m(idx.size(), table.columns.size());
        std::vector<int> y;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::copy(table.rows[idx[i]].begin(), table.rows[idx[i]].end(), m.row(i).begin());
            y.push_back(table.labels[idx[i]]);
        }
        return {std::move(m), std::move(y)};
    }

    std::vector<std::string> strata_of(const std::string& which) const {
        std::vector<std::string> out;
        for (std::size_t r = 0; r < side.size(); ++r) {
            if (side[r] == which) out.push_back(stratum[r]);
        }
        return out;
    }
};

ExtractedData load_extracted(const GlobalOptions& g) {
    ExtractedData d;
    d.meta = read_json(g.out / "extract.json");
    {
        auto in = open_input(g.out / "features.csv");
        d.table = read_features_csv(in);
    }
    auto in = open_input(g.out / "split.csv");
    std::string line;
    std::getline(in, line);
    if (line != "patient_id,split,stratum") throw DataError("split.csv: bad header");
    std::unordered_map<std::string, std::pair<std::string, std::string>> by_id;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cols = detail::split(line, ',');
        if (cols.size() != 3) throw DataError("split.csv: expected 3 columns");
        by_id[cols[0]] = {cols[1], cols[2]};
    }
    for (const auto& id : d.table.patient_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("split.csv: no entry for " + id);
        d.side.push_back(it->second.first);
        d.stratum.push_back(it->second.second);
    }
    return d;
}

fs::path model_path(const GlobalOptions& g, ModelKind k) {
    return g.out / "models" / fmt::format("model_{}.txt", to_string(k));
}

int cmd_train(const GlobalOptions& g, const std::vector<std::string>& model_names) {
    const auto cfg = load_config(g);
    std::vector<ModelKind> kinds = cfg.experiment.models;
    if (!model_names.empty()) {
        kinds.clear();
        for (const auto& m : model_names) kinds.push_back(parse_model_kind(m));
    }
    const auto data = load_extracted(g);
    const auto [x, y] = data.rows_of("train");
    for (auto kind : kinds) {
        // Seed by position in the configured model list, as the sweep does.
        const auto pos = std::find(cfg.experiment.models.begin(), cfg.experiment.models.end(), kind);
        const auto m = static_cast<std::size_t>(pos - cfg.experiment.models.begin());
        TrainOptions opt = cfg.experiment.train;
        opt.lr.seed = opt.svm.seed = opt.rf.seed = derive_seed(cfg.seed, streams::model, m);
        opt.rf.jobs = static_cast<int>(cfg.jobs);
        const auto t0 = std::chrono::steady_clock::now();
        const Model model = run_stage("train", [&] { return train_model(kind, x, y, opt); });
        write_file(model_path(g, kind), [&](auto& o) { save_model(o, model); });
        spdlog::info("trained {} on {} rows in {:.1f}s", to_string(kind), x.rows(),
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return 0;
}

Model read_model(const GlobalOptions& g, ModelKind k) {
    auto in = open_input(model_path(g, k));
    return load_model(in);
}

int cmd_evaluate(const GlobalOptions& g) {
    const auto cfg = load_config(g);
    const auto data = load_extracted(g);
    const auto [x, y] = data.rows_of("test");
    const auto strata = data.strata_of("test");
    const int clean = data.meta.at("clean_years").get<int>();
    const auto pset = parse_predictor_set(data.meta.at("predictor_set").get<std::string>());
    const std::string setting = data.meta.at("setting").get<std::string>();

    std::vector<MetricsRow> rows;
    for (auto kind : cfg.experiment.models) {
        if (!fs::exists(model_path(g, kind))) {
            spdlog::warn("no saved {} model, skipped", to_string(kind));
            continue;
        }
        const auto model = run_stage("evaluate", [&] { return read_model(g, kind); });
        const auto pred = predict_all(model, x);
        const auto name = model_label(kind, pset);
        std::vector<std::size_t> all(y.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        rows.push_back({name, setting, clean, "all", evaluate_subset(pred, y, all, cfg.experiment)});
        if (!cfg.experiment.diagnosis_strata) continue;
        for (auto path : {AscertainmentPath::single_dementia_clinic, AscertainmentPath::multi_with_specialty}) {
            std::vector<std::size_t> idx;
            bool any_case = false;
            for (std::size_t r = 0; r < y.size(); ++r) {
                if (strata[r] == "control") {
                    idx.push_back(r);
                } else if (strata[r] == to_string(path)) {
                    idx.push_back(r);
                    any_case = true;
                }
            }
            if (!any_case) {
                spdlog::warn("diagnosis stratum {} has no test cases, skipped", to_string(path));
                continue;
            }
            rows.push_back({name, setting, clean, "dx=" + std::string(to_string(path)),
                            evaluate_subset(pred, y, idx, cfg.experiment)});
        }
    }
    if (rows.empty()) throw DataError("no models to evaluate (run `adpredict train` first)");
    write_file(g.out / "metrics.csv", [&](auto& o) {
        write_metrics_header(o);
        for (const auto& r : rows) write_metrics_row(o, r);
    });
    for (const auto& r : rows) {
        if (r.subgroup != "all") continue;
        spdlog::info("{}: roc_auc {:.4f} f1_case {:.4f} accuracy {:.4f}", r.model, r.report.roc_auc,
                     r.report.case_class.f1, r.report.accuracy);
    }
    return 0;
}

int cmd_explain(const GlobalOptions& g) {
    const auto cfg = load_config(g);
    const auto data = load_extracted(g);
    const auto offset = data.meta.at("keyword_offset").get<std::size_t>();
    const int n_train = data.meta.at("n_vocab_train").get<int>();
    if (!fs::exists(g.out / "vocab.csv")) throw DataError("explain needs a keyword predictor set (no vocab.csv)");
    auto vin = open_input(g.out / "vocab.csv");
    const auto vocab = read_vocab_csv(vin, cfg.corpus.lexicon, n_train);
    const auto model = read_model(g, ModelKind::lr);
    const auto* lm = std::get_if<LinearModel>(&model.fit);
    if (!lm) throw DataError("model_lr.txt does not hold a linear model");
    const auto [x, y] = data.rows_of("test");
    if (offset + vocab.size() != x.cols()) throw DataError("vocab.csv does not match features.csv columns");

    std::vector<Attribution> attributions(x.rows());
    run_stage("explain", [&] {
        parallel_for(x.rows(), cfg.jobs, [&](std::size_t r) {
            auto a = linear_shap(*lm, x.row(r), lm->scaling.mean);
            if (attribution_total(a) != a.score) throw DataError("efficiency identity violated");
            // Structured columns, if any, are dropped from the keyword summary.
            a.per_feature.erase(a.per_feature.begin(), a.per_feature.begin() + static_cast<std::ptrdiff_t>(offset));
            attributions[r] = std::move(a);
        });
        return 0;
    });
    const auto summary = group_importance(attributions, vocab, cfg.corpus.lexicon);
    write_file(g.out / "importance.csv", [&](auto& o) { write_importance_csv(o, summary); });
    write_file(g.out / "group_importance_by_ageband.csv", [&](auto& o) { write_group_importance_csv(o, summary); });
    for (std::size_t i = 0; i < std::min<std::size_t>(5, summary.features.size()); ++i) {
        const auto& f = summary.features[i];
        spdlog::info("#{} {}@{} ({}) mean|phi| {:.4f}", f.rank, f.keyword, f.age, to_string(f.group), f.mean_abs_phi);
    }
    return 0;
}

int cmd_trends(const GlobalOptions& g) {
    const auto cfg = load_config(g);
    const auto corpus = load_scanned(g, cfg);
    const auto pairs = fs::exists(g.out / "cohort.csv")
                           ? load_pairs(g)
                           : run_stage("cohort", [&] {
                                 return build_cohort(corpus.summaries(), cfg.criteria, cfg.seed, cfg.jobs).pairs;
                             });
    const auto curves = run_stage(
        "trends", [&] { return compute_trends(pairs, corpus.lookup(), cfg.experiment.trends_sample_n, cfg.seed); });
    write_file(g.out / "trends.csv", [&](auto& o) {
        write_trends_header(o);
        for (const auto& c : curves) write_trend_rows(o, c);
    });
    return 0;
}

int cmd_sweep(const GlobalOptions& g) {
    const auto cfg = load_config(g);
    std::optional<fs::path> dir;
    if (g.corpus || fs::exists(g.out / "corpus" / "patients.jsonl")) dir = corpus_dir(g);
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = run_pipeline(cfg, dir, g.out);
    spdlog::info("sweep finished in {:.1f}s, {} metric rows written to {}",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), result.metrics.size(),
                 (g.out / "metrics.csv").string());
    return 0;
}

// --- report ----------------------------------------------------------------

std::vector<std::map<std::string, std::string>> read_csv_rows(const fs::path& p) {
    auto in = open_input(p);
    std::string line;
    if (!std::getline(in, line)) throw DataError(p.string() + ": empty");
    const auto header = detail::split(line, ',');
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cols = detail::split(line, ',');
        if (cols.size() != header.size()) throw DataError(p.string() + ": column count mismatch");
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < cols.size(); ++i) row[header[i]] = cols[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string short_num(const std::string& s, int digits = 3) {
    if (s == "NA") return s;
    return fmt::format("{:.{}f}", std::stod(s), digits);
}

int cmd_report(const GlobalOptions& g) {
    const auto metrics = read_csv_rows(g.out / "metrics.csv");
    if (metrics.empty()) throw DataError("metrics.csv has no rows");
    int report_clean = 0;
    for (const auto& r : metrics) report_clean = std::max(report_clean, std::stoi(r.at("clean_years")));

    std::ostringstream md;
    md << "# Prediction report\n\n";
    md << fmt::format("## Test-set results, clean window {} years\n\n", report_clean);
    md << "| Model | Subgroup | Precision (case) | Recall (case) | F1 (case) | Precision (ctrl) | Recall (ctrl) "
          "| F1 (ctrl) | Accuracy | PR AUC | ROC AUC | HL stat | HL p |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : metrics) {
        if (std::stoi(r.at("clean_years")) != report_clean) continue;
        md << "| " << r.at("model") << " | " << r.at("subgroup");
        for (const char* k : {"precision_case", "recall_case", "f1_case", "precision_ctrl", "recall_ctrl", "f1_ctrl",
                              "accuracy", "pr_auc", "roc_auc", "hl_stat", "hl_p"}) {
            md << " | " << short_num(r.at(k), std::string(k) == "hl_stat" ? 2 : 3);
        }
        md << " |\n";
    }

    // Case F1 by clean window, one column per model.
    std::vector<std::string> models;
    std::map<std::string, std::map<int, std::string>> f1;
    std::set<int> cleans;
    for (const auto& r : metrics) {
        if (r.at("subgroup") != "all") continue;
        const auto& m = r.at("model");
        if (std::find(models.begin(), models.end(), m) == models.end()) models.push_back(m);
        const int c = std::stoi(r.at("clean_years"));
        cleans.insert(c);
        f1[m][c] = r.at("f1_case") + " / " + r.at("roc_auc");
    }
    if (cleans.size() > 1) {
        md << "\n## Case F1 / ROC AUC by clean window\n\n| Clean years";
        for (const auto& m : models) md << " | " << m;
        md << " |\n|---";
        for (std::size_t i = 0; i < models.size(); ++i) md << "|---";
        md << "|\n";
        for (int c : cleans) {
            md << "| " << c;
            for (const auto& m : models) {
                const auto it = f1[m].find(c);
                if (it == f1[m].end()) {
                    md << " | ";
                    continue;
                }
                const auto slash = it->second.find(" / ");
                md << " | " << short_num(it->second.substr(0, slash)) << " / "
                   << short_num(it->second.substr(slash + 3));
            }
            md << " |\n";
        }
    }

    if (fs::exists(g.out / "trends.csv")) {
        md << "\n## Keyword hits per patient-year before the index date\n\n";
        md << "| Offset | Case mean | Control mean | Ratio |\n|---|---|---|---|\n";
        for (const auto& r : read_csv_rows(g.out / "trends.csv")) {
            if (r.at("normalization") != "raw" || r.at("stratum") != "all") continue;
            const auto& cm = r.at("case_mean");
            const auto& km = r.at("control_mean");
            const std::string ratio =
                cm == "NA" || km == "NA" ? "NA" : fmt::format("{:.2f}", std::stod(cm) / std::stod(km));
            md << "| " << r.at("offset_or_age") << " | " << short_num(cm, 2) << " | " << short_num(km, 2) << " | "
               << ratio << " |\n";
        }
    }
    if (fs::exists(g.out / "group_importance_by_ageband.csv")) {
        md << "\n## Keyword-group importance (mean |Shapley|, log-odds)\n\n";
        md << "| Age band | Rank | Group | Importance | Share |\n|---|---|---|---|---|\n";
        for (const auto& r : read_csv_rows(g.out / "group_importance_by_ageband.csv")) {
            if (std::stoi(r.at("rank")) > 3) continue;
            md << "| " << r.at("age_band") << " | " << r.at("rank") << " | " << r.at("group") << " | "
               << short_num(r.at("mean_abs_phi"), 4) << " | " << short_num(r.at("share"), 3) << " |\n";
        }
    }
    write_file(g.out / "report.md", [&](auto& o) { o << md.str(); });
    std::cout << md.str();
    return 0;
}

int exit_code_for(const std::exception& e) {
    if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->exit_code();
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e)) return 1;
    if (dynamic_cast<const MetricUndefined*>(&e)) return 3;
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic EHR keyword pipeline for early Alzheimer's disease prediction"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    std::string config_path, out_path = "run", corpus_path;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    auto* opt_config = app.add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", g.overrides, "override one config key, e.g. --set corpus.n_cases=200")->take_all();
    auto* opt_seed = app.add_option("--seed", seed, "master seed (overrides run.seed)");
    auto* opt_jobs = app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out_path, "run directory for inputs and outputs")->capture_default_str();
    auto* opt_corpus = app.add_option("--corpus", corpus_path, "corpus directory (default <out>/corpus)");
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")->capture_default_str();

    app.add_subcommand("generate", "write a synthetic corpus as JSON Lines");
    app.add_subcommand("cohort", "ascertain cases, match controls, write cohort.csv");
    auto* extract = app.add_subcommand("extract", "build features for one clean window");
    ExtractOptions xo;
    extract->add_option("--clean-years", xo.clean_years, "clean window length in years (0-10)");
    extract->add_option("--predictors", xo.predictors,
                        "keywords, icd_only, structured_only, structured_plus_keywords, "
                        "keywords_no_cognitive_tests, primary_care_notes_only");
    auto* train = app.add_subcommand("train", "train models on the extracted training rows");
    std::vector<std::string> train_models;
    train->add_option("--model", train_models, "lr, svm, adaboost, rf (default: config list)");
    app.add_subcommand("evaluate", "score saved models on the extracted test rows");
    app.add_subcommand("explain", "Shapley importance of the saved LR model");
    app.add_subcommand("trends", "keyword trajectories before the index date");
    app.add_subcommand("sweep", "full design: every clean window, predictor set and model");
    app.add_subcommand("report", "summarize CSVs in the run directory as report.md");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    auto logger = spdlog::stderr_color_mt("adpredict");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_level(spdlog::level::from_str(g.log_level));

    if (*opt_config) g.config = config_path;
    if (*opt_seed) g.seed = seed;
    if (*opt_jobs) g.jobs = jobs;
    if (*opt_corpus) g.corpus = corpus_path;
    g.out = out_path;

    try {
        const auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "generate") return cmd_generate(g);
        if (name == "cohort") return cmd_cohort(g);
        if (name == "extract") return cmd_extract(g, xo);
        if (name == "train") return cmd_train(g, train_models);
        if (name == "evaluate") return cmd_evaluate(g);
        if (name == "explain") return cmd_explain(g);
        if (name == "trends") return cmd_trends(g);
        if (name == "sweep") return cmd_sweep(g);
        if (name == "report") return cmd_report(g);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return exit_code_for(e);
    }
    return 1;
}
