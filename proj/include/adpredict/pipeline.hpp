#ifndef ADPREDICT_PIPELINE_HPP
#define ADPREDICT_PIPELINE_HPP

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "adpredict/cohort.hpp"
#include "adpredict/corpus.hpp"
#include "adpredict/corpus_io.hpp"
#include "adpredict/error.hpp"
#include "adpredict/experiment.hpp"
#include "adpredict/kv_config.hpp"
#include "adpredict/matcher.hpp"

namespace adpredict {

/// Every knob of an end-to-end run, read from one key=value file.
struct PipelineConfig {
    CorpusConfig corpus;
    CohortCriteria criteria;
    ExperimentConfig experiment;
    std::uint64_t seed = 42;
    unsigned jobs = 1;

    void set_seed(std::uint64_t s) {
        seed = s;
        experiment.seed = s;
    }

    void set_jobs(unsigned j) {
        jobs = std::max(1u, j);
        experiment.jobs = jobs;
    }

    static PipelineConfig from_kv(const KeyValueConfig& kv) {
        PipelineConfig c;
        c.corpus = CorpusConfig::from_kv(kv);
        c.criteria = CohortCriteria::from_kv(kv);
        c.experiment = ExperimentConfig::from_kv(kv);
        const auto seed = kv.get_int("run.seed", static_cast<long long>(c.seed));
        if (seed < 0) throw ConfigError("run.seed must be >= 0");
        c.set_seed(static_cast<std::uint64_t>(seed));
        const auto jobs = kv.get_int("run.jobs", 1);
        if (jobs < 1) throw ConfigError("run.jobs must be >= 1");
        c.set_jobs(static_cast<unsigned>(jobs));
        for (const auto& k : kv.unused_keys()) spdlog::warn("config: unknown key '{}' ignored", k);
        return c;
    }

    /// Config file (optional) with `key=value` overrides applied on top.
    static PipelineConfig load(const std::optional<std::filesystem::path>& path,
                               const std::vector<std::string>& overrides = {}) {
        return from_kv(load_kv(path, overrides));
    }

    static KeyValueConfig load_kv(const std::optional<std::filesystem::path>& path,
                                  const std::vector<std::string>& overrides) {
        KeyValueConfig kv = path ? KeyValueConfig::load(path->string()) : KeyValueConfig{};
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "': expected key=value");
            kv.set(std::string(detail::trim(o.substr(0, eq))), std::string(detail::trim(o.substr(eq + 1))));
        }
        return kv;
    }
};

/// Scanned corpus plus the matched cohort and analysis units built from it.
struct PreparedStudy {
    ScannedCorpus corpus;
    Cohort cohort;
    Study study;
};

/// Reads the corpus from `corpus_dir` when given, otherwise generates it in memory.
inline ScannedCorpus load_or_generate_corpus(const PipelineConfig& cfg,
                                             const std::optional<std::filesystem::path>& corpus_dir) {
    const auto matcher = compile_matcher(cfg.corpus.lexicon);
    if (corpus_dir) {
        if (!std::filesystem::exists(*corpus_dir / "patients.jsonl")) {
            throw DataError("no corpus at " + corpus_dir->string() + " (run `adpredict generate` first)");
        }
        spdlog::info("reading corpus from {}", corpus_dir->string());
        return scan_corpus([&](const auto& sink) { read_corpus_streaming(*corpus_dir, sink); }, matcher);
    }
    spdlog::info("generating corpus in memory: {} cases, {} controls", cfg.corpus.n_cases, cfg.corpus.n_controls);
    return scan_corpus([&](const auto& sink) { generate_corpus_streaming(cfg.corpus, cfg.seed, cfg.jobs, sink); },
                       matcher);
}

inline PreparedStudy prepare_study(const PipelineConfig& cfg, const std::optional<std::filesystem::path>& corpus_dir) {
    PreparedStudy s;
    s.corpus = run_stage("generate", [&] { return load_or_generate_corpus(cfg, corpus_dir); });
    s.cohort = run_stage("cohort", [&] { return build_cohort(s.corpus.summaries(), cfg.criteria, cfg.seed, cfg.jobs); });
    spdlog::info("cohort: {} matched groups, {} partial matches, {} exclusions", s.cohort.pairs.size(),
                 s.cohort.partial_matches, s.cohort.exclusions.size());
    s.study = run_stage("cohort", [&] { return assemble_study(s.cohort.pairs, s.corpus.lookup()); });
    return s;
}

inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    body(out);
    if (!out) throw DataError("write failed: " + path.string());
}

/// Writes every artifact of a finished experiment under `out`.
inline void write_run_outputs(const ExperimentResult& r, const PreparedStudy& s, const std::filesystem::path& out) {
    write_file(out / "cohort.csv", [&](auto& o) { write_cohort_csv(o, s.cohort); });
    write_file(out / "exclusions.csv", [&](auto& o) { write_exclusions_csv(o, s.cohort); });
    write_file(out / "metrics.csv", [&](auto& o) {
        write_metrics_header(o);
        for (const auto& row : r.metrics) write_metrics_row(o, row);
    });
    if (r.report_vocab) write_file(out / "vocab.csv", [&](auto& o) { write_vocab_csv(o, *r.report_vocab); });
    if (r.importance) {
        write_file(out / "importance.csv", [&](auto& o) { write_importance_csv(o, *r.importance); });
        write_file(out / "group_importance_by_ageband.csv",
                   [&](auto& o) { write_group_importance_csv(o, *r.importance); });
    }
    if (!r.trends.empty()) {
        write_file(out / "trends.csv", [&](auto& o) {
            write_trends_header(o);
            for (const auto& c : r.trends) write_trend_rows(o, c);
        });
    }
    for (const auto& [kind, model] : r.report_models) {
        write_file(out / "models" / fmt::format("model_{}.txt", to_string(kind)), [&](auto& o) { save_model(o, model); });
    }
    write_file(out / "manifest.json", [&](auto& o) { o << r.manifest.dump(2) << '\n'; });
}

/// Corpus -> cohort -> sweep -> files. Returns the in-memory result as well.
inline ExperimentResult run_pipeline(const PipelineConfig& cfg, const std::optional<std::filesystem::path>& corpus_dir,
                                     const std::filesystem::path& out) {
    const auto prepared = prepare_study(cfg, corpus_dir);
    auto result = run_experiment(cfg.experiment, prepared.study, prepared.cohort.pairs, prepared.corpus.lookup(),
                                 cfg.corpus.lexicon, cfg.criteria);
    result.manifest["cohort"] = {{"matched_groups", prepared.cohort.pairs.size()},
                                 {"partial_matches", prepared.cohort.partial_matches},
                                 {"exclusions", prepared.cohort.exclusions.size()}};
    result.manifest["corpus"] = {{"source", corpus_dir ? corpus_dir->string() : std::string("generated")},
                                 {"patients", prepared.corpus.patients.size()}};
    run_stage("report", [&] {
        write_run_outputs(result, prepared, out);
        return 0;
    });
    return result;
}

}  // namespace adpredict

#endif  // ADPREDICT_PIPELINE_HPP
