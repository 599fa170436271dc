// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any fail.
// Tolerances are fixed here, not read from config.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "adpredict/adaboost.hpp"
#include "adpredict/explain.hpp"
#include "adpredict/linear_model.hpp"
#include "adpredict/metrics.hpp"
#include "adpredict/pipeline.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace adpredict;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Tolerances.
constexpr double kPrTol = 1e-12;
constexpr double kCriterion1Seconds = 5.0;
constexpr double kChiTarget = 0.05, kChiTol = 5e-4;
constexpr double kHlPerfectStat = 1e-12, kHlPerfectP = 1e-9, kHlAlpha = 0.05;
constexpr double kGradRel = 1e-6;
constexpr double kShapTol = 1e-10;
constexpr double kRocMin = 0.95, kF1Min = 0.85, kIcdRocMax = 0.6, kRunSeconds = 600.0;
constexpr double kControlMean = 10.0, kControlBand = 2.0, kCaseRatio = 4.0, kEarlyRel = 0.10;
constexpr double kF1Noise = 0.03;

Outcome criterion1() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    testgen::Rng rng(101);
    int roc_mismatch = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = testgen::uniform_int(rng, 2, 50);
        const auto y = testgen::random_labels(rng, n, testgen::uniform_real(rng, 0.1, 0.9));
        const auto s = testgen::tied_scores(rng, n, testgen::uniform_int(rng, 1, 10));
        roc_mismatch += roc_auc(s, y) != oracle::roc_auc(s, y);
    }
    double pr_worst = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = testgen::uniform_int(rng, 2, 50);
        const auto y = testgen::random_labels(rng, n, testgen::uniform_real(rng, 0.1, 0.9));
        const auto s = testgen::tied_scores(rng, n, testgen::uniform_int(rng, 1, 10));
        pr_worst = std::max(pr_worst, std::abs(pr_auc(s, y) - oracle::average_precision(s, y)));
    }
    const double secs = seconds_since(t0);
    o.require(roc_mismatch == 0, fmt::format("{} ROC instances differ from all-pairs count", roc_mismatch));
    o.require(pr_worst <= kPrTol, fmt::format("PR max error {:.3g} > {:.0e}", pr_worst, kPrTol));
    o.require(secs < kCriterion1Seconds, fmt::format("runtime {:.2f}s", secs));
    o.note(fmt::format("ROC 200/200 exact, PR max err {:.2g}, {:.2f}s", pr_worst, secs));
    return o;
}

// Lower incomplete gamma by its power series, P(a, x) = e^-x x^a sum x^n / Gamma(a + n + 1).
double chi_square_sf_series(double x, double df) {
    const double a = df / 2, h = x / 2;
    double term = 1.0 / std::tgamma(a + 1), sum = term;
    for (int n = 1; n < 500; ++n) {
        term *= h / (a + n);
        sum += term;
    }
    return 1.0 - std::exp(-h + a * std::log(h)) * sum;
}

Outcome criterion2() {
    Outcome o;
    const double sf = chi_square_sf(7.815, 3), series = chi_square_sf_series(7.815, 3);
    o.require(std::abs(sf - kChiTarget) <= kChiTol, fmt::format("sf(7.815,3) = {:.6f}", sf));
    o.require(std::abs(series - kChiTarget) <= kChiTol, fmt::format("series oracle = {:.6f}", series));
    o.require(std::abs(sf - series) <= 1e-10, fmt::format("library vs series differ by {:.3g}", sf - series));

    std::vector<double> p;
    std::vector<int> y;
    for (int g = 1; g <= 5; ++g) {
        for (int i = 0; i < 20; ++i) {
            p.push_back(g / 10.0);
            y.push_back(i < 2 * g ? 1 : 0);
        }
    }
    const auto perfect = hosmer_lemeshow(p, y);
    o.require(perfect.statistic <= kHlPerfectStat && std::abs(perfect.p_value - 1) <= kHlPerfectP,
              fmt::format("perfect calibration gave HL {:.3g}, p {:.6f}", perfect.statistic, perfect.p_value));

    // Logistic data, LR fit, calibration on the fitted probabilities.
    testgen::Rng rng(202);
    const std::size_t n = 4000;
    const auto x = testgen::random_matrix(rng, n, 4, -2, 2);
    const std::vector<double> w{1.2, -0.8, 0.5, 0.0};
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = -0.3;
        for (std::size_t j = 0; j < 4; ++j) s += w[j] * x(i, j);
        labels[i] = testgen::coin(rng, 1 / (1 + std::exp(-s))) ? 1 : 0;
    }
    const auto m = train_lr(x, labels);
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) probs[i] = m.predict_proba(x.row(i));
    const auto hl = hosmer_lemeshow(probs, labels);
    o.require(hl.p_value > kHlAlpha, fmt::format("LR HL p = {:.4f}", hl.p_value));
    o.note(fmt::format("sf={:.6f} series={:.6f}; perfect HL={:.1g} p={:.4f}; LR HL p={:.3f}", sf, series,
                       perfect.statistic, perfect.p_value, hl.p_value));
    return o;
}

Outcome criterion3() {
    Outcome o;
    testgen::Rng rng(303);
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = testgen::uniform_int(rng, 5, 40), k = testgen::uniform_int(rng, 1, 8);
        const auto x = testgen::random_matrix(rng, n, k);
        const auto y = testgen::random_labels(rng, n);
        const LogisticObjective obj(x, y, testgen::uniform_real(rng, 0, 0.5), Standardizer::fit(x));
        std::vector<double> theta(k + 1), g;
        for (auto& v : theta) v = testgen::uniform_real(rng, -1.5, 1.5);
        obj.value_and_gradient(theta, g);
        double diff = 0, gmax = 0;
        for (std::size_t j = 0; j <= k; ++j) {
            const double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
            auto a = theta, b = theta;
            a[j] += h;
            b[j] -= h;
            diff = std::max(diff, std::abs((obj.value(a) - obj.value(b)) / (2 * h) - g[j]));
            gmax = std::max(gmax, std::abs(g[j]));
        }
        worst = std::max(worst, diff / std::max(gmax, 1e-8));
    }
    o.require(worst <= kGradRel, fmt::format("gradient relative error {:.3g}", worst));

    int loss_up = 0, weak = 0, rounds = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = testgen::uniform_int(rng, 20, 200), k = testgen::uniform_int(rng, 1, 8);
        const auto x = testgen::random_matrix(rng, n, k);
        const auto y = testgen::random_labels(rng, n);
        const auto m = train_adaboost(x, y, 50);
        double prev = static_cast<double>(n);
        for (std::size_t r = 0; r < m.stumps.size(); ++r, ++rounds) {
            loss_up += m.exp_loss_trace[r] > prev * (1 + 1e-12);
            weak += !(m.stumps[r].weighted_error < 0.5);
            prev = m.exp_loss_trace[r];
        }
    }
    o.require(loss_up == 0, fmt::format("exp loss rose in {} rounds", loss_up));
    o.require(weak == 0, fmt::format("{} stumps with error >= 0.5", weak));
    o.note(fmt::format("grad rel err {:.2g}; {} boosting rounds checked", worst, rounds));
    return o;
}

Outcome criterion4() {
    Outcome o;
    testgen::Rng rng(404);
    double worst = 0;
    long efficiency_breaks = 0, attributions = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t k = testgen::uniform_int(rng, 1, 10);
        const auto x = testgen::random_counts(rng, 60, k);
        const auto y = testgen::random_labels(rng, 60);
        const auto m = train_lr(x, y);
        std::vector<double> bg(k);
        for (auto& v : bg) v = testgen::uniform_real(rng, 0, 3);
        const auto row = x.row(testgen::uniform_int(rng, 0, 59));
        const auto a = linear_shap(m, row, bg);
        const auto brute = exact_shap_bruteforce([&](std::span<const double> v) { return m.score(v); }, row, bg);
        for (std::size_t j = 0; j < k; ++j) worst = std::max(worst, std::abs(a.per_feature[j] - brute[j]));
        // Emitted attributions use the training means as background.
        for (std::size_t r = 0; r < x.rows(); ++r, ++attributions) {
            const auto e = linear_shap(m, x.row(r), m.scaling.mean);
            efficiency_breaks += attribution_total(e) != m.score(x.row(r));
        }
    }
    o.require(worst <= kShapTol, fmt::format("linear vs brute-force max diff {:.3g}", worst));
    o.require(efficiency_breaks == 0, fmt::format("{} attributions break efficiency", efficiency_breaks));
    o.note(fmt::format("max |phi - phi_exact| = {:.2g}; efficiency exact on {} attributions", worst, attributions));
    return o;
}

Outcome criterion5() {
    Outcome o;
    CorpusConfig cfg;
    cfg.n_cases = 1100;
    cfg.n_controls = 9900;
    cfg.n_unconfirmed = 100;
    const auto records = generate_corpus(cfg, 505);
    std::vector<PatientSummary> summaries;
    for (const auto& r : records) summaries.push_back(summarize(r));
    const CohortCriteria crit;
    const auto cohort = build_cohort(summaries, crit, 505);
    std::unordered_map<std::string, const PatientSummary*> by_id;
    std::set<std::string> ad_coded, case_ids;
    for (const auto& s : summaries) {
        by_id[s.patient_id] = &s;
        if (has_ad_diagnosis(s, crit)) ad_coded.insert(s.patient_id);
    }
    for (const auto& pr : cohort.pairs) case_ids.insert(pr.case_record.patient_id);
    const std::size_t groups = std::min<std::size_t>(cohort.pairs.size(), 1000);
    o.require(cohort.pairs.size() >= 1000, fmt::format("only {} matched groups", cohort.pairs.size()));
    long violations = 0, checked = 0, case_as_control = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        const auto& pr = cohort.pairs[g];
        const auto& c = *by_id.at(pr.case_record.patient_id);
        const Date index = pr.case_record.index_date;
        for (const auto& id : pr.controls) {
            const auto& k = *by_id.at(id);
            ++checked;
            const bool visit_in_year = std::any_of(k.visit_dates.begin(), k.visit_dates.end(),
                                                   [&](Date d) { return d.year() == index.year(); });
            violations += !(std::abs(k.age_at(index) - c.age_at(index)) <= 1 && k.sex == c.sex &&
                            k.visit_dates.front().year() == c.visit_dates.front().year() && visit_in_year);
            case_as_control += ad_coded.count(id) + case_ids.count(id);
        }
    }
    o.require(violations == 0, fmt::format("{} of {} control assignments break a constraint", violations, checked));
    o.require(case_as_control == 0, fmt::format("{} controls are cases or AD-coded", case_as_control));

    testgen::Rng rng(506);
    int disagree = 0;
    for (int t = 0; t < 500; ++t) {
        const auto dx = oracle::random_history(rng);
        const auto got = ascertain_patient("p", dx, crit);
        const auto want = oracle::ascertain("p", dx, crit);
        disagree += got.has_value() != want.has_value() || (got && !(*got == *want));
    }
    o.require(disagree == 0, fmt::format("ascertainment disagrees with oracle on {} histories", disagree));
    o.note(fmt::format("{} groups, {} control assignments, 0 violations; ascertainment 500/500", groups, checked));
    return o;
}

// The full default run shared by criteria 6-10.
struct FullRun {
    ExperimentResult result;
    double seconds = 0;
    fs::path dir;
};

FullRun full_run(const fs::path& dir, unsigned jobs) {
    fs::remove_all(dir);
    auto cfg = PipelineConfig::load(std::nullopt, {"experiment.predictor_sets=keywords,icd_only"});
    cfg.set_jobs(jobs);
    const auto t0 = std::chrono::steady_clock::now();
    FullRun r;
    r.result = run_pipeline(cfg, std::nullopt, dir);
    r.seconds = seconds_since(t0);
    r.dir = dir;
    return r;
}

Outcome criterion6(const FullRun& run) {
    Outcome o;
    testgen::Rng rng(606);
    int scan_mismatch = 0;
    const auto panel = default_lexicon();
    const auto m = compile_matcher(panel);
    std::vector<KeywordHit> hits;
    for (int t = 0; t < 1000; ++t) {
        const auto text = oracle::fuzz_text(rng, panel);
        hits.clear();
        m.scan(text, hits);
        std::sort(hits.begin(), hits.end());
        scan_mismatch += hits != oracle::scan(panel, text);
    }
    o.require(scan_mismatch == 0, fmt::format("{} fuzzed texts differ from naive scan", scan_mismatch));

    int audits = 0, audit_fail = 0;
    for (const auto& c : run.result.manifest["cells"]) {
        ++audits;
        audit_fail += !(c["passed"].get<bool>() && c["test_patients_in_vocab_fit"].get<int>() == 0 &&
                        c["vocab_fit_patients"].get<std::size_t>() == c["n_train"].get<std::size_t>());
    }
    o.require(audits > 0 && audit_fail == 0, fmt::format("{} of {} cell audits failed", audit_fail, audits));

    // Shrinking the window never increases a count.
    CorpusConfig cc;
    cc.n_cases = 150;
    cc.n_controls = 150;
    const auto records = generate_corpus(cc, 607);
    const CohortCriteria crit;
    long increases = 0, comparisons = 0;
    for (const auto& p : records) {
        const auto scanned = scan_full(p, m);
        const Date origin = p.reference_date_truth;
        PairCounts wider;
        for (int clean = 0; clean <= 10; ++clean) {
            const auto w = frame_window(scanned.summary.first_visit(), origin, clean, crit.study_start, 0);
            const auto counts = pairs_in_window(scanned, w, NoteFilter::all());
            if (clean > 0) {
                for (const auto& [k, c] : counts) {
                    ++comparisons;
                    const auto it = wider.find(k);
                    increases += it == wider.end() || c > it->second;
                }
            }
            wider = counts;
        }
    }
    o.require(increases == 0, fmt::format("{} counts grew when the window shrank", increases));
    o.note(fmt::format("scan 1000/1000; {} audits passed; {} window comparisons, 0 increases", audits, comparisons));
    return o;
}

const MetricsRow* find_row(const ExperimentResult& r, const std::string& model, int clean) {
    for (const auto& row : r.metrics) {
        if (row.model == model && row.clean_years == clean && row.subgroup == "all") return &row;
    }
    return nullptr;
}

Outcome criterion7(const FullRun& run) {
    Outcome o;
    const auto* lr = find_row(run.result, "lr", 10);
    const auto* icd = find_row(run.result, "lr/icd_only", 10);
    o.require(lr && icd, "missing lr or lr/icd_only rows at clean_years=10");
    if (!lr || !icd) return o;
    o.require(lr->report.roc_auc >= kRocMin, fmt::format("LR ROC {:.4f}", lr->report.roc_auc));
    o.require(lr->report.case_class.f1 >= kF1Min, fmt::format("LR F1 {:.4f}", lr->report.case_class.f1));
    o.require(icd->report.roc_auc <= kIcdRocMax, fmt::format("ICD-only ROC {:.4f}", icd->report.roc_auc));
    o.require(run.seconds < kRunSeconds, fmt::format("runtime {:.0f}s", run.seconds));
    o.note(fmt::format("clean=10: LR ROC {:.4f} F1 {:.4f}; ICD-only ROC {:.4f}; run {:.0f}s", lr->report.roc_auc,
                       lr->report.case_class.f1, icd->report.roc_auc, run.seconds));
    return o;
}

Outcome criterion8(const FullRun& run) {
    Outcome o;
    const TrendCurve* curve = nullptr;
    for (const auto& c : run.result.trends) {
        if (c.stratum == "all" && c.normalization == TrendNormalization::raw) {
            curve = &c;
            break;
        }
    }
    o.require(curve != nullptr, "no raw by-year trend curve");
    if (!curve) return o;
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = 0; i < curve->x.size(); ++i) {
        o.require(curve->control_n[i] > 0, fmt::format("no controls at offset {}", curve->x[i]));
        if (!curve->control_n[i]) continue;
        lo = std::min(lo, curve->control_mean[i]);
        hi = std::max(hi, curve->control_mean[i]);
    }
    o.require(lo >= kControlMean - kControlBand && hi <= kControlMean + kControlBand,
              fmt::format("control mean range [{:.2f}, {:.2f}]", lo, hi));
    const double case0 = curve->case_mean.back(), ctrl0 = curve->control_mean.back();
    o.require(curve->x.back() == 0 && case0 >= kCaseRatio * ctrl0,
              fmt::format("offset 0: case {:.2f} vs control {:.2f}", case0, ctrl0));
    double early = 0;
    for (std::size_t i = 0; i < curve->x.size(); ++i) {
        if (curve->x[i] > -15) continue;
        const double rel = std::abs(curve->case_mean[i] - curve->control_mean[i]) / curve->control_mean[i];
        early = std::max(early, rel);
    }
    o.require(early < kEarlyRel, fmt::format("case/control gap at offset <= -15 is {:.1f}%", 100 * early));
    o.note(fmt::format("control mean in [{:.2f}, {:.2f}]; offset 0 case/control {:.2f}/{:.2f} = {:.1f}x; "
                       "offset -15 gap {:.1f}%",
                       lo, hi, case0, ctrl0, case0 / ctrl0, 100 * early));
    return o;
}

Outcome criterion9(const FullRun& run) {
    Outcome o;
    std::vector<double> f1;
    for (int c = 0; c <= 10; ++c) {
        const auto* row = find_row(run.result, "lr", c);
        o.require(row != nullptr, fmt::format("missing lr row at clean_years={}", c));
        if (!row) return o;
        f1.push_back(row->report.case_class.f1);
    }
    double worst_rise = 0;
    for (std::size_t i = 0; i < f1.size(); ++i) {
        for (std::size_t j = i + 1; j < f1.size(); ++j) worst_rise = std::max(worst_rise, f1[j] - f1[i]);
    }
    o.require(worst_rise <= kF1Noise, fmt::format("F1 rises by {:.4f} between clean windows", worst_rise));
    o.require(f1.back() < f1.front(), "F1 at 10 years is not below F1 at 0 years");
    std::string series;
    for (double v : f1) series += fmt::format("{}{:.3f}", series.empty() ? "" : " ", v);
    o.note(fmt::format("LR F1 by clean_years 0..10: {}; max rise {:.4f}", series, worst_rise));
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion10(const FullRun& a, const FullRun& b) {
    Outcome o;
    for (const char* f : {"metrics.csv", "vocab.csv", "trends.csv", "importance.csv"}) {
        const bool both = fs::exists(a.dir / f) && fs::exists(b.dir / f);
        o.require(both, fmt::format("{} missing", f));
        if (both) o.require(slurp(a.dir / f) == slurp(b.dir / f), fmt::format("{} differs", f));
    }
    o.note(fmt::format("metrics/vocab/trends/importance byte-identical across runs ({:.0f}s with 1 job, {:.0f}s with 2)",
                       a.seconds, b.seconds));
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string workdir = "acceptance_runs";
    app.add_option("--workdir", workdir, "directory for the full pipeline runs");
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::warn);

    int failed = 0;
    const auto report = [&](int n, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    };

    report(1, criterion1);
    report(2, criterion2);
    report(3, criterion3);
    report(4, criterion4);
    report(5, criterion5);

    std::optional<FullRun> run_a, run_b;
    std::string run_error;
    try {
        run_a = full_run(fs::path(workdir) / "run_a", 1);
    } catch (const std::exception& e) {
        run_error = e.what();
    }
    const auto with_run = [&](const std::function<Outcome(const FullRun&)>& fn) {
        return [&, fn]() {
            if (!run_a) throw std::runtime_error("full pipeline run failed: " + run_error);
            return fn(*run_a);
        };
    };
    report(6, with_run(criterion6));
    report(7, with_run(criterion7));
    report(8, with_run(criterion8));
    report(9, with_run(criterion9));
    report(10, [&]() {
        if (!run_a) throw std::runtime_error("full pipeline run failed: " + run_error);
        run_b = full_run(fs::path(workdir) / "run_b", 2);
        return criterion10(*run_a, *run_b);
    });

    std::cout << (failed ? fmt::format("{} of 10 criteria failed", failed) : std::string("all 10 criteria passed"))
              << std::endl;
    return failed ? 1 : 0;
}
