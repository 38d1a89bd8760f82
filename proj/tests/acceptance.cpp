// End-to-end acceptance gate. Each check prints one PASS/FAIL line and the
// binary exits nonzero if any check fails. Oracles here are written from
// scratch (pairwise sweeps, literal rule tables, finite differences) rather
// than reusing the library's code paths.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "pipeline.hpp"
#include "ventgate/commands.hpp"
#include "ventgate/metrics.hpp"
#include "ventgate/synth.hpp"
#include "ventgate/train.hpp"
#include "ventgate/util.hpp"

using namespace ventgate;
using namespace vgtest;
namespace fs = std::filesystem;

namespace {

struct Gate {
    int passed = 0, failed = 0;

    void run(const char* label, const std::function<bool(std::string&)>& fn) {
        const auto start = std::chrono::steady_clock::now();
        bool ok = false;
        std::string detail;
        try {
            ok = fn(detail);
        } catch (const std::exception& ex) {
            ok = false;
            detail = std::string("exception: ") + ex.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s - %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", label, secs,
                    detail.empty() ? "" : "  ", detail.c_str());
        std::fflush(stdout);
        (ok ? passed : failed) += 1;
    }
};

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

double median5(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

// ---- 1: physician operating point ------------------------------------------------

bool check_physician(std::string& detail) {
    const auto r = binary_predictor_metrics({3, 9, 11, 224});
    char buf[128];
    std::snprintf(buf, sizeof buf, "sens %.4f spec %.4f bal %.4f ppv %.4f", *r.sensitivity,
                  *r.specificity, *r.balanced_accuracy, *r.ppv);
    detail = buf;
    return near(*r.sensitivity, 0.214, 1e-3) && near(*r.specificity, 0.961, 1e-3) &&
           near(*r.balanced_accuracy, 0.588, 1e-3) && near(*r.ppv, 0.250, 1e-3);
}

// ---- 2: gate saturation identities ------------------------------------------------

bool check_gate_identity(std::string& detail) {
    ModelDims dims;
    dims.n_static = 4;
    dims.n_dyn = 3;
    dims.n_derived = 9;
    dims.z_dim = 5;
    dims.d = 6;
    dims.hidden = 7;
    dims.depth = 2;

    auto shared = init_model(Variant::GATED, dims, 99);
    for (auto& ref : tensor_refs(shared))
        for (size_t i = 0; i < ref.count; ++i) ref.data[i] *= 0.2;  // numerical headroom

    auto ehr = shared;
    ehr.variant = Variant::EHR_ONLY;
    auto cxr = shared;
    cxr.variant = Variant::CXR_ONLY;

    auto gated = shared;
    std::fill(gated.gate.w.begin(), gated.gate.w.end(), 0.0);

    BatchFixture fx(dims, 50, 123, 0.3);
    double worst_gap = 0.0, worst_g = 0.0;

    gated.gate.b = -20.0;
    for (const auto& s : fx.batch.samples) {
        double g = -1.0;
        const double fused = predict(gated, s, &g);
        worst_g = std::max(worst_g, std::fabs(g - 0.0));
        worst_gap = std::max(worst_gap, std::fabs(fused - predict(ehr, s)));
    }
    gated.gate.b = 20.0;
    for (const auto& s : fx.batch.samples) {
        double g = -1.0;
        const double fused = predict(gated, s, &g);
        worst_g = std::max(worst_g, std::fabs(g - 1.0));
        worst_gap = std::max(worst_gap, std::fabs(fused - predict(cxr, s)));
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "max |gap| %.2e, max gate excursion %.2e", worst_gap, worst_g);
    detail = buf;
    return worst_gap <= 1e-9 && worst_g <= 1e-8;
}

// ---- 3: gradient audit -------------------------------------------------------------

bool check_gradients(std::string& detail) {
    const Variant variants[] = {Variant::EHR_ONLY, Variant::CXR_ONLY, Variant::CONCAT,
                                Variant::ATTENTION, Variant::GATED};
    Rng rng(4242);
    double worst = 0.0;
    int configs = 0;
    for (Variant v : variants) {
        for (int rep = 0; rep < 5; ++rep) {
            ModelDims dims;
            dims.n_static = uint32_t(rng.uniform_int(2, 6));
            dims.n_dyn = uint32_t(rng.uniform_int(2, 5));
            dims.n_derived = 3 * dims.n_dyn;
            dims.z_dim = uint32_t(rng.uniform_int(2, 6));
            dims.d = uint32_t(rng.uniform_int(3, 6));
            dims.hidden = uint32_t(rng.uniform_int(3, 8));
            dims.depth = uint32_t(rng.uniform_int(1, 2));
            const size_t batch = size_t(rng.uniform_int(2, 6));
            worst = std::max(worst, gradcheck_max_error(v, dims, batch, rng.next_u64()));
            ++configs;
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%d configs, worst relative error %.3e", configs, worst);
    detail = buf;
    return configs >= 20 && worst < 1e-4;
}

// ---- 4: AUROC exactness ------------------------------------------------------------

bool check_auroc_exact(std::string& detail) {
    Rng rng(515);
    int exact = 0;
    const int total = 100;
    for (int i = 0; i < total; ++i) {
        const size_t n = 2 + size_t(rng.next_u64() % 199);  // up to 200
        const int levels = 2 + int(rng.next_u64() % 10);    // coarse grid forces ties
        std::vector<double> scores;
        std::vector<uint8_t> labels;
        for (size_t k = 0; k < n; ++k) {
            scores.push_back(double(rng.next_u64() % uint64_t(levels)) / double(levels));
            labels.push_back(uint8_t(rng.bernoulli(0.35) ? 1 : 0));
        }
        labels[0] = 0;
        labels[n - 1] = 1;
        if (auroc(scores, labels) == pairwise_auroc(scores, labels)) ++exact;
    }
    detail = std::to_string(exact) + "/" + std::to_string(total) + " bitwise equal";
    return exact == total;
}

// ---- 5: hourly pipeline semantics ---------------------------------------------------

bool check_pipeline(std::string& detail) {
    Rng rng(808);
    bool ok = true;

    // forward-fill cutoff and staleness bookkeeping against a re-derivation
    for (int trial = 0; trial < 30 && ok; ++trial) {
        const size_t bins = 40;
        std::vector<double> grid;
        for (size_t k = 0; k < bins; ++k) grid.push_back(double(k));
        ObservationSeries series;
        series.variable_id = 0;
        const int m = rng.uniform_int(1, 4);
        double t = rng.uniform(0.0, 2.0);
        for (int j = 0; j < m; ++j) {
            series.samples.push_back({t, rng.uniform(50.0, 150.0)});
            t += rng.uniform(0.5, 4.0);
        }
        const auto binned = bin_hourly(series, grid);
        const auto filled = forward_fill(binned);

        int last = -1;
        for (size_t k = 0; k < bins && ok; ++k) {
            if (binned[k]) {
                ok = filled.tslm[k] == 0.0 && filled.value[k] && *filled.value[k] == *binned[k];
                last = int(k);
            } else {
                const double age = last < 0 ? double(k) : double(int(k) - last);
                ok = filled.tslm[k] == age;
                const bool carried = last >= 0 && age <= 24.0;
                ok = ok && filled.value[k].has_value() == carried;
                if (ok && carried) ok = *filled.value[k] == *binned[last];
                if (ok && k > 0 && !binned[k - 1] && !binned[k])
                    ok = filled.tslm[k] - filled.tslm[k - 1] == 1.0;  // exact hourly increments
            }
        }
        if (!ok) detail = "forward-fill bookkeeping diverged";
    }

    // median binning against a sort-based oracle
    for (int trial = 0; trial < 40 && ok; ++trial) {
        std::vector<double> grid;
        const double start = rng.uniform(0.0, 3.0);
        for (int k = 0; k < 10; ++k) grid.push_back(start + double(k));
        ObservationSeries series;
        series.variable_id = 1;
        double t = start - 2.0;
        for (int j = 0; j < 25; ++j) {
            t += rng.uniform(0.05, 1.0);
            series.samples.push_back({t, rng.uniform(0.0, 100.0)});
        }
        const auto binned = bin_hourly(series, grid);
        for (size_t k = 0; k < grid.size() && ok; ++k) {
            std::vector<double> in_bin;
            for (const auto& [ts, val] : series.samples)
                if (ts >= grid[k] && ts < grid[k] + 1.0) in_bin.push_back(val);
            if (in_bin.empty())
                ok = !binned[k].has_value();
            else
                ok = binned[k] && *binned[k] == sort_median(in_bin);
        }
        if (!ok) detail = "median binning diverged from the sort oracle";
    }

    // causality: appending a later observation never rewrites earlier rows
    for (int trial = 0; trial < 10 && ok; ++trial) {
        auto e = basic_encounter("c" + std::to_string(trial), 0.0, 20.0);
        for (int var : {0, 1, 5}) {
            std::vector<std::pair<double, double>> samples;
            double t = rng.uniform(0.0, 1.5);
            while (t < 9.0) {
                samples.push_back({t, rng.uniform(40.0, 160.0)});
                t += rng.uniform(0.7, 3.0);
            }
            if (!samples.empty()) add_series(e, var, samples);
        }
        ImputationStats stats = fit_imputation_stats({&e});
        const auto before = assemble(e, std::nullopt, stats);

        auto later = e;
        const double extra_t = rng.uniform(9.5, 17.0);
        later.observations[0].samples.push_back({extra_t, 999.0});
        const auto after = assemble(later, std::nullopt, stats);

        for (size_t r = 0; r < before.rows() && ok; ++r) {
            if (before.timestamps[r] + 1.0 > extra_t) continue;  // bin reaches the new sample
            for (int c = 0; c < kFeatureCount && ok; ++c)
                ok = before.at(r, c) == after.at(r, c);
        }
        if (!ok) detail = "future observation leaked into an earlier row";
    }

    // imaging lookback boundary: exactly 72 h matches, any older is dropped
    for (int trial = 0; trial < 10 && ok; ++trial) {
        auto e = basic_encounter("x" + std::to_string(trial), 0.0, 90.0);
        add_series(e, 0, {{0.5, 80.0}});
        ImputationStats stats = fit_imputation_stats({&e});

        CxrEmbeddingTable table;
        table.dim = 2;
        table.encoder_name = "synthetic";
        table.entries["k"] = {0.1f, 0.2f};

        const double acq = double(rng.uniform_int(4, 17));
        CxrStudy study;
        study.study_id = "s";
        study.acquired_at = acq;
        study.source = CxrSource::OTHER_DEPT;
        study.embedding_key = "k";
        e.cxr_studies = {study};

        const auto fm = assemble(e, std::nullopt, stats);
        const auto aligned = align(e, fm, table);
        const double boundary = acq + 72.0;
        bool saw_boundary = false;
        for (const auto& a : aligned) {
            ok = ok && a.timestamp >= acq && a.timestamp <= boundary;
            saw_boundary = saw_boundary || (a.timestamp == boundary &&
                                            a.embedding_age_hours == 72.0);
        }
        ok = ok && saw_boundary;

        // nudge the study earlier so the boundary row ages past the window
        auto e2 = e;
        e2.cxr_studies[0].acquired_at = acq - 1e-6;
        const auto aligned2 = align(e2, assemble(e2, std::nullopt, stats), table);
        for (const auto& a : aligned2) ok = ok && a.timestamp < boundary;
        if (!ok) detail = "lookback boundary mishandled";
    }

    return ok;
}

// ---- 6: severity rule parity ---------------------------------------------------------

bool check_severity(std::string& detail) {
    Rng rng(606);
    auto agree = [](std::optional<double> pf, std::optional<double> sf, bool within, bool beyond) {
        return severity_points(pf, sf, within, beyond) == severity_oracle(pf, sf, within, beyond);
    };

    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
        std::optional<double> pf, sf;
        if (!rng.bernoulli(1.0 / 3.0)) pf = rng.uniform(0.0, 650.0);
        if (!rng.bernoulli(1.0 / 3.0)) sf = rng.uniform(0.0, 650.0);
        if (!agree(pf, sf, rng.bernoulli(0.5), rng.bernoulli(0.5))) {
            detail = "random divergence at case " + std::to_string(i);
            return false;
        }
        ++checked;
    }

    const double eps = 1e-9;
    const std::vector<std::optional<double>> pfs = {std::nullopt, 200.0, 200.0 + eps, 300.0,
                                                    300.0 + eps};
    const std::vector<std::optional<double>> sfs = {std::nullopt, 141.0, 141.0 + eps, 221.0,
                                                    221.0 + eps};
    for (const auto& pf : pfs)
        for (const auto& sf : sfs)
            for (int w = 0; w < 2; ++w)
                for (int b = 0; b < 2; ++b) {
                    if (!pf && !sf) continue;
                    if (!agree(pf, sf, w, b)) {
                        detail = "boundary divergence";
                        return false;
                    }
                    ++checked;
                }
    detail = std::to_string(checked) + " cases agree";
    return true;
}

// ---- 7: confusion fixture ------------------------------------------------------------

bool check_confusion(std::string& detail) {
    const std::vector<PredRow> rows = {
        {0, 10.0, 0.7, 1},  {0, 11.0, 0.2, 1},                      // caught once
        {1, 5.0, 0.3, 0},   {1, 20.0, 0.4, 1},                      // missed entirely
        {2, 4.0, 0.9, 0},   {2, 6.0, 0.1, 1},                       // fires outside the window
        {3, 4.0, 0.1, 0},   {3, 5.0, 0.2, 0},  {3, 6.0, 0.3, 0},    // quiet negative
        {4, 4.0, 0.8, 0},   {4, 5.0, 0.1, 0},                       // false alarm
        {5, 8.0, 0.95, 1},  {5, 9.0, 0.5, 1},  {5, 10.0, 0.2, 1},   // caught twice, tie at cutoff
    };
    const auto conf = encounter_confusion(rows, 6, 0.5);
    const auto& p = conf.prediction_level;
    const auto& e = conf.encounter_level;
    char buf[96];
    std::snprintf(buf, sizeof buf, "rows tp%lld fp%lld fn%lld tn%lld; encounters tp%lld fp%lld fn%lld tn%lld",
                  (long long)p.tp, (long long)p.fp, (long long)p.fn, (long long)p.tn,
                  (long long)e.tp, (long long)e.fp, (long long)e.fn, (long long)e.tn);
    detail = buf;
    return p.tp == 4 && p.fp == 1 && p.fn == 5 && p.tn == 4 && e.tp == 2 && e.fp == 1 &&
           e.fn == 2 && e.tn == 1;
}

// ---- 8: threshold policy ---------------------------------------------------------------

bool check_threshold(std::string& detail) {
    Rng rng(717);
    for (int trial = 0; trial < 60; ++trial) {
        const size_t n = 8 + size_t(rng.next_u64() % 50);
        const int levels = 3 + int(rng.next_u64() % 9);
        std::vector<double> scores;
        std::vector<uint8_t> labels;
        for (size_t k = 0; k < n; ++k) {
            scores.push_back(double(rng.next_u64() % uint64_t(levels)) / double(levels));
            labels.push_back(uint8_t(rng.bernoulli(0.4) ? 1 : 0));
        }
        for (size_t k = 0; k < 5; ++k) labels[k] = 1;  // at least five positives

        const double thr = select_threshold(scores, labels, 0.60);
        auto sens_at = [&](double t) {
            int pos = 0, hit = 0;
            for (size_t k = 0; k < n; ++k) {
                if (!labels[k]) continue;
                ++pos;
                if (scores[k] >= t) ++hit;
            }
            return double(hit) / double(pos);
        };
        if (sens_at(thr) < 0.60) {
            detail = "selected threshold misses the floor";
            return false;
        }
        for (double c : scores)
            if (c > thr && sens_at(c) >= 0.60) {
                detail = "a larger candidate also met the floor";
                return false;
            }
    }
    detail = "60 randomized validation sets";
    return true;
}

// ---- 9: synthetic ordering experiment ---------------------------------------------------

bool check_ordering(std::string& detail) {
    const Variant variants[] = {Variant::EHR_ONLY, Variant::CXR_ONLY, Variant::ATTENTION,
                                Variant::GATED};
    std::vector<std::vector<double>> aurocs(4);

    for (uint64_t seed = 101; seed <= 105; ++seed) {
        SynthConfig sc;
        sc.seed = seed;
        sc.n_encounters = 4000;
        sc.event_rate = 0.08;
        sc.context_gate_prob = 0.5;
        sc.embedding_dim = 16;
        sc.horizon_hours = 36;
        const auto out = generate(sc);
        const auto ds = dataset_from_cohort(out.encounters, &out.table, seed + 1000);

        std::vector<uint8_t> test_labels;
        for (uint32_t r : ds.test_rows) test_labels.push_back(ds.y[r]);

        TrainConfig tc;
        tc.learning_rate = 3e-3;
        tc.batch_size = 256;
        tc.max_epochs = 6;
        tc.patience = 6;
        tc.seed = 7;
        tc.d = 16;
        tc.hidden = 24;
        tc.depth = 1;

        for (int vi = 0; vi < 4; ++vi) {
            const auto run = train(variants[vi], ds, tc);
            const auto scores = predict_rows(run.params, ds, ds.test_rows);
            aurocs[vi].push_back(auroc(scores, test_labels));
        }
    }

    const double ehr = median5(aurocs[0]);
    const double cxr = median5(aurocs[1]);
    const double attn = median5(aurocs[2]);
    const double gated = median5(aurocs[3]);
    char buf[128];
    std::snprintf(buf, sizeof buf, "median AUROC gated %.3f ehr %.3f cxr %.3f attention %.3f",
                  gated, ehr, cxr, attn);
    detail = buf;
    return gated >= ehr + 0.03 && gated >= cxr + 0.03 && gated >= attn;
}

// ---- 10: run determinism ------------------------------------------------------------------

bool check_determinism(std::string& detail) {
    TempDir dir("accept_det");
    auto run_once = [&](const std::string& sub) {
        RunConfig cfg;
        cfg.out_dir = dir.str() + "/" + sub;
        cfg.synth.seed = 21;
        cfg.synth.n_encounters = 300;
        cfg.synth.event_rate = 0.2;
        cfg.synth.embedding_dim = 8;
        cfg.synth.horizon_hours = 36;
        cfg.train.max_epochs = 3;
        cfg.train.patience = 3;
        cfg.train.batch_size = 128;
        cfg.train.seed = 3;
        cfg.train.d = 8;
        cfg.train.hidden = 10;
        cfg.train.depth = 1;
        cfg.variants = {Variant::GATED};
        finalize_run_config(cfg);
        cmd_gen(cfg);
        cmd_featurize(cfg);
        cmd_train(cfg, Variant::GATED);
        cmd_eval(cfg, Variant::GATED);
        return cfg;
    };
    const auto a = run_once("a");
    const auto b = run_once("b");

    const std::vector<std::pair<std::string, std::string>> files = {
        {a.checkpoints_dir + "/gated.vgm", b.checkpoints_dir + "/gated.vgm"},
        {a.checkpoints_dir + "/gated_history.csv", b.checkpoints_dir + "/gated_history.csv"},
        {a.reports_dir + "/gated_report.json", b.reports_dir + "/gated_report.json"},
        {a.reports_dir + "/gated_roc.csv", b.reports_dir + "/gated_roc.csv"},
        {a.reports_dir + "/gated_confusion.json", b.reports_dir + "/gated_confusion.json"},
    };
    size_t identical = 0;
    for (const auto& [fa, fb] : files)
        if (read_file(fa) == read_file(fb)) ++identical;
    detail = std::to_string(identical) + "/" + std::to_string(files.size()) +
             " artifacts byte-identical";
    return identical == files.size();
}

}  // namespace

int main() {
    Gate gate;
    gate.run("physician operating point recomputed from its raw counts", check_physician);
    gate.run("saturated gate collapses fusion onto the single-branch models", check_gate_identity);
    gate.run("analytic gradients match central finite differences across all variants",
             check_gradients);
    gate.run("rank AUROC equals exhaustive pairwise comparison on tied instances",
             check_auroc_exact);
    gate.run("hourly pipeline semantics: fill cutoff, staleness, medians, causality, lookback",
             check_pipeline);
    gate.run("severity points match a literal rule-table oracle incl. boundaries", check_severity);
    gate.run("six-encounter confusion fixture lands every cell at both granularities",
             check_confusion);
    gate.run("validation threshold meets the sensitivity floor and no larger cutoff does",
             check_threshold);
    gate.run("gated fusion leads single-modality and attention baselines on synthetic cohorts",
             check_ordering);
    gate.run("rerunning the full command chain is byte-identical", check_determinism);

    std::printf("%d passed, %d failed\n", gate.passed, gate.failed);
    return gate.failed == 0 ? 0 : 1;
}
