#pragma once

// Test-side oracles, written independently of the library code paths they
// audit: pairwise AUROC, sort-based median, a literal transcription of the
// severity rule list, and a finite-difference gradient sweep.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ventgate/cohort.hpp"
#include "ventgate/nn.hpp"
#include "ventgate/rng.hpp"

namespace vgtest {

using namespace ventgate;

// O(P*N) sweep over every positive/negative pair, two units per win and one
// per tie, so the division is the only inexact step.
inline double pairwise_auroc(const std::vector<double>& scores,
                             const std::vector<uint8_t>& labels) {
    long long acc2 = 0, pos = 0, neg = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        ++pos;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j])
                acc2 += 2;
            else if (scores[i] == scores[j])
                acc2 += 1;
        }
    }
    for (auto l : labels) neg += l ? 0 : 1;
    if (!pos || !neg) throw std::invalid_argument("pairwise_auroc needs both classes");
    return double(acc2) / (2.0 * double(pos) * double(neg));
}

inline double sort_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Literal rule-by-rule reading of the clinical point table; PaO2/FiO2 is
// consulted first, SpO2/FiO2 only when PaO2/FiO2 is missing.
inline int severity_oracle(std::optional<double> pf, std::optional<double> sf, bool imv_within,
                           bool imv_beyond) {
    if ((pf && *pf < 0) || (sf && *sf < 0)) throw std::invalid_argument("negative ratio");
    bool moderate = false, severe = false;
    if (pf) {
        severe = *pf <= 200.0;
        moderate = !severe && *pf <= 300.0;
    } else if (sf) {
        severe = *sf <= 141.0;
        moderate = !severe && *sf <= 221.0;
    }
    int best = 0;
    if (moderate && best < 1) best = 1;
    if (severe && best < 2) best = 2;
    if (imv_within && best < 3) best = 3;
    if (severe && imv_within && best < 4) best = 4;
    if (imv_beyond && best < 5) best = 5;
    return best;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static std::atomic<uint32_t> serial{0};
        path = std::filesystem::temp_directory_path() /
               ("ventgate_" + tag + "_" + std::to_string(serial.fetch_add(1)));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
};

// Random batch with stable storage addresses behind the SampleViews.
struct BatchFixture {
    std::vector<float> x, dt, z;
    std::vector<uint8_t> labels;
    Batch batch;

    BatchFixture(const ModelDims& dims, size_t n, uint64_t seed, double x_scale = 1.0) {
        Rng rng(seed);
        const size_t nx = dims.n_static + dims.n_dyn + dims.n_derived;
        x.resize(n * nx);
        dt.resize(n * dims.n_dyn);
        z.resize(n * dims.z_dim);
        for (auto& v : x) v = (float)(x_scale * rng.normal());
        for (auto& v : dt) v = (float)rng.uniform(0.0, 36.0);
        for (auto& v : z) v = (float)(x_scale * rng.normal());
        for (size_t i = 0; i < n; ++i) {
            SampleView s;
            s.x = &x[i * nx];
            s.dt = &dt[i * dims.n_dyn];
            s.z = dims.z_dim ? &z[i * dims.z_dim] : nullptr;
            batch.samples.push_back(s);
            labels.push_back(uint8_t(rng.bernoulli(0.5) ? 1 : 0));
        }
        if (n >= 2) {  // both classes, so the loss never degenerates
            labels[0] = 0;
            labels[1] = 1;
        }
        batch.labels = labels;
    }
};

// Central finite differences over every learnable scalar; returns the worst
// symmetric relative error against the analytic gradients.
inline double fd_max_rel_error(ModelParams& p, const Batch& batch, double step = 1e-5,
                               double pos_weight = 1.0) {
    BackwardOpts opts;
    opts.pos_weight = pos_weight;
    ModelParams analytic = zeros_like(p);
    model_forward_backward(p, batch, analytic, opts);

    auto prefs = tensor_refs(p);
    auto grefs = tensor_refs(analytic);
    ModelParams sink = zeros_like(p);
    double worst = 0.0;
    for (size_t t = 0; t < prefs.size(); ++t) {
        for (size_t i = 0; i < prefs[t].count; ++i) {
            double& w = prefs[t].data[i];
            const double keep = w;
            w = keep + step;
            const double up = model_forward_backward(p, batch, sink, opts);
            w = keep - step;
            const double down = model_forward_backward(p, batch, sink, opts);
            w = keep;
            const double numeric = (up - down) / (2.0 * step);
            const double a = grefs[t].data[i];
            const double rel =
                std::fabs(numeric - a) / std::max(1e-6, std::fabs(numeric) + std::fabs(a));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// Minimal well-formed encounter for pipeline tests; observations are added by
// the caller.
inline Encounter basic_encounter(const std::string& id, double admit, double discharge) {
    Encounter e;
    e.encounter_id = id;
    e.icu_admit = admit;
    e.icu_discharge = discharge;
    e.demographics = {60.0, 1.0, 170.0, 80.0, 27.7, 2.0};
    e.comorbidities.assign(kComorbidityCount, 0);
    return e;
}

inline void add_series(Encounter& e, int variable_id,
                       std::vector<std::pair<double, double>> samples) {
    ObservationSeries s;
    s.variable_id = variable_id;
    s.samples = std::move(samples);
    e.observations.push_back(std::move(s));
}

}  // namespace vgtest
