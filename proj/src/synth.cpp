#include "ventgate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ventgate/features.hpp"
#include "ventgate/rng.hpp"

namespace ventgate {

namespace {

constexpr double kRampHours = 30.0;      // deterioration latent ramps over this window
constexpr double kEmbeddingShift = 5.0;  // displacement along the signal direction at s=1

struct VariableSpec {
    double mean, sd;
    double drift;         // sd units at s=1, EHR-expressed encounters only
    double interval_lo, interval_hi;
    double round_to;
    double clamp_lo, clamp_hi;
};

VariableSpec variable_spec(int id) {
    switch (id) {
        case kVarHeartRate:  return {85, 12, +1.8, 0.8, 1.6, 0.1, 20, 220};
        case kVarRespRate:   return {18, 3.5, +2.2, 0.8, 1.6, 0.1, 4, 60};
        case kVarTemperature:return {37, 0.5, +1.0, 0.8, 1.6, 0.1, 32, 43};
        case kVarSbp:        return {120, 15, 0, 0.8, 1.6, 1, 50, 260};
        case kVarDbp:        return {70, 10, 0, 0.8, 1.6, 1, 20, 160};
        case kVarMap:        return {85, 10, -1.5, 0.8, 1.6, 1, 30, 180};
        case kVarSpo2:       return {97, 1.8, -2.0, 0.8, 1.6, 0.1, 60, 100};
        case kVarFio2:       return {0.30, 0.06, +2.0, 1.0, 2.0, 0.01, 0.21, 1.0};
        case kVarPao2:       return {95, 14, -2.2, 4, 10, 0.1, 30, 400};
        case kVarPaco2:      return {40, 5, 0, 4, 10, 0.1, 15, 90};
        case kVarPh:         return {7.38, 0.05, 0, 4, 10, 0.01, 6.9, 7.7};
        case kVarWbc:        return {9, 2.5, +1.2, 6, 12, 0.1, 0.5, 60};
        case kVarPlatelets:  return {250, 60, 0, 6, 12, 1, 10, 900};
        case kVarBilirubin:  return {0.8, 0.4, 0, 6, 12, 0.1, 0.1, 25};
        case kVarCreatinine: return {1.0, 0.3, 0, 6, 12, 0.1, 0.2, 12};
        case kVarBun:        return {18, 6, 0, 6, 12, 1, 3, 120};
        case kVarLactate:    return {1.4, 0.5, +2.0, 6, 12, 0.1, 0.3, 20};
        case kVarGcs:        return {14.4, 0.8, -1.8, 2, 5, 1, 3, 15};
        default: {
            // remaining labs: generic daily-ish chemistry, no drift
            VariableSpec s{50.0 + id, 10, 0, 8, 16, 0.1, 0, 1000};
            if (id < 30) { s.interval_lo = 6; s.interval_hi = 12; }
            return s;
        }
    }
}

double round_to(double v, double step) { return std::round(v / step) * step; }

}  // namespace

void validate_synth_config(const SynthConfig& cfg) {
    if (cfg.n_encounters < 1) throw std::invalid_argument("CONFIG_RANGE: n_encounters must be >= 1");
    if (!(cfg.event_rate > 0 && cfg.event_rate < 1))
        throw std::invalid_argument("CONFIG_RANGE: event_rate must lie in (0,1)");
    if (!(cfg.dynamic_missing_rate >= 0 && cfg.dynamic_missing_rate < 1))
        throw std::invalid_argument("CONFIG_RANGE: dynamic_missing_rate must lie in [0,1)");
    if (cfg.embedding_dim < 2) throw std::invalid_argument("CONFIG_RANGE: embedding_dim must be >= 2");
    if (!(cfg.context_gate_prob >= 0 && cfg.context_gate_prob <= 1))
        throw std::invalid_argument("CONFIG_RANGE: context_gate_prob must lie in [0,1]");
    if (cfg.horizon_hours < 12)
        throw std::invalid_argument("CONFIG_RANGE: horizon_hours must be >= 12");
}

SynthOutput generate(const SynthConfig& cfg) {
    validate_synth_config(cfg);
    Rng rng(cfg.seed);
    const uint32_t n = cfg.n_encounters;

    // global embedding signal direction
    std::vector<double> u(cfg.embedding_dim);
    double norm = 0.0;
    for (auto& v : u) {
        v = rng.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : u) v /= norm;

    // quota-based label and channel assignment
    const uint32_t n_vent =
        static_cast<uint32_t>(std::llround(cfg.event_rate * static_cast<double>(n)));
    std::vector<uint32_t> order(n);
    for (uint32_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<uint8_t> ventilated(n, 0), imaging_expressed(n, 0);
    for (uint32_t k = 0; k < n_vent && k < n; ++k) ventilated[order[k]] = 1;
    const uint32_t n_img =
        static_cast<uint32_t>(std::llround(cfg.context_gate_prob * static_cast<double>(n_vent)));
    for (uint32_t k = 0; k < n_img && k < n; ++k) imaging_expressed[order[k]] = 1;

    SynthOutput out;
    out.table.dim = cfg.embedding_dim;
    out.table.encoder_name = "synthetic";
    out.encounters.reserve(n);

    for (uint32_t i = 0; i < n; ++i) {
        Encounter e;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "enc%05u", i);
        e.encounter_id = idbuf;
        e.icu_admit = std::floor(rng.uniform(0, 24) * 4) / 4.0;

        const bool is_vent = ventilated[i] != 0;
        const bool via_imaging = imaging_expressed[i] != 0;
        const double H = static_cast<double>(cfg.horizon_hours);

        double t0_off = 0.0, discharge_off;
        if (is_vent) {
            t0_off = rng.uniform(10.0, H);
            discharge_off = t0_off + rng.uniform(4.0, 24.0);
        } else {
            discharge_off = rng.uniform(8.0, H);
        }
        e.dnr = rng.bernoulli(0.04);
        e.pre_icu_ventilated = rng.bernoulli(0.03);
        if (rng.bernoulli(0.03)) {  // sub-minimum stay, exercises MIN_STAY exclusion
            discharge_off = rng.uniform(1.0, 4.5);
            if (is_vent) t0_off = discharge_off * 0.8;
        }
        e.icu_discharge = e.icu_admit + round_to(discharge_off, 0.25);
        const double t0_abs = e.icu_admit + t0_off;

        if (rng.bernoulli(0.08))
            e.surgery_times.push_back(round_to(e.icu_admit + rng.uniform(0.0, discharge_off), 0.25));

        // deterioration latent; zero for never-ventilated encounters
        auto severity = [&](double t) {
            if (!is_vent) return 0.0;
            return std::clamp(1.0 - (t0_abs - t) / kRampHours, 0.0, 1.0);
        };

        const double height = std::max(140.0, rng.normal(170, 10));
        const double weight = std::max(40.0, rng.normal(80, 15));
        e.demographics = {std::round(rng.uniform(25, 90)),
                          rng.bernoulli(0.5) ? 1.0 : 0.0,
                          std::round(height),
                          round_to(weight, 0.1),
                          round_to(weight / ((height / 100) * (height / 100)), 0.1),
                          static_cast<double>(rng.uniform_int(0, 8))};

        e.comorbidities.resize(kComorbidityCount);
        // flag 0 is the context cue; marginally Bernoulli(context_gate_prob)
        // in both classes, so on its own it predicts nothing
        e.comorbidities[0] =
            is_vent ? (via_imaging ? 1 : 0) : (rng.bernoulli(cfg.context_gate_prob) ? 1 : 0);
        for (int c = 1; c < kComorbidityCount; ++c)
            e.comorbidities[c] = rng.bernoulli(0.15) ? 1 : 0;

        const int n_meds = rng.uniform_int(0, 5);
        for (int m = 0; m < n_meds; ++m)
            e.medication_events.emplace_back(
                rng.uniform_int(0, kMedicationCategories - 1),
                round_to(e.icu_admit + rng.uniform(0.0, discharge_off), 0.25));

        const bool ehr_expressed = is_vent && !via_imaging;
        for (int var = 0; var < kDynamicCount; ++var) {
            const auto spec = variable_spec(var);
            ObservationSeries series;
            series.variable_id = var;
            double t = e.icu_admit + rng.uniform(0.1, spec.interval_lo);
            while (t < e.icu_discharge) {
                const double s = severity(t);
                double v = spec.mean + spec.sd * rng.normal();
                if (ehr_expressed) v += spec.drift * spec.sd * s;
                v = std::clamp(round_to(v, spec.round_to), spec.clamp_lo, spec.clamp_hi);
                const double ts = round_to(t, 0.01);
                const bool keep = !rng.bernoulli(cfg.dynamic_missing_rate);
                if (keep && (series.samples.empty() || ts > series.samples.back().first))
                    series.samples.emplace_back(ts, v);
                t += rng.uniform(spec.interval_lo, spec.interval_hi) * (1.0 - 0.3 * s);
            }
            if (!series.samples.empty()) e.observations.push_back(std::move(series));
        }

        if (is_vent) {
            const double t0r = round_to(t0_abs, 0.01);
            e.vent.peep_times = {t0r, t0r + 4.0};
            e.vent.fio2_times = {t0r, t0r + 4.0};
        } else if (rng.bernoulli(0.10)) {
            // lone FiO2 documentation without PEEP never defines an onset
            e.vent.fio2_times = {round_to(e.icu_admit + rng.uniform(0.0, discharge_off), 0.01)};
        }

        int study_no = 0;
        auto add_study = [&](double acquired, CxrSource source) {
            CxrStudy s;
            char sid[24];
            std::snprintf(sid, sizeof(sid), "%s_s%02d", e.encounter_id.c_str(), study_no++);
            s.study_id = sid;
            s.embedding_key = s.study_id;
            s.acquired_at = round_to(acquired, 0.01);
            s.source = source;
            e.cxr_studies.push_back(s);

            std::vector<float> emb(cfg.embedding_dim);
            const double shift = (is_vent && via_imaging) ? kEmbeddingShift * severity(acquired) : 0.0;
            for (uint32_t j = 0; j < cfg.embedding_dim; ++j)
                emb[j] = static_cast<float>(rng.normal() + shift * u[j]);
            out.table.entries.emplace(s.study_id, std::move(emb));
        };

        if (rng.bernoulli(0.25)) add_study(e.icu_admit - rng.uniform(1.0, 90.0), CxrSource::OTHER_DEPT);
        if (rng.bernoulli(0.92)) {
            double t = e.icu_admit + rng.uniform(0.5, 8.0);
            while (t < e.icu_discharge) {
                add_study(t, CxrSource::ICU);
                t += rng.uniform(10.0, 20.0) * (1.0 - 0.6 * severity(t));
            }
        }

        validate_encounter(e);
        out.encounters.push_back(std::move(e));
    }
    return out;
}

}  // namespace ventgate
