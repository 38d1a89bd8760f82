#pragma once

#include <cstdint>
#include <vector>

#include "ventgate/cohort.hpp"
#include "ventgate/cxr.hpp"

namespace ventgate {

struct SynthConfig {
    uint64_t seed = 1;
    uint32_t n_encounters = 1000;
    double event_rate = 0.08;          // ventilated fraction, assigned by quota
    double dynamic_missing_rate = 0.2; // per-sample drop probability
    uint32_t embedding_dim = 32;
    // fraction of ventilated encounters whose deterioration shows only in the
    // imaging channel; the rest express it only in the dynamic EHR variables
    double context_gate_prob = 0.5;
    uint32_t horizon_hours = 48;       // scale of stay lengths and onset times
};

void validate_synth_config(const SynthConfig& cfg);

struct SynthOutput {
    std::vector<Encounter> encounters;
    CxrEmbeddingTable table;
};

// Deterministic per seed: one generator stream, fixed draw order. A two-state
// deterioration latent ramps over the 30 hours before onset and drives vitals
// drift, imaging cadence, and embedding displacement along one global
// direction; comorbidity flag 0 records which channel a ventilated encounter
// expresses (and is Bernoulli(context_gate_prob) noise for the rest, so the
// flag alone carries no label signal).
SynthOutput generate(const SynthConfig& cfg);

}  // namespace ventgate
