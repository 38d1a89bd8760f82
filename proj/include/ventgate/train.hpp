#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ventgate/dataset.hpp"
#include "ventgate/nn.hpp"

namespace ventgate {

struct TrainConfig {
    double learning_rate = 1e-3;
    uint32_t batch_size = 128;
    uint32_t max_epochs = 30;
    uint32_t patience = 3;
    double l2_coefficient = 0.0;  // weight matrices only, not biases or decay rates
    double dropout_rate = 0.0;
    uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double pos_weight = 1.0;  // optional up-weighting of positive rows

    // architecture knobs, part of the search space
    uint32_t d = 64;
    uint32_t hidden = 64;
    uint32_t depth = 2;
};

// Mean of -[y ln p + (1-y) ln(1-p)], probabilities clamped at 1e-12.
double bce_loss(const std::vector<double>& p, const std::vector<uint8_t>& y);

struct AdamState {
    ModelParams m, v;  // first/second moments, same shapes as the parameters
    uint64_t step = 0;
};
AdamState make_adam_state(const ModelParams& p);

// Standard bias-corrected Adam update, in the fixed tensor order.
void adam_step(ModelParams& params, ModelParams& grads, AdamState& state, const TrainConfig& cfg);

struct EpochStats {
    uint32_t epoch = 0;
    double train_loss = 0.0;
    double val_auroc = 0.0;
};

struct TrainResult {
    ModelParams params;  // checkpoint with the best validation AUROC
    std::vector<EpochStats> history;
    double best_val_auroc = 0.0;
    uint32_t best_epoch = 0;
};

// Full training loop: seeded shuffling, minibatch Adam, early stopping on
// validation AUROC with the configured patience. Throws on empty splits,
// single-class splits, or encounter leakage across splits.
TrainResult train(Variant variant, const RowDataset& data, const TrainConfig& cfg);

std::vector<double> predict_rows(const ModelParams& p, const RowDataset& data,
                                 const std::vector<uint32_t>& rows);

// ---- hyperparameter search -----------------------------------------------------

struct ParamRange {
    double lo = 0.0, hi = 0.0;
    bool log_scale = false;
};
struct IntRange {
    uint32_t lo = 0, hi = 0;
};

struct SearchSpace {
    ParamRange learning_rate{1e-4, 1e-2, true};
    IntRange batch_size{32, 256};
    IntRange hidden{16, 96};
    IntRange latent{8, 64};
    ParamRange l2{1e-7, 1e-3, true};
    ParamRange dropout{0.0, 0.5, false};
    uint32_t trials = 10;
    uint64_t seed = 1;
};

struct TrialRecord {
    uint32_t trial_id = 0;
    TrainConfig config;
    double val_auroc = 0.0;
    double wall_seconds = 0.0;
};

struct SearchResult {
    TrainConfig best;
    double best_val_auroc = 0.0;
    std::vector<TrialRecord> trials;
};

// Seeded uniform/log-uniform sampling over the space; ties keep the earliest
// trial. Substitutes for a Bayesian optimizer with a reproducible, dependency
// free procedure over the same knobs.
SearchResult random_search(const SearchSpace& space, Variant variant, const RowDataset& data,
                           const TrainConfig& base);

std::string trials_to_csv(const std::vector<TrialRecord>& trials);

}  // namespace ventgate
