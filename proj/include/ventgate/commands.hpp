#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ventgate/dataset.hpp"
#include "ventgate/metrics.hpp"
#include "ventgate/nn.hpp"
#include "ventgate/synth.hpp"
#include "ventgate/train.hpp"

namespace ventgate {

struct RunConfig {
    std::string out_dir = "runs/demo";
    std::string cohort_path;       // default <out_dir>/cohort.jsonl
    std::string embeddings_path;   // default <out_dir>/embeddings.cxre
    std::string features_dir;      // default <out_dir>/features
    std::string checkpoints_dir;   // default <out_dir>/checkpoints
    std::string reports_dir;       // default <out_dir>/reports

    SynthConfig synth;
    TrainConfig train;
    SearchSpace search;
    std::vector<Variant> variants = {Variant::EHR_ONLY, Variant::CXR_ONLY, Variant::CONCAT,
                                     Variant::ATTENTION, Variant::GATED};
    double target_sensitivity = 0.60;
    uint64_t seed = 1;          // split assignment
    double train_frac = 0.64;   // encounter-level; remainder after val goes to test
    double val_frac = 0.16;
    bool use_embeddings = true;
};

// Fills path defaults, honors the VENTGATE_OUT override, checks distinctness.
void finalize_run_config(RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);  // partial objects override defaults
RunConfig load_run_config(const std::string& path);       // empty path -> defaults

struct GenSummary {
    uint32_t encounters = 0;
    uint32_t ventilated = 0;
    double event_rate = 0.0;
    uint32_t studies = 0;
    std::string format() const;  // cohort-characteristics table
};
GenSummary cmd_gen(const RunConfig& cfg);

struct FeaturizeSummary {
    uint32_t encounters_total = 0;
    uint32_t encounters_included = 0;
    std::map<std::string, uint32_t> excluded_by_reason;
    uint64_t rows_total = 0;
    uint64_t rows_aligned = 0;
    uint64_t rows_unmatched = 0;
    bool with_embeddings = false;
    std::string format() const;
};
FeaturizeSummary cmd_featurize(const RunConfig& cfg);

struct TrainSummary {
    std::string checkpoint_path;
    double best_val_auroc = 0.0;
    uint32_t best_epoch = 0;
    uint32_t epochs_run = 0;
};
TrainSummary cmd_train(const RunConfig& cfg, Variant variant);

struct EvalSummary {
    EvalReport report;             // prediction-level counts at the frozen threshold
    EncounterConfusion confusion;  // both granularities
    std::string report_path;
};
EvalSummary cmd_eval(const RunConfig& cfg, Variant variant);

// Two-column CSV (encounter_id,call) judged against derived onset presence.
EvalReport cmd_eval_physician(const RunConfig& cfg, const std::string& csv_path);

SearchResult cmd_search(const RunConfig& cfg, Variant variant);

std::string cmd_compare(const RunConfig& cfg, const std::vector<std::string>& report_paths);
std::string cmd_report(const RunConfig& cfg);  // auto-discovers per-variant + physician reports

// Central finite differences over every parameter of a freshly initialized
// model on a random batch; returns the worst symmetric relative error.
double gradcheck_max_error(Variant variant, const ModelDims& dims, size_t batch_size,
                           uint64_t seed, double step = 1e-5);

// The row dataset the training/eval commands operate on, rebuilt from the
// feature cache (and alignment when embeddings exist).
RowDataset load_dataset(const RunConfig& cfg);

int cli_main(const std::vector<std::string>& args);

}  // namespace ventgate
