#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ventgate {

// Rank-statistic AUROC with ties counted half; exact over an integer
// accumulator in half-pair units. Throws on single-class input.
double auroc(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

struct RocPoint {
    double threshold = 0.0;
    double sensitivity = 0.0;
    double fpr = 0.0;  // 1 - specificity
};

struct RocCurve {
    std::vector<RocPoint> points;  // ascending threshold, one per distinct score
    double auroc = 0.0;
};

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

// Largest threshold (predict positive when score >= threshold) whose
// sensitivity on the validation data meets the target; candidates are the
// observed scores plus +infinity. Throws when no positives exist.
double select_threshold(const std::vector<double>& val_scores,
                        const std::vector<uint8_t>& val_labels,
                        double target_sensitivity = 0.60);

struct ConfusionCounts {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    int64_t total() const { return tp + fp + fn + tn; }
};

// One scored prediction row, tagged with its encounter.
struct PredRow {
    uint32_t encounter = 0;  // index into a caller-side encounter list
    double timestamp = 0.0;
    double score = 0.0;
    uint8_t label = 0;  // onset within (t, t+24]
};

struct EncounterConfusion {
    ConfusionCounts prediction_level;  // cells conditioned on the encounter's window state
    ConfusionCounts encounter_level;   // one cell per encounter (rollup)
};

// Prediction-level cells: within an encounter that has at least one positive
// label, every positive prediction is TP and every negative one FN; within an
// encounter with no positive labels, positive predictions are FP and negative
// ones TN. Rollup: a window-positive encounter counts detected when any of
// its label-positive rows carries a positive prediction; a window-negative
// encounter counts FP when any row does.
EncounterConfusion encounter_confusion(const std::vector<PredRow>& rows, size_t n_encounters,
                                       double threshold);

struct EvalReport {
    std::string name;
    std::optional<double> auroc;
    std::optional<double> threshold;
    std::optional<double> sensitivity, specificity, ppv, balanced_accuracy;
    ConfusionCounts counts;
    std::vector<RocPoint> roc;  // empty for binary predictors
};

// Ratio metrics from raw counts; undefined ratios stay absent. Binary
// predictors have no score ordering, so no AUROC. Throws on all-zero counts.
EvalReport binary_predictor_metrics(const ConfusionCounts& counts);

// Markdown comparison table, one row per report: AUC, specificity,
// sensitivity, PPV; absent values printed as "--". Requires >= 2 reports.
std::string compare(const std::vector<EvalReport>& reports);
std::string compare_csv(const std::vector<EvalReport>& reports);

std::string eval_report_to_json(const EvalReport& r);
EvalReport eval_report_from_json(const std::string& text);
std::string roc_to_csv(const std::vector<RocPoint>& points);

}  // namespace ventgate
