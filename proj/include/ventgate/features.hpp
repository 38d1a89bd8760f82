#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ventgate/cohort.hpp"

namespace ventgate {

// Dynamic-variable ids used by the criterion table and the synthetic generator.
constexpr int kVarHeartRate = 0;
constexpr int kVarRespRate = 1;
constexpr int kVarTemperature = 2;
constexpr int kVarSbp = 3;
constexpr int kVarDbp = 4;
constexpr int kVarMap = 5;
constexpr int kVarSpo2 = 6;
constexpr int kVarFio2 = 7;
constexpr int kVarPao2 = 8;
constexpr int kVarPaco2 = 9;
constexpr int kVarPh = 10;
constexpr int kVarWbc = 11;
constexpr int kVarPlatelets = 12;
constexpr int kVarBilirubin = 13;
constexpr int kVarCreatinine = 14;
constexpr int kVarBun = 15;
constexpr int kVarLactate = 16;
constexpr int kVarGcs = 17;

constexpr int kStaticCount =
    kDemographicCount + kComorbidityCount + kMedicationCategories + kCriterionCount;  // 92
constexpr int kDerivedPerVariable = 3;  // baseline, trend, time-since-last-measurement
constexpr int kDerivedCount = kDerivedPerVariable * kDynamicCount;                    // 150
constexpr int kFeatureCount = kStaticCount + kDynamicCount + kDerivedCount;           // 292

constexpr double kCarryForwardMaxHours = 24.0;
constexpr double kBaselineWindowHours = 72.0;
constexpr double kMedicationActiveWindowHours = 24.0;
constexpr uint32_t kFeatureSchemaVersion = 1;

const std::string& dynamic_variable_name(int id);
// Names of the kFeatureCount model-input columns, in schema order:
// demographics, comorbidities, medication flags, SIRS/SOFA criteria,
// dynamic block, baseline block, trend block, staleness block.
const std::vector<std::string>& feature_column_names();
// Columns as stored on disk: timestamp, features, raw per-variable recency.
const std::vector<std::string>& file_column_names();

enum class CellProvenance : uint8_t { STATIC = 0, OBSERVED = 1, FILLED = 2, IMPUTED = 3, DERIVED = 4 };

struct FeatureMatrix {
    std::string encounter_id;
    std::vector<double> timestamps;  // one per row, prediction grid order
    std::vector<float> values;       // rows x kFeatureCount
    std::vector<float> tslm;         // rows x kDynamicCount, hours since last observation
    std::vector<uint8_t> labels;     // rows
    std::vector<uint8_t> mask;       // rows x kFeatureCount provenance; empty after file load

    size_t rows() const { return timestamps.size(); }
    float at(size_t row, size_t col) const { return values[row * kFeatureCount + col]; }
};

// Per-variable means of observed hourly values, fit on the training split.
struct ImputationStats {
    std::vector<double> mean;
    bool fitted = false;
};

// Per-column affine scaling, fit on the training split after assembly.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> std;
    bool fitted = false;
};

// Median of samples falling in [grid[i], grid[i]+1h); even counts average the
// two middle values.
std::vector<std::optional<double>> bin_hourly(const ObservationSeries& series,
                                              const std::vector<double>& grid);

struct FilledSeries {
    std::vector<std::optional<double>> value;  // absent when staleness exceeds the cutoff
    std::vector<double> tslm;                  // hours since last observation; 0 when observed
};

// Carry the last observed value forward while its age stays within max_hours.
// Cells ahead of the first observation count staleness from the grid start.
FilledSeries forward_fill(const std::vector<std::optional<double>>& binned,
                          double max_hours = kCarryForwardMaxHours);

ImputationStats fit_imputation_stats(const std::vector<const Encounter*>& train_encounters);

// Replace cells still absent after carry-forward by the training mean.
void impute_mean(std::vector<std::optional<double>>& values, const ImputationStats& stats,
                 int variable_id);

struct DerivedSeries {
    std::vector<double> baseline;  // mean of observed values over the trailing 72h window
    std::vector<double> trend;     // latest observed value minus the observation before it
};

DerivedSeries derive_features(const std::vector<std::optional<double>>& binned_observed,
                              const std::vector<double>& final_values);

// Full per-encounter assembly over the prediction grid.
FeatureMatrix assemble(const Encounter& e, const std::optional<double>& t0,
                       const ImputationStats& stats);

Standardizer fit_standardizer(const std::vector<const FeatureMatrix*>& train_matrices);
void standardize(FeatureMatrix& fm, const Standardizer& scaler);

// Severity points per prediction row, for reporting alongside the binary target.
std::vector<int> severity_points_rows(const Encounter& e, const std::optional<double>& t0);

// ---- binary feature-matrix file ------------------------------------------------

std::string feature_matrix_to_bytes(const FeatureMatrix& fm);
FeatureMatrix feature_matrix_from_bytes(const std::string& bytes, const std::string& encounter_id);

void save_feature_matrix(const std::string& path, const FeatureMatrix& fm);
FeatureMatrix load_feature_matrix(const std::string& path, const std::string& encounter_id);

}  // namespace ventgate
