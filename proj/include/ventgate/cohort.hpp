#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ventgate {

constexpr int kDynamicCount = 50;
constexpr int kDemographicCount = 6;
constexpr int kComorbidityCount = 62;
constexpr int kMedicationCategories = 12;
constexpr int kCriterionCount = 12;  // SIRS + SOFA criterion columns

constexpr double kPredictionStartOffsetHours = 4.0;
constexpr double kPredictionHorizonHours = 24.0;
constexpr double kSurgeryBlackoutHours = 24.0;
constexpr double kMinStayHours = 5.0;

// One irregularly sampled clinical variable within an encounter.
struct ObservationSeries {
    int variable_id = 0;                             // index into the dynamic-variable schema
    std::vector<std::pair<double, double>> samples;  // (hours since epoch, value), strictly increasing
};

enum class CxrSource : uint8_t { ICU = 0, OTHER_DEPT = 1 };

struct CxrStudy {
    std::string study_id;
    double acquired_at = 0.0;
    CxrSource source = CxrSource::ICU;
    std::string embedding_key;
};

// PEEP/FiO2 documentation times; ventilation onset is derived from their
// first simultaneous recording.
struct VentRecord {
    std::vector<double> peep_times;
    std::vector<double> fio2_times;
    std::optional<double> t0;
};

struct Encounter {
    std::string encounter_id;
    double icu_admit = 0.0;
    double icu_discharge = 0.0;
    std::vector<double> demographics;       // 6 values
    std::vector<uint8_t> comorbidities;     // 62 binary flags
    std::vector<std::pair<int, double>> medication_events;  // (category 0..11, time)
    bool dnr = false;
    std::vector<double> surgery_times;
    bool pre_icu_ventilated = false;
    std::vector<ObservationSeries> observations;
    std::vector<CxrStudy> cxr_studies;
    VentRecord vent;
};

// Throws std::invalid_argument naming the first violated structural invariant.
void validate_encounter(const Encounter& e);

// Earliest time at which PEEP and FiO2 are both recorded within
// `tolerance_hours` of each other; of the first qualifying pair the earlier
// member is reported. Absent when no pair qualifies.
std::optional<double> derive_t0(const VentRecord& vent, double tolerance_hours = 0.0);

enum class ExclusionReason : uint8_t { MIN_STAY = 0, PRE_ICU_VENT, DNR, NO_OBSERVATIONS };

const char* exclusion_reason_name(ExclusionReason r);

struct InclusionResult {
    bool included = false;
    std::vector<ExclusionReason> reasons;
};

// `now` caps the observable part of the stay (prospective use); pass
// +infinity to judge the complete encounter.
InclusionResult apply_inclusion_criteria(const Encounter& e,
                                         double now = std::numeric_limits<double>::infinity());

// Hourly grid admit+4, admit+5, ... strictly below min(t0, discharge), with
// hours inside any surgery blackout [s, s+24] removed.
std::vector<double> prediction_timestamps(const Encounter& e, const std::optional<double>& t0);

// Clinical severity points per the labeling rule table. The PaO2/FiO2 branch
// takes precedence when both ratios are present; IMV-timing rows apply
// regardless of ratio availability. Negative ratios are rejected.
int severity_points(std::optional<double> pf_ratio, std::optional<double> sf_ratio,
                    bool imv_within_24h, bool imv_beyond_24h);

// 1 iff onset falls inside the look-ahead window (t, t+24].
int binary_imv_label(double t, const std::optional<double>& t0);

// ---- cohort file (one JSON object per line) ----------------------------------

std::string encounter_to_json_line(const Encounter& e);
Encounter encounter_from_json_line(const std::string& line);

void save_cohort(const std::string& path, const std::vector<Encounter>& cohort);
std::vector<Encounter> load_cohort(const std::string& path);

}  // namespace ventgate
