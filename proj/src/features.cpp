#include "ventgate/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "ventgate/util.hpp"

namespace ventgate {

namespace {

const char* kNamedVariables[] = {
    "heart_rate", "resp_rate",  "temperature_c", "sbp",        "dbp",
    "map",        "spo2",       "fio2",          "pao2",       "paco2",
    "ph",         "wbc",        "platelets",     "bilirubin",  "creatinine",
    "bun",        "lactate",    "gcs",           "glucose",    "sodium",
    "potassium",  "chloride",   "bicarbonate",   "hemoglobin", "hematocrit",
    "albumin",    "alt",        "ast",           "troponin",   "crp",
};
constexpr int kNamedVariableCount = 30;

const char* kDemographicNames[] = {"age_years", "male", "height_cm", "weight_kg", "bmi",
                                   "charlson_index"};

const char* kCriterionNames[] = {
    "sirs_temp",        "sirs_hr",          "sirs_rr",         "sirs_wbc",
    "sofa_pf_lt_400",   "sofa_pf_lt_200",   "sofa_map_lt_70",  "sofa_gcs_lt_15",
    "sofa_bili_gt_1_2", "sofa_creat_gt_1_2", "sofa_plt_lt_150", "sofa_plt_lt_100",
};

// Criterion truth values from the current per-variable snapshot. Absent inputs
// never satisfy a criterion.
void evaluate_criteria(const std::vector<std::optional<double>>& current, double out[kCriterionCount]) {
    auto v = [&](int id) { return current[static_cast<size_t>(id)]; };
    auto flag = [](bool b) { return b ? 1.0 : 0.0; };

    const auto temp = v(kVarTemperature);
    const auto hr = v(kVarHeartRate);
    const auto rr = v(kVarRespRate);
    const auto paco2 = v(kVarPaco2);
    const auto wbc = v(kVarWbc);
    const auto map = v(kVarMap);
    const auto gcs = v(kVarGcs);
    const auto bili = v(kVarBilirubin);
    const auto creat = v(kVarCreatinine);
    const auto plt = v(kVarPlatelets);
    const auto pao2 = v(kVarPao2);
    const auto fio2 = v(kVarFio2);

    std::optional<double> pf;
    if (pao2 && fio2 && *fio2 > 0) pf = *pao2 / *fio2;

    out[0] = flag(temp && (*temp > 38.0 || *temp < 36.0));
    out[1] = flag(hr && *hr > 90.0);
    out[2] = flag((rr && *rr > 20.0) || (paco2 && *paco2 < 32.0));
    out[3] = flag(wbc && (*wbc > 12.0 || *wbc < 4.0));
    out[4] = flag(pf && *pf < 400.0);
    out[5] = flag(pf && *pf < 200.0);
    out[6] = flag(map && *map < 70.0);
    out[7] = flag(gcs && *gcs < 15.0);
    out[8] = flag(bili && *bili > 1.2);
    out[9] = flag(creat && *creat > 1.2);
    out[10] = flag(plt && *plt < 150.0);
    out[11] = flag(plt && *plt < 100.0);
}

}  // namespace

const std::string& dynamic_variable_name(int id) {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (int i = 0; i < kDynamicCount; ++i) {
            if (i < kNamedVariableCount)
                v.emplace_back(kNamedVariables[i]);
            else
                v.emplace_back("lab_" + std::to_string(i));
        }
        return v;
    }();
    return names.at(static_cast<size_t>(id));
}

const std::vector<std::string>& feature_column_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const char* n : kDemographicNames) v.emplace_back(std::string("demo.") + n);
        for (int i = 0; i < kComorbidityCount; ++i) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "comorb.%02d", i);
            v.emplace_back(buf);
        }
        for (int i = 0; i < kMedicationCategories; ++i) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "med.cat%02d", i);
            v.emplace_back(buf);
        }
        for (const char* n : kCriterionNames) v.emplace_back(std::string("crit.") + n);
        for (int i = 0; i < kDynamicCount; ++i) v.emplace_back("dyn." + dynamic_variable_name(i));
        for (int i = 0; i < kDynamicCount; ++i) v.emplace_back("base." + dynamic_variable_name(i));
        for (int i = 0; i < kDynamicCount; ++i) v.emplace_back("trend." + dynamic_variable_name(i));
        for (int i = 0; i < kDynamicCount; ++i) v.emplace_back("tslm." + dynamic_variable_name(i));
        return v;
    }();
    return names;
}

const std::vector<std::string>& file_column_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        v.emplace_back("timestamp");
        for (const auto& n : feature_column_names()) v.push_back(n);
        for (int i = 0; i < kDynamicCount; ++i) v.emplace_back("delta." + dynamic_variable_name(i));
        return v;
    }();
    return names;
}

std::vector<std::optional<double>> bin_hourly(const ObservationSeries& series,
                                              const std::vector<double>& grid) {
    std::vector<std::optional<double>> out(grid.size());
    std::vector<double> bucket;
    for (size_t i = 0; i < grid.size(); ++i) {
        bucket.clear();
        const double lo = grid[i];
        const double hi = grid[i] + 1.0;
        for (const auto& [t, v] : series.samples) {
            if (t >= lo && t < hi) bucket.push_back(v);
        }
        if (bucket.empty()) continue;
        std::sort(bucket.begin(), bucket.end());
        const size_t n = bucket.size();
        out[i] = (n % 2 == 1) ? bucket[n / 2] : 0.5 * (bucket[n / 2 - 1] + bucket[n / 2]);
    }
    return out;
}

FilledSeries forward_fill(const std::vector<std::optional<double>>& binned, double max_hours) {
    if (max_hours <= 0) throw std::invalid_argument("forward_fill: max_hours must be positive");
    FilledSeries out;
    out.value.resize(binned.size());
    out.tslm.resize(binned.size(), 0.0);

    std::optional<double> last_value;
    double last_index = 0.0;  // staleness counts from the grid start until something is seen
    for (size_t i = 0; i < binned.size(); ++i) {
        if (binned[i]) {
            last_value = binned[i];
            last_index = static_cast<double>(i);
            out.value[i] = binned[i];
            out.tslm[i] = 0.0;
            continue;
        }
        const double age = static_cast<double>(i) - last_index;
        out.tslm[i] = age;
        if (last_value && age <= max_hours) out.value[i] = last_value;
    }
    return out;
}

ImputationStats fit_imputation_stats(const std::vector<const Encounter*>& train_encounters) {
    std::vector<double> sum(kDynamicCount, 0.0);
    std::vector<int64_t> count(kDynamicCount, 0);

    for (const Encounter* e : train_encounters) {
        const auto t0 = derive_t0(e->vent);
        const auto rows = prediction_timestamps(*e, t0);
        if (rows.empty()) continue;
        const int n_bins = static_cast<int>(std::llround(rows.back() - e->icu_admit)) + 1;
        std::vector<double> grid(static_cast<size_t>(n_bins));
        for (int k = 0; k < n_bins; ++k) grid[static_cast<size_t>(k)] = e->icu_admit + k;
        for (const auto& series : e->observations) {
            const auto binned = bin_hourly(series, grid);
            for (const auto& v : binned) {
                if (v) {
                    sum[static_cast<size_t>(series.variable_id)] += *v;
                    count[static_cast<size_t>(series.variable_id)] += 1;
                }
            }
        }
    }

    ImputationStats stats;
    stats.mean.resize(kDynamicCount, 0.0);
    for (int i = 0; i < kDynamicCount; ++i)
        stats.mean[static_cast<size_t>(i)] =
            count[static_cast<size_t>(i)] > 0 ? sum[static_cast<size_t>(i)] / count[static_cast<size_t>(i)] : 0.0;
    stats.fitted = true;
    return stats;
}

void impute_mean(std::vector<std::optional<double>>& values, const ImputationStats& stats,
                 int variable_id) {
    if (!stats.fitted) throw std::invalid_argument("impute_mean: stats not fitted");
    const double mean = stats.mean.at(static_cast<size_t>(variable_id));
    for (auto& v : values)
        if (!v) v = mean;
}

DerivedSeries derive_features(const std::vector<std::optional<double>>& binned_observed,
                              const std::vector<double>& final_values) {
    const size_t n = binned_observed.size();
    DerivedSeries out;
    out.baseline.resize(n, 0.0);
    out.trend.resize(n, 0.0);

    const int window = static_cast<int>(kBaselineWindowHours);
    std::optional<double> last_obs, prev_obs;
    for (size_t k = 0; k < n; ++k) {
        if (binned_observed[k]) {
            prev_obs = last_obs;
            last_obs = binned_observed[k];
        }

        double sum = 0.0;
        int count = 0;
        for (int j = static_cast<int>(k) - window; j < static_cast<int>(k); ++j) {
            if (j < 0) continue;
            if (binned_observed[static_cast<size_t>(j)]) {
                sum += *binned_observed[static_cast<size_t>(j)];
                ++count;
            }
        }
        out.baseline[k] = count > 0 ? sum / count : final_values[k];
        out.trend[k] = (last_obs && prev_obs) ? *last_obs - *prev_obs : 0.0;
    }
    return out;
}

FeatureMatrix assemble(const Encounter& e, const std::optional<double>& t0,
                       const ImputationStats& stats) {
    if (!stats.fitted) throw std::invalid_argument("assemble: imputation stats not fitted");
    if (e.demographics.size() != kDemographicCount || e.comorbidities.size() != kComorbidityCount)
        throw std::invalid_argument("SCHEMA_MISMATCH: encounter static blocks have wrong arity");

    FeatureMatrix fm;
    fm.encounter_id = e.encounter_id;
    fm.timestamps = prediction_timestamps(e, t0);
    const size_t rows = fm.timestamps.size();
    fm.values.assign(rows * kFeatureCount, 0.0f);
    fm.tslm.assign(rows * kDynamicCount, 0.0f);
    fm.labels.assign(rows, 0);
    fm.mask.assign(rows * kFeatureCount, static_cast<uint8_t>(CellProvenance::STATIC));
    if (rows == 0) return fm;

    // Internal hourly grid from admission through the last prediction row.
    const int n_bins = static_cast<int>(std::llround(fm.timestamps.back() - e.icu_admit)) + 1;
    std::vector<double> grid(static_cast<size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) grid[static_cast<size_t>(k)] = e.icu_admit + k;

    struct VariableTrack {
        std::vector<std::optional<double>> observed;
        std::vector<std::optional<double>> filled;
        std::vector<double> tslm;
        std::vector<double> final_value;
        DerivedSeries derived;
    };
    std::vector<VariableTrack> tracks(kDynamicCount);
    for (int var = 0; var < kDynamicCount; ++var) {
        auto& tr = tracks[static_cast<size_t>(var)];
        tr.observed.assign(grid.size(), std::nullopt);
    }
    for (const auto& series : e.observations) {
        auto& tr = tracks[static_cast<size_t>(series.variable_id)];
        const auto binned = bin_hourly(series, grid);
        // multiple series may share a variable id; later ones win per bin
        for (size_t k = 0; k < binned.size(); ++k)
            if (binned[k]) tr.observed[k] = binned[k];
    }
    for (auto& tr : tracks) {
        auto filled = forward_fill(tr.observed);
        tr.filled = filled.value;
        tr.tslm = std::move(filled.tslm);
        auto imputed = tr.filled;
        impute_mean(imputed, stats, static_cast<int>(&tr - tracks.data()));
        tr.final_value.resize(imputed.size());
        for (size_t k = 0; k < imputed.size(); ++k) tr.final_value[k] = *imputed[k];
        tr.derived = derive_features(tr.observed, tr.final_value);
    }

    std::vector<std::optional<double>> snapshot(kDynamicCount);
    for (size_t row = 0; row < rows; ++row) {
        const double t = fm.timestamps[row];
        const size_t k = static_cast<size_t>(std::llround(t - e.icu_admit));
        float* out = &fm.values[row * kFeatureCount];
        uint8_t* prov = &fm.mask[row * kFeatureCount];
        size_t col = 0;

        for (int i = 0; i < kDemographicCount; ++i) out[col++] = static_cast<float>(e.demographics[static_cast<size_t>(i)]);
        for (int i = 0; i < kComorbidityCount; ++i) out[col++] = static_cast<float>(e.comorbidities[static_cast<size_t>(i)]);

        for (int cat = 0; cat < kMedicationCategories; ++cat) {
            bool active = false;
            for (const auto& [c, te] : e.medication_events) {
                if (c == cat && te <= t && t - te < kMedicationActiveWindowHours) {
                    active = true;
                    break;
                }
            }
            out[col++] = active ? 1.0f : 0.0f;
        }

        for (int var = 0; var < kDynamicCount; ++var) snapshot[static_cast<size_t>(var)] = tracks[static_cast<size_t>(var)].filled[k];
        double crit[kCriterionCount];
        evaluate_criteria(snapshot, crit);
        for (int i = 0; i < kCriterionCount; ++i) out[col++] = static_cast<float>(crit[i]);

        for (int var = 0; var < kDynamicCount; ++var) {
            const auto& tr = tracks[static_cast<size_t>(var)];
            out[col] = static_cast<float>(tr.final_value[k]);
            prov[col] = static_cast<uint8_t>(tr.observed[k]   ? CellProvenance::OBSERVED
                                             : tr.filled[k]   ? CellProvenance::FILLED
                                                              : CellProvenance::IMPUTED);
            ++col;
            fm.tslm[row * kDynamicCount + static_cast<size_t>(var)] = static_cast<float>(tr.tslm[k]);
        }
        for (int var = 0; var < kDynamicCount; ++var) {
            out[col] = static_cast<float>(tracks[static_cast<size_t>(var)].derived.baseline[k]);
            prov[col++] = static_cast<uint8_t>(CellProvenance::DERIVED);
        }
        for (int var = 0; var < kDynamicCount; ++var) {
            out[col] = static_cast<float>(tracks[static_cast<size_t>(var)].derived.trend[k]);
            prov[col++] = static_cast<uint8_t>(CellProvenance::DERIVED);
        }
        for (int var = 0; var < kDynamicCount; ++var) {
            out[col] = static_cast<float>(tracks[static_cast<size_t>(var)].tslm[k]);
            prov[col++] = static_cast<uint8_t>(CellProvenance::DERIVED);
        }

        fm.labels[row] = static_cast<uint8_t>(binary_imv_label(t, t0));
    }
    return fm;
}

Standardizer fit_standardizer(const std::vector<const FeatureMatrix*>& train_matrices) {
    Standardizer s;
    s.mean.assign(kFeatureCount, 0.0);
    s.std.assign(kFeatureCount, 1.0);

    int64_t n = 0;
    for (const auto* fm : train_matrices) n += static_cast<int64_t>(fm->rows());
    if (n == 0) {
        s.fitted = true;
        return s;
    }
    for (const auto* fm : train_matrices)
        for (size_t r = 0; r < fm->rows(); ++r)
            for (int c = 0; c < kFeatureCount; ++c) s.mean[static_cast<size_t>(c)] += fm->at(r, static_cast<size_t>(c));
    for (auto& m : s.mean) m /= static_cast<double>(n);

    std::vector<double> ss(kFeatureCount, 0.0);
    for (const auto* fm : train_matrices)
        for (size_t r = 0; r < fm->rows(); ++r)
            for (int c = 0; c < kFeatureCount; ++c) {
                const double d = fm->at(r, static_cast<size_t>(c)) - s.mean[static_cast<size_t>(c)];
                ss[static_cast<size_t>(c)] += d * d;
            }
    for (int c = 0; c < kFeatureCount; ++c) {
        const double var = ss[static_cast<size_t>(c)] / static_cast<double>(n);
        s.std[static_cast<size_t>(c)] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    s.fitted = true;
    return s;
}

void standardize(FeatureMatrix& fm, const Standardizer& scaler) {
    if (!scaler.fitted) throw std::invalid_argument("standardize: scaler not fitted");
    for (size_t r = 0; r < fm.rows(); ++r)
        for (int c = 0; c < kFeatureCount; ++c) {
            float& v = fm.values[r * kFeatureCount + static_cast<size_t>(c)];
            v = static_cast<float>((v - scaler.mean[static_cast<size_t>(c)]) / scaler.std[static_cast<size_t>(c)]);
        }
}

std::vector<int> severity_points_rows(const Encounter& e, const std::optional<double>& t0) {
    const auto rows = prediction_timestamps(e, t0);
    std::vector<int> points(rows.size(), 0);
    if (rows.empty()) return points;

    const int n_bins = static_cast<int>(std::llround(rows.back() - e.icu_admit)) + 1;
    std::vector<double> grid(static_cast<size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) grid[static_cast<size_t>(k)] = e.icu_admit + k;

    auto filled_for = [&](int var_id) {
        std::vector<std::optional<double>> observed(grid.size());
        for (const auto& series : e.observations) {
            if (series.variable_id != var_id) continue;
            const auto binned = bin_hourly(series, grid);
            for (size_t k = 0; k < binned.size(); ++k)
                if (binned[k]) observed[k] = binned[k];
        }
        return forward_fill(observed).value;
    };
    const auto pao2 = filled_for(kVarPao2);
    const auto spo2 = filled_for(kVarSpo2);
    const auto fio2 = filled_for(kVarFio2);

    for (size_t row = 0; row < rows.size(); ++row) {
        const double t = rows[row];
        const size_t k = static_cast<size_t>(std::llround(t - e.icu_admit));
        std::optional<double> pf, sf;
        if (pao2[k] && fio2[k] && *fio2[k] > 0) pf = *pao2[k] / *fio2[k];
        if (spo2[k] && fio2[k] && *fio2[k] > 0) sf = *spo2[k] / *fio2[k];
        const bool imv_within = binary_imv_label(t, t0) == 1;
        const bool imv_beyond = t0.has_value() && *t0 > t + kPredictionHorizonHours;
        points[row] = severity_points(pf, sf, imv_within, imv_beyond);
    }
    return points;
}

// ---- binary file format ----------------------------------------------------------
//
// magic "FMX1", u32 row count, u32 column count, u32 schema version,
// row-major f32 cells (timestamp, feature columns, raw recency columns),
// then one label byte per row.

namespace {
constexpr char kFmxMagic[4] = {'F', 'M', 'X', '1'};
constexpr uint32_t kFileColumns = 1 + kFeatureCount + kDynamicCount;
}  // namespace

std::string feature_matrix_to_bytes(const FeatureMatrix& fm) {
    std::string out;
    const uint32_t rows = static_cast<uint32_t>(fm.rows());
    out.reserve(16 + static_cast<size_t>(rows) * (kFileColumns * 4 + 1));
    out.append(kFmxMagic, 4);
    put_u32(out, rows);
    put_u32(out, kFileColumns);
    put_u32(out, kFeatureSchemaVersion);
    for (size_t r = 0; r < rows; ++r) {
        put_f32(out, static_cast<float>(fm.timestamps[r]));
        for (int c = 0; c < kFeatureCount; ++c) put_f32(out, fm.values[r * kFeatureCount + static_cast<size_t>(c)]);
        for (int c = 0; c < kDynamicCount; ++c) put_f32(out, fm.tslm[r * kDynamicCount + static_cast<size_t>(c)]);
    }
    for (size_t r = 0; r < rows; ++r) out.push_back(static_cast<char>(fm.labels[r]));
    return out;
}

FeatureMatrix feature_matrix_from_bytes(const std::string& bytes, const std::string& encounter_id) {
    ByteReader in(bytes);
    const std::string magic = in.bytes(4);
    if (std::memcmp(magic.data(), kFmxMagic, 4) != 0)
        throw std::runtime_error("BAD_MAGIC: not a feature-matrix file");
    const uint32_t rows = in.u32();
    const uint32_t cols = in.u32();
    if (cols != kFileColumns) throw std::runtime_error("SCHEMA_MISMATCH: unexpected column count");
    const uint32_t version = in.u32();
    if (version != kFeatureSchemaVersion)
        throw std::runtime_error("SCHEMA_MISMATCH: unsupported schema version");

    FeatureMatrix fm;
    fm.encounter_id = encounter_id;
    fm.timestamps.resize(rows);
    fm.values.resize(static_cast<size_t>(rows) * kFeatureCount);
    fm.tslm.resize(static_cast<size_t>(rows) * kDynamicCount);
    fm.labels.resize(rows);
    for (uint32_t r = 0; r < rows; ++r) {
        fm.timestamps[r] = in.f32();
        for (int c = 0; c < kFeatureCount; ++c) fm.values[static_cast<size_t>(r) * kFeatureCount + static_cast<size_t>(c)] = in.f32();
        for (int c = 0; c < kDynamicCount; ++c) fm.tslm[static_cast<size_t>(r) * kDynamicCount + static_cast<size_t>(c)] = in.f32();
    }
    for (uint32_t r = 0; r < rows; ++r) fm.labels[r] = static_cast<uint8_t>(in.bytes(1)[0]);
    if (!in.at_end()) throw std::runtime_error("SCHEMA_MISMATCH: trailing bytes in feature file");
    return fm;
}

void save_feature_matrix(const std::string& path, const FeatureMatrix& fm) {
    write_file(path, feature_matrix_to_bytes(fm));
}

FeatureMatrix load_feature_matrix(const std::string& path, const std::string& encounter_id) {
    return feature_matrix_from_bytes(read_file(path), encounter_id);
}

}  // namespace ventgate
