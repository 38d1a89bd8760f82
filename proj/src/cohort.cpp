#include "ventgate/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "ventgate/util.hpp"

namespace ventgate {

void validate_encounter(const Encounter& e) {
    auto fail = [&](const std::string& what) {
        throw std::invalid_argument("INVALID_ENCOUNTER: " + e.encounter_id + ": " + what);
    };
    if (e.encounter_id.empty()) fail("empty encounter_id");
    if (!std::isfinite(e.icu_admit) || !std::isfinite(e.icu_discharge)) fail("non-finite stay bounds");
    if (!(e.icu_admit < e.icu_discharge)) fail("icu_admit must precede icu_discharge");
    if (e.demographics.size() != kDemographicCount) fail("demographics must have 6 values");
    if (e.comorbidities.size() != kComorbidityCount) fail("comorbidities must have 62 flags");
    for (uint8_t c : e.comorbidities)
        if (c > 1) fail("comorbidity flags must be 0/1");
    for (const auto& [cat, t] : e.medication_events) {
        if (cat < 0 || cat >= kMedicationCategories) fail("medication category out of range");
        if (!std::isfinite(t)) fail("non-finite medication time");
    }
    for (double t : e.surgery_times)
        if (!std::isfinite(t)) fail("non-finite surgery time");
    for (const auto& series : e.observations) {
        if (series.variable_id < 0 || series.variable_id >= kDynamicCount)
            fail("observation variable_id out of range");
        double prev = -std::numeric_limits<double>::infinity();
        for (const auto& [t, v] : series.samples) {
            if (!std::isfinite(t) || !std::isfinite(v)) fail("non-finite observation sample");
            if (!(t > prev)) fail("observation timestamps must be strictly increasing");
            prev = t;
        }
    }
    for (const auto& s : e.cxr_studies) {
        if (s.study_id.empty()) fail("empty study_id");
        if (!std::isfinite(s.acquired_at)) fail("non-finite acquisition time");
        if (s.embedding_key.empty()) fail("empty embedding_key");
    }
    for (double t : e.vent.peep_times)
        if (!std::isfinite(t)) fail("non-finite PEEP time");
    for (double t : e.vent.fio2_times)
        if (!std::isfinite(t)) fail("non-finite FiO2 time");
}

std::optional<double> derive_t0(const VentRecord& vent, double tolerance_hours) {
    if (tolerance_hours < 0)
        throw std::invalid_argument("derive_t0: tolerance_hours must be >= 0");
    std::optional<double> best;
    for (double p : vent.peep_times) {
        for (double f : vent.fio2_times) {
            if (std::abs(p - f) <= tolerance_hours) {
                const double candidate = std::min(p, f);
                if (!best || candidate < *best) best = candidate;
            }
        }
    }
    return best;
}

const char* exclusion_reason_name(ExclusionReason r) {
    switch (r) {
        case ExclusionReason::MIN_STAY: return "MIN_STAY";
        case ExclusionReason::PRE_ICU_VENT: return "PRE_ICU_VENT";
        case ExclusionReason::DNR: return "DNR";
        case ExclusionReason::NO_OBSERVATIONS: return "NO_OBSERVATIONS";
    }
    return "?";
}

InclusionResult apply_inclusion_criteria(const Encounter& e, double now) {
    InclusionResult r;
    const double stay_end = std::min(e.icu_discharge, now);
    if (stay_end - e.icu_admit < kMinStayHours) r.reasons.push_back(ExclusionReason::MIN_STAY);
    if (e.pre_icu_ventilated) r.reasons.push_back(ExclusionReason::PRE_ICU_VENT);
    if (e.dnr) r.reasons.push_back(ExclusionReason::DNR);

    const double prediction_start = e.icu_admit + kPredictionStartOffsetHours;
    bool any_obs = false;
    for (const auto& series : e.observations) {
        for (const auto& [t, v] : series.samples) {
            if (t < prediction_start) {
                any_obs = true;
                break;
            }
        }
        if (any_obs) break;
    }
    if (!any_obs) r.reasons.push_back(ExclusionReason::NO_OBSERVATIONS);

    r.included = r.reasons.empty();
    return r;
}

std::vector<double> prediction_timestamps(const Encounter& e, const std::optional<double>& t0) {
    double stop = e.icu_discharge;
    if (t0 && *t0 < stop) stop = *t0;

    std::vector<double> grid;
    for (double t = e.icu_admit + kPredictionStartOffsetHours; t < stop; t += 1.0) {
        bool blocked = false;
        for (double s : e.surgery_times) {
            if (t >= s && t <= s + kSurgeryBlackoutHours) {
                blocked = true;
                break;
            }
        }
        if (!blocked) grid.push_back(t);
    }
    return grid;
}

int severity_points(std::optional<double> pf_ratio, std::optional<double> sf_ratio,
                    bool imv_within_24h, bool imv_beyond_24h) {
    if ((pf_ratio && *pf_ratio < 0) || (sf_ratio && *sf_ratio < 0))
        throw std::invalid_argument("severity_points: negative oxygenation ratio");

    std::optional<double> ratio;
    double low = 0, high = 0;
    if (pf_ratio) {
        ratio = pf_ratio;
        low = 200.0;
        high = 300.0;
    } else if (sf_ratio) {
        ratio = sf_ratio;
        low = 141.0;
        high = 221.0;
    }

    int points = 0;
    if (ratio && *ratio > low && *ratio <= high) points = std::max(points, 1);
    if (ratio && *ratio <= low) points = std::max(points, 2);
    if (imv_within_24h) points = std::max(points, 3);
    if (ratio && *ratio <= low && imv_within_24h) points = std::max(points, 4);
    if (imv_beyond_24h) points = std::max(points, 5);
    return points;
}

int binary_imv_label(double t, const std::optional<double>& t0) {
    return (t0 && t < *t0 && *t0 <= t + kPredictionHorizonHours) ? 1 : 0;
}

// ---- JSONL serialization -------------------------------------------------------

using ojson = nlohmann::ordered_json;

std::string encounter_to_json_line(const Encounter& e) {
    ojson j;
    j["encounter_id"] = e.encounter_id;
    j["icu_admit"] = e.icu_admit;
    j["icu_discharge"] = e.icu_discharge;
    j["demographics"] = e.demographics;
    j["comorbidities"] = e.comorbidities;
    ojson meds = ojson::array();
    for (const auto& [cat, t] : e.medication_events) meds.push_back(ojson::array({cat, t}));
    j["medications"] = std::move(meds);
    j["dnr"] = e.dnr;
    j["surgeries"] = e.surgery_times;
    j["pre_icu_ventilated"] = e.pre_icu_ventilated;
    ojson obs = ojson::array();
    for (const auto& series : e.observations) {
        ojson s;
        s["variable_id"] = series.variable_id;
        ojson samples = ojson::array();
        for (const auto& [t, v] : series.samples) samples.push_back(ojson::array({t, v}));
        s["samples"] = std::move(samples);
        obs.push_back(std::move(s));
    }
    j["observations"] = std::move(obs);
    ojson studies = ojson::array();
    for (const auto& s : e.cxr_studies) {
        ojson o;
        o["study_id"] = s.study_id;
        o["acquired_at"] = s.acquired_at;
        o["source"] = s.source == CxrSource::ICU ? "ICU" : "OTHER_DEPT";
        o["embedding_key"] = s.embedding_key;
        studies.push_back(std::move(o));
    }
    j["cxr_studies"] = std::move(studies);
    j["peep_times"] = e.vent.peep_times;
    j["fio2_times"] = e.vent.fio2_times;
    return j.dump();
}

Encounter encounter_from_json_line(const std::string& line) {
    const ojson j = ojson::parse(line);
    Encounter e;
    e.encounter_id = j.at("encounter_id").get<std::string>();
    e.icu_admit = j.at("icu_admit").get<double>();
    e.icu_discharge = j.at("icu_discharge").get<double>();
    e.demographics = j.at("demographics").get<std::vector<double>>();
    e.comorbidities = j.at("comorbidities").get<std::vector<uint8_t>>();
    for (const auto& m : j.at("medications"))
        e.medication_events.emplace_back(m.at(0).get<int>(), m.at(1).get<double>());
    e.dnr = j.at("dnr").get<bool>();
    e.surgery_times = j.at("surgeries").get<std::vector<double>>();
    e.pre_icu_ventilated = j.at("pre_icu_ventilated").get<bool>();
    for (const auto& s : j.at("observations")) {
        ObservationSeries series;
        series.variable_id = s.at("variable_id").get<int>();
        for (const auto& sample : s.at("samples"))
            series.samples.emplace_back(sample.at(0).get<double>(), sample.at(1).get<double>());
        e.observations.push_back(std::move(series));
    }
    for (const auto& o : j.at("cxr_studies")) {
        CxrStudy s;
        s.study_id = o.at("study_id").get<std::string>();
        s.acquired_at = o.at("acquired_at").get<double>();
        const std::string src = o.at("source").get<std::string>();
        if (src == "ICU")
            s.source = CxrSource::ICU;
        else if (src == "OTHER_DEPT")
            s.source = CxrSource::OTHER_DEPT;
        else
            throw std::runtime_error("SCHEMA_MISMATCH: unknown cxr source " + src);
        s.embedding_key = o.at("embedding_key").get<std::string>();
        e.cxr_studies.push_back(std::move(s));
    }
    e.vent.peep_times = j.at("peep_times").get<std::vector<double>>();
    e.vent.fio2_times = j.at("fio2_times").get<std::vector<double>>();
    return e;
}

void save_cohort(const std::string& path, const std::vector<Encounter>& cohort) {
    std::string out;
    for (const auto& e : cohort) {
        out += encounter_to_json_line(e);
        out += '\n';
    }
    write_file(path, out);
}

std::vector<Encounter> load_cohort(const std::string& path) {
    std::vector<Encounter> cohort;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        cohort.push_back(encounter_from_json_line(line));
    }
    return cohort;
}

}  // namespace ventgate
