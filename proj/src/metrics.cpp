#include "ventgate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "ventgate/util.hpp"

namespace ventgate {

namespace {

struct ClassTotals {
    int64_t pos = 0, neg = 0;
};

ClassTotals class_totals(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("LENGTH_MISMATCH: scores vs labels");
    ClassTotals t;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (!std::isfinite(scores[i])) throw std::invalid_argument("NON_FINITE_SCORE");
        (labels[i] ? t.pos : t.neg) += 1;
    }
    return t;
}

// acc2 accumulates 2 per positive>negative pair and 1 per tied pair, so the
// final division is the only inexact step.
int64_t pair_wins_doubled(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    int64_t acc2 = 0;
    int64_t neg_below = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        int64_t tie_pos = 0, tie_neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] ? tie_pos : tie_neg) += 1;
            ++j;
        }
        acc2 += tie_pos * (2 * neg_below + tie_neg);
        neg_below += tie_neg;
        i = j;
    }
    return acc2;
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    const auto t = class_totals(scores, labels);
    if (t.pos == 0 || t.neg == 0)
        throw std::invalid_argument("SINGLE_CLASS: AUROC needs both classes");
    return static_cast<double>(pair_wins_doubled(scores, labels)) /
           (2.0 * static_cast<double>(t.pos) * static_cast<double>(t.neg));
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    const auto t = class_totals(scores, labels);
    if (t.pos == 0 || t.neg == 0)
        throw std::invalid_argument("SINGLE_CLASS: ROC needs both classes");

    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    int64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        const double thr = scores[order[i]];
        while (i < order.size() && scores[order[i]] == thr) {
            (labels[order[i]] ? tp : fp) += 1;
            ++i;
        }
        curve.points.push_back({thr, static_cast<double>(tp) / static_cast<double>(t.pos),
                                static_cast<double>(fp) / static_cast<double>(t.neg)});
    }
    std::reverse(curve.points.begin(), curve.points.end());  // ascending threshold
    curve.auroc = static_cast<double>(pair_wins_doubled(scores, labels)) /
                  (2.0 * static_cast<double>(t.pos) * static_cast<double>(t.neg));
    return curve;
}

double select_threshold(const std::vector<double>& val_scores,
                        const std::vector<uint8_t>& val_labels, double target_sensitivity) {
    const auto t = class_totals(val_scores, val_labels);
    if (t.pos == 0) throw std::invalid_argument("NO_POSITIVES: threshold needs validation positives");

    std::vector<double> candidates = val_scores;
    candidates.push_back(std::numeric_limits<double>::infinity());
    std::sort(candidates.begin(), candidates.end(), std::greater<>());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    std::vector<double> pos_scores;
    for (size_t i = 0; i < val_labels.size(); ++i)
        if (val_labels[i]) pos_scores.push_back(val_scores[i]);
    std::sort(pos_scores.begin(), pos_scores.end());

    for (double thr : candidates) {
        // positives with score >= thr
        const auto it = std::lower_bound(pos_scores.begin(), pos_scores.end(), thr);
        const double sens =
            static_cast<double>(pos_scores.end() - it) / static_cast<double>(t.pos);
        if (sens >= target_sensitivity) return thr;
    }
    return -std::numeric_limits<double>::infinity();  // unreachable: -inf candidate yields sens 1
}

EncounterConfusion encounter_confusion(const std::vector<PredRow>& rows, size_t n_encounters,
                                       double threshold) {
    std::vector<uint8_t> window_positive(n_encounters, 0);
    for (const auto& r : rows) {
        if (r.encounter >= n_encounters)
            throw std::invalid_argument("MISALIGNED: row references unknown encounter");
        if (r.label) window_positive[r.encounter] = 1;
    }

    EncounterConfusion out;
    std::vector<uint8_t> any_positive_pred(n_encounters, 0);
    std::vector<uint8_t> detected_in_window(n_encounters, 0);
    std::vector<uint8_t> seen(n_encounters, 0);

    for (const auto& r : rows) {
        seen[r.encounter] = 1;
        const bool pred = r.score >= threshold;
        if (pred) any_positive_pred[r.encounter] = 1;
        if (pred && r.label) detected_in_window[r.encounter] = 1;
        if (window_positive[r.encounter]) {
            pred ? ++out.prediction_level.tp : ++out.prediction_level.fn;
        } else {
            pred ? ++out.prediction_level.fp : ++out.prediction_level.tn;
        }
    }

    for (size_t e = 0; e < n_encounters; ++e) {
        if (!seen[e]) continue;
        if (window_positive[e]) {
            detected_in_window[e] ? ++out.encounter_level.tp : ++out.encounter_level.fn;
        } else {
            any_positive_pred[e] ? ++out.encounter_level.fp : ++out.encounter_level.tn;
        }
    }
    return out;
}

EvalReport binary_predictor_metrics(const ConfusionCounts& counts) {
    if (counts.tp < 0 || counts.fp < 0 || counts.fn < 0 || counts.tn < 0)
        throw std::invalid_argument("NEGATIVE_COUNTS");
    if (counts.total() == 0) throw std::invalid_argument("EMPTY_COUNTS");

    EvalReport r;
    r.counts = counts;
    if (counts.tp + counts.fn > 0)
        r.sensitivity = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
    if (counts.tn + counts.fp > 0)
        r.specificity = static_cast<double>(counts.tn) / static_cast<double>(counts.tn + counts.fp);
    if (counts.tp + counts.fp > 0)
        r.ppv = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
    if (r.sensitivity && r.specificity)
        r.balanced_accuracy = 0.5 * (*r.sensitivity + *r.specificity);
    return r;
}

namespace {
std::string cell(const std::optional<double>& v) { return v ? fmt_fixed(*v, 3) : "--"; }
}

std::string compare(const std::vector<EvalReport>& reports) {
    if (reports.size() < 2) throw std::invalid_argument("NEED_TWO_REPORTS: comparison needs >= 2");
    std::string out;
    out += "| Predictor | AUC | Specificity | Sensitivity | PPV |\n";
    out += "|---|---|---|---|---|\n";
    for (const auto& r : reports) {
        out += "| " + r.name + " | " + cell(r.auroc) + " | " + cell(r.specificity) + " | " +
               cell(r.sensitivity) + " | " + cell(r.ppv) + " |\n";
    }
    return out;
}

std::string compare_csv(const std::vector<EvalReport>& reports) {
    if (reports.size() < 2) throw std::invalid_argument("NEED_TWO_REPORTS: comparison needs >= 2");
    std::string out = "predictor,auc,specificity,sensitivity,ppv\n";
    for (const auto& r : reports) {
        out += r.name + "," + cell(r.auroc) + "," + cell(r.specificity) + "," +
               cell(r.sensitivity) + "," + cell(r.ppv) + "\n";
    }
    return out;
}

// ---- report files ------------------------------------------------------------------

using ojson = nlohmann::ordered_json;

namespace {
void put_opt(ojson& j, const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
    else j[key] = nullptr;
}
std::optional<double> get_opt(const ojson& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}
}  // namespace

std::string eval_report_to_json(const EvalReport& r) {
    ojson j;
    j["name"] = r.name;
    put_opt(j, "auroc", r.auroc);
    put_opt(j, "threshold", r.threshold);
    put_opt(j, "sensitivity", r.sensitivity);
    put_opt(j, "specificity", r.specificity);
    put_opt(j, "ppv", r.ppv);
    put_opt(j, "balanced_accuracy", r.balanced_accuracy);
    j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}};
    ojson roc = ojson::array();
    for (const auto& pt : r.roc) roc.push_back(ojson::array({pt.threshold, pt.sensitivity, pt.fpr}));
    j["roc"] = std::move(roc);
    return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(const std::string& text) {
    const ojson j = ojson::parse(text);
    EvalReport r;
    r.name = j.at("name").get<std::string>();
    r.auroc = get_opt(j, "auroc");
    r.threshold = get_opt(j, "threshold");
    r.sensitivity = get_opt(j, "sensitivity");
    r.specificity = get_opt(j, "specificity");
    r.ppv = get_opt(j, "ppv");
    r.balanced_accuracy = get_opt(j, "balanced_accuracy");
    const auto& c = j.at("counts");
    r.counts.tp = c.at("tp").get<int64_t>();
    r.counts.fp = c.at("fp").get<int64_t>();
    r.counts.fn = c.at("fn").get<int64_t>();
    r.counts.tn = c.at("tn").get<int64_t>();
    for (const auto& pt : j.at("roc"))
        r.roc.push_back({pt.at(0).get<double>(), pt.at(1).get<double>(), pt.at(2).get<double>()});
    return r;
}

std::string roc_to_csv(const std::vector<RocPoint>& points) {
    std::string out = "threshold,sensitivity,fpr\n";
    for (const auto& pt : points)
        out += fmt_double(pt.threshold) + "," + fmt_double(pt.sensitivity) + "," +
               fmt_double(pt.fpr) + "\n";
    return out;
}

}  // namespace ventgate
