#include "ventgate/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "ventgate/rng.hpp"
#include "ventgate/util.hpp"

namespace ventgate {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ---- configuration ---------------------------------------------------------------

void finalize_run_config(RunConfig& cfg) {
    if (const char* env = std::getenv("VENTGATE_OUT"); env && *env) cfg.out_dir = env;
    if (cfg.out_dir.empty()) throw std::invalid_argument("CONFIG_RANGE: out_dir is empty");
    if (cfg.cohort_path.empty()) cfg.cohort_path = cfg.out_dir + "/cohort.jsonl";
    if (cfg.embeddings_path.empty()) cfg.embeddings_path = cfg.out_dir + "/embeddings.cxre";
    if (cfg.features_dir.empty()) cfg.features_dir = cfg.out_dir + "/features";
    if (cfg.checkpoints_dir.empty()) cfg.checkpoints_dir = cfg.out_dir + "/checkpoints";
    if (cfg.reports_dir.empty()) cfg.reports_dir = cfg.out_dir + "/reports";
    const std::vector<std::string> paths = {cfg.cohort_path, cfg.embeddings_path, cfg.features_dir,
                                            cfg.checkpoints_dir, cfg.reports_dir};
    for (size_t i = 0; i < paths.size(); ++i)
        for (size_t j = i + 1; j < paths.size(); ++j)
            if (paths[i] == paths[j])
                throw std::invalid_argument("CONFIG_RANGE: output paths collide: " + paths[i]);
    if (!(cfg.train_frac > 0.0) || !(cfg.val_frac > 0.0) || cfg.train_frac + cfg.val_frac >= 1.0)
        throw std::invalid_argument("CONFIG_RANGE: split fractions must be positive and sum below 1");
    if (!(cfg.target_sensitivity > 0.0) || !(cfg.target_sensitivity <= 1.0))
        throw std::invalid_argument("CONFIG_RANGE: target_sensitivity must lie in (0, 1]");
    if (cfg.variants.empty()) throw std::invalid_argument("CONFIG_RANGE: variants list is empty");
}

namespace {

double jd(const ordered_json& j, const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}
uint64_t ju(const ordered_json& j, const char* key, uint64_t fallback) {
    return j.contains(key) ? j.at(key).get<uint64_t>() : fallback;
}

void parse_range(const ordered_json& j, const char* key, ParamRange& r) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    r.lo = a.at(0).get<double>();
    r.hi = a.at(1).get<double>();
}
void parse_range(const ordered_json& j, const char* key, IntRange& r) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    r.lo = a.at(0).get<uint32_t>();
    r.hi = a.at(1).get<uint32_t>();
}

void parse_train_section(const ordered_json& j, TrainConfig& t) {
    t.learning_rate = jd(j, "learning_rate", t.learning_rate);
    t.batch_size = (uint32_t)ju(j, "batch_size", t.batch_size);
    t.max_epochs = (uint32_t)ju(j, "max_epochs", t.max_epochs);
    t.patience = (uint32_t)ju(j, "patience", t.patience);
    t.l2_coefficient = jd(j, "l2", t.l2_coefficient);
    t.dropout_rate = jd(j, "dropout", t.dropout_rate);
    t.seed = ju(j, "seed", t.seed);
    t.pos_weight = jd(j, "pos_weight", t.pos_weight);
    t.d = (uint32_t)ju(j, "d", t.d);
    t.hidden = (uint32_t)ju(j, "hidden", t.hidden);
    t.depth = (uint32_t)ju(j, "depth", t.depth);
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
    RunConfig cfg;
    const auto j = ordered_json::parse(text);
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        if (p.contains("cohort")) cfg.cohort_path = p.at("cohort").get<std::string>();
        if (p.contains("embeddings")) cfg.embeddings_path = p.at("embeddings").get<std::string>();
        if (p.contains("features")) cfg.features_dir = p.at("features").get<std::string>();
        if (p.contains("checkpoints")) cfg.checkpoints_dir = p.at("checkpoints").get<std::string>();
        if (p.contains("reports")) cfg.reports_dir = p.at("reports").get<std::string>();
    }
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        cfg.synth.seed = ju(s, "seed", cfg.synth.seed);
        cfg.synth.n_encounters = (uint32_t)ju(s, "n_encounters", cfg.synth.n_encounters);
        cfg.synth.event_rate = jd(s, "event_rate", cfg.synth.event_rate);
        cfg.synth.dynamic_missing_rate =
            jd(s, "dynamic_missing_rate", cfg.synth.dynamic_missing_rate);
        cfg.synth.embedding_dim = (uint32_t)ju(s, "embedding_dim", cfg.synth.embedding_dim);
        cfg.synth.context_gate_prob = jd(s, "context_gate_prob", cfg.synth.context_gate_prob);
        cfg.synth.horizon_hours = (uint32_t)ju(s, "horizon_hours", cfg.synth.horizon_hours);
    }
    if (j.contains("train")) parse_train_section(j.at("train"), cfg.train);
    if (j.contains("search")) {
        const auto& s = j.at("search");
        cfg.search.trials = (uint32_t)ju(s, "trials", cfg.search.trials);
        cfg.search.seed = ju(s, "seed", cfg.search.seed);
        parse_range(s, "learning_rate", cfg.search.learning_rate);
        parse_range(s, "batch_size", cfg.search.batch_size);
        parse_range(s, "hidden", cfg.search.hidden);
        parse_range(s, "latent", cfg.search.latent);
        parse_range(s, "l2", cfg.search.l2);
        parse_range(s, "dropout", cfg.search.dropout);
    }
    if (j.contains("variants")) {
        cfg.variants.clear();
        for (const auto& v : j.at("variants")) {
            auto parsed = variant_from_name(v.get<std::string>());
            if (!parsed)
                throw std::invalid_argument("CONFIG_RANGE: unknown variant " +
                                            v.get<std::string>());
            cfg.variants.push_back(*parsed);
        }
    }
    cfg.target_sensitivity = jd(j, "target_sensitivity", cfg.target_sensitivity);
    cfg.seed = ju(j, "seed", cfg.seed);
    if (j.contains("split")) {
        const auto& s = j.at("split");
        cfg.train_frac = jd(s, "train", cfg.train_frac);
        cfg.val_frac = jd(s, "val", cfg.val_frac);
    }
    if (j.contains("use_embeddings")) cfg.use_embeddings = j.at("use_embeddings").get<bool>();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg = path.empty() ? RunConfig{} : run_config_from_json(read_file(path));
    finalize_run_config(cfg);
    return cfg;
}

// ---- gen -------------------------------------------------------------------------

std::string GenSummary::format() const {
    char buf[256];
    std::string s = "cohort characteristics\n";
    std::snprintf(buf, sizeof buf, "  encounters       %8u\n", encounters);
    s += buf;
    std::snprintf(buf, sizeof buf, "  ventilated       %8u (%s%%)\n", ventilated,
                  fmt_fixed(100.0 * event_rate, 1).c_str());
    s += buf;
    std::snprintf(buf, sizeof buf, "  cxr studies      %8u\n", studies);
    s += buf;
    return s;
}

GenSummary cmd_gen(const RunConfig& cfg) {
    validate_synth_config(cfg.synth);
    auto out = generate(cfg.synth);
    fs::create_directories(cfg.out_dir);
    fs::create_directories(fs::path(cfg.cohort_path).parent_path());
    fs::create_directories(fs::path(cfg.embeddings_path).parent_path());
    save_cohort(cfg.cohort_path, out.encounters);
    save_embeddings(cfg.embeddings_path, out.table);
    GenSummary s;
    s.encounters = (uint32_t)out.encounters.size();
    for (const auto& e : out.encounters) {
        if (derive_t0(e.vent).has_value()) ++s.ventilated;
        s.studies += (uint32_t)e.cxr_studies.size();
    }
    s.event_rate = s.encounters ? double(s.ventilated) / s.encounters : 0.0;
    write_file(cfg.out_dir + "/cohort_summary.txt", s.format());
    return s;
}

// ---- featurize -------------------------------------------------------------------

std::string FeaturizeSummary::format() const {
    char buf[256];
    std::string s;
    std::snprintf(buf, sizeof buf, "encounters %u, included %u\n", encounters_total,
                  encounters_included);
    s += buf;
    for (const auto& [reason, n] : excluded_by_reason) {
        std::snprintf(buf, sizeof buf, "  excluded %-16s %u\n", reason.c_str(), n);
        s += buf;
    }
    std::snprintf(buf, sizeof buf, "rows %llu, aligned %llu, unmatched %llu (embeddings: %s)\n",
                  (unsigned long long)rows_total, (unsigned long long)rows_aligned,
                  (unsigned long long)rows_unmatched, with_embeddings ? "yes" : "no");
    s += buf;
    return s;
}

FeaturizeSummary cmd_featurize(const RunConfig& cfg) {
    const auto cohort = load_cohort(cfg.cohort_path);
    FeaturizeSummary sum;
    sum.encounters_total = (uint32_t)cohort.size();

    CxrEmbeddingTable table;
    bool have_table = false;
    if (cfg.use_embeddings && fs::exists(cfg.embeddings_path)) {
        table = load_embeddings(cfg.embeddings_path);
        have_table = true;
    }
    sum.with_embeddings = have_table;

    std::vector<const Encounter*> included;
    for (const auto& e : cohort) {
        auto inc = apply_inclusion_criteria(e);
        if (!inc.included) {
            for (auto r : inc.reasons) sum.excluded_by_reason[exclusion_reason_name(r)] += 1;
            continue;
        }
        included.push_back(&e);
    }
    sum.encounters_included = (uint32_t)included.size();
    if (included.empty()) throw std::runtime_error("EMPTY_SPLIT: no encounter passed inclusion");

    std::vector<std::optional<double>> t0s;
    std::vector<std::string> ids;
    t0s.reserve(included.size());
    ids.reserve(included.size());
    for (const auto* e : included) {
        t0s.push_back(derive_t0(e->vent));
        ids.push_back(e->encounter_id);
    }

    const auto split = assign_splits(ids, cfg.seed, cfg.train_frac, cfg.val_frac);
    const std::set<std::string> train_set(split.train.begin(), split.train.end());

    std::vector<const Encounter*> train_encounters;
    for (const auto* e : included)
        if (train_set.count(e->encounter_id)) train_encounters.push_back(e);
    const auto stats = fit_imputation_stats(train_encounters);

    std::vector<FeatureMatrix> mats;
    mats.reserve(included.size());
    for (size_t i = 0; i < included.size(); ++i) {
        mats.push_back(assemble(*included[i], t0s[i], stats));
        sum.rows_total += mats.back().rows();
    }

    std::vector<const FeatureMatrix*> train_mats;
    for (size_t i = 0; i < included.size(); ++i)
        if (train_set.count(ids[i])) train_mats.push_back(&mats[i]);
    const auto scaler = fit_standardizer(train_mats);
    for (auto& m : mats) standardize(m, scaler);

    std::string align_csv = "encounter_id,row,timestamp,study_id,embedding_key,age_hours\n";
    if (have_table) {
        for (size_t i = 0; i < included.size(); ++i) {
            const auto aligned = align(*included[i], mats[i], table);
            sum.rows_aligned += aligned.size();
            for (const auto& a : aligned) {
                align_csv += a.encounter_id;
                align_csv += ',';
                align_csv += std::to_string(a.row);
                align_csv += ',';
                align_csv += fmt_double(a.timestamp);
                align_csv += ',';
                align_csv += a.study_id;
                align_csv += ',';
                align_csv += a.embedding_key;
                align_csv += ',';
                align_csv += fmt_double(a.embedding_age_hours);
                align_csv += '\n';
            }
        }
        sum.rows_unmatched = sum.rows_total - sum.rows_aligned;
    }

    std::string severity_csv = "encounter_id,timestamp,points\n";
    for (size_t i = 0; i < included.size(); ++i) {
        const auto pts = severity_points_rows(*included[i], t0s[i]);
        for (size_t r = 0; r < pts.size(); ++r) {
            severity_csv += ids[i];
            severity_csv += ',';
            severity_csv += fmt_double(mats[i].timestamps[r]);
            severity_csv += ',';
            severity_csv += std::to_string(pts[r]);
            severity_csv += '\n';
        }
    }

    fs::create_directories(cfg.features_dir);
    for (size_t i = 0; i < included.size(); ++i)
        save_feature_matrix(cfg.features_dir + "/" + ids[i] + ".fmx", mats[i]);

    std::string columns;
    for (const auto& c : file_column_names()) {
        columns += c;
        columns += '\n';
    }
    write_file(cfg.features_dir + "/columns.txt", columns);
    write_file(cfg.features_dir + "/split.json", split_to_json(split));

    ordered_json scaler_json;
    scaler_json["mean"] = scaler.mean;
    scaler_json["std"] = scaler.std;
    scaler_json["imputation_mean"] = stats.mean;
    write_file(cfg.features_dir + "/scaler.json", scaler_json.dump(2) + "\n");

    write_file(cfg.features_dir + "/alignment.csv", align_csv);
    write_file(cfg.features_dir + "/severity.csv", severity_csv);

    ordered_json sj;
    sj["encounters_total"] = sum.encounters_total;
    sj["encounters_included"] = sum.encounters_included;
    sj["excluded"] = ordered_json::object();
    for (const auto& [reason, n] : sum.excluded_by_reason) sj["excluded"][reason] = n;
    sj["rows_total"] = sum.rows_total;
    sj["rows_aligned"] = sum.rows_aligned;
    sj["rows_unmatched"] = sum.rows_unmatched;
    sj["with_embeddings"] = sum.with_embeddings;
    sj["included_ids"] = ids;
    write_file(cfg.features_dir + "/summary.json", sj.dump(2) + "\n");
    return sum;
}

// ---- dataset reload ----------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

std::vector<std::string> read_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start < text.size()) {
        size_t pos = text.find('\n', start);
        if (pos == std::string::npos) pos = text.size();
        if (pos > start) lines.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return lines;
}

}  // namespace

RowDataset load_dataset(const RunConfig& cfg) {
    const auto sj = ordered_json::parse(read_file(cfg.features_dir + "/summary.json"));
    const auto ids = sj.at("included_ids").get<std::vector<std::string>>();
    const bool with_embeddings = sj.at("with_embeddings").get<bool>();
    const auto split = split_from_json(read_file(cfg.features_dir + "/split.json"));

    std::vector<FeatureMatrix> mats;
    mats.reserve(ids.size());
    for (const auto& id : ids)
        mats.push_back(load_feature_matrix(cfg.features_dir + "/" + id + ".fmx", id));

    CxrEmbeddingTable table;
    std::vector<std::vector<AlignedSample>> aligned(ids.size());
    if (with_embeddings) {
        table = load_embeddings(cfg.embeddings_path);
        std::map<std::string, size_t> index;
        for (size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
        const auto lines = read_lines(read_file(cfg.features_dir + "/alignment.csv"));
        for (size_t li = 1; li < lines.size(); ++li) {  // header on line 0
            const auto cells = split_csv_line(lines[li]);
            if (cells.size() != 6)
                throw std::runtime_error("SCHEMA_MISMATCH: malformed alignment row");
            auto it = index.find(cells[0]);
            if (it == index.end())
                throw std::runtime_error("SCHEMA_MISMATCH: alignment row for unknown encounter " +
                                         cells[0]);
            AlignedSample a;
            a.encounter_id = cells[0];
            a.row = (size_t)std::stoull(cells[1]);
            a.timestamp = std::stod(cells[2]);
            a.study_id = cells[3];
            a.embedding_key = cells[4];
            a.embedding_age_hours = std::stod(cells[5]);
            aligned[it->second].push_back(std::move(a));
        }
    }

    std::vector<EncounterRows> rows(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        rows[i].fm = &mats[i];
        rows[i].aligned = with_embeddings ? &aligned[i] : nullptr;
    }
    return build_row_dataset(rows, with_embeddings ? &table : nullptr, split);
}

// ---- train / search ----------------------------------------------------------------

TrainSummary cmd_train(const RunConfig& cfg, Variant variant) {
    const auto data = load_dataset(cfg);
    const auto res = train(variant, data, cfg.train);
    fs::create_directories(cfg.checkpoints_dir);
    const std::string name = variant_name(variant);
    TrainSummary s;
    s.checkpoint_path = cfg.checkpoints_dir + "/" + name + ".vgm";
    save_checkpoint(s.checkpoint_path, res.params);
    std::string hist = "epoch,train_loss,val_auroc\n";
    for (const auto& e : res.history) {
        hist += std::to_string(e.epoch);
        hist += ',';
        hist += fmt_double(e.train_loss);
        hist += ',';
        hist += fmt_double(e.val_auroc);
        hist += '\n';
    }
    write_file(cfg.checkpoints_dir + "/" + name + "_history.csv", hist);
    s.best_val_auroc = res.best_val_auroc;
    s.best_epoch = res.best_epoch;
    s.epochs_run = (uint32_t)res.history.size();
    return s;
}

namespace {

ordered_json train_config_json(const TrainConfig& t) {
    ordered_json j;
    j["learning_rate"] = t.learning_rate;
    j["batch_size"] = t.batch_size;
    j["max_epochs"] = t.max_epochs;
    j["patience"] = t.patience;
    j["l2"] = t.l2_coefficient;
    j["dropout"] = t.dropout_rate;
    j["seed"] = t.seed;
    j["pos_weight"] = t.pos_weight;
    j["d"] = t.d;
    j["hidden"] = t.hidden;
    j["depth"] = t.depth;
    return j;
}

}  // namespace

SearchResult cmd_search(const RunConfig& cfg, Variant variant) {
    const auto data = load_dataset(cfg);
    auto res = random_search(cfg.search, variant, data, cfg.train);
    fs::create_directories(cfg.reports_dir);
    const std::string name = variant_name(variant);
    write_file(cfg.reports_dir + "/search_" + name + "_trials.csv", trials_to_csv(res.trials));
    ordered_json best;
    best["variant"] = name;
    best["best_val_auroc"] = res.best_val_auroc;
    best["config"] = train_config_json(res.best);
    write_file(cfg.reports_dir + "/search_" + name + "_best.json", best.dump(2) + "\n");
    return res;
}

// ---- eval ----------------------------------------------------------------------------

EvalSummary cmd_eval(const RunConfig& cfg, Variant variant) {
    const auto data = load_dataset(cfg);
    const std::string name = variant_name(variant);
    const auto params = load_checkpoint(cfg.checkpoints_dir + "/" + name + ".vgm");
    if (params.variant != variant)
        throw std::runtime_error("SCHEMA_MISMATCH: checkpoint holds a different variant");

    const auto val_scores = predict_rows(params, data, data.val_rows);
    std::vector<uint8_t> val_y;
    val_y.reserve(data.val_rows.size());
    for (auto r : data.val_rows) val_y.push_back(data.y[r]);
    const double threshold = select_threshold(val_scores, val_y, cfg.target_sensitivity);

    const auto test_scores = predict_rows(params, data, data.test_rows);
    std::vector<uint8_t> test_y;
    std::vector<PredRow> pred_rows;
    test_y.reserve(data.test_rows.size());
    pred_rows.reserve(data.test_rows.size());
    for (size_t i = 0; i < data.test_rows.size(); ++i) {
        const uint32_t r = data.test_rows[i];
        test_y.push_back(data.y[r]);
        PredRow p;
        p.encounter = data.encounter_of_row[r];
        p.timestamp = data.timestamps[r];
        p.score = test_scores[i];
        p.label = data.y[r];
        pred_rows.push_back(p);
    }

    const auto curve = roc_curve(test_scores, test_y);
    const auto confusion =
        encounter_confusion(pred_rows, data.encounter_ids.size(), threshold);

    EvalReport rep = binary_predictor_metrics(confusion.prediction_level);
    rep.name = name;
    rep.auroc = curve.auroc;
    rep.threshold = threshold;
    rep.roc = curve.points;

    fs::create_directories(cfg.reports_dir);
    EvalSummary out;
    out.report = rep;
    out.confusion = confusion;
    out.report_path = cfg.reports_dir + "/" + name + "_report.json";
    write_file(out.report_path, eval_report_to_json(rep));
    write_file(cfg.reports_dir + "/" + name + "_roc.csv", roc_to_csv(curve.points));
    ordered_json cj;
    auto cell = [](const ConfusionCounts& c) {
        ordered_json j;
        j["tp"] = c.tp;
        j["fp"] = c.fp;
        j["fn"] = c.fn;
        j["tn"] = c.tn;
        return j;
    };
    cj["threshold"] = threshold;
    cj["prediction_level"] = cell(confusion.prediction_level);
    cj["encounter_level"] = cell(confusion.encounter_level);
    write_file(cfg.reports_dir + "/" + name + "_confusion.json", cj.dump(2) + "\n");
    return out;
}

EvalReport cmd_eval_physician(const RunConfig& cfg, const std::string& csv_path) {
    const auto cohort = load_cohort(cfg.cohort_path);
    std::map<std::string, bool> truth;
    for (const auto& e : cohort) truth[e.encounter_id] = derive_t0(e.vent).has_value();

    const auto lines = read_lines(read_file(csv_path));
    ConfusionCounts counts;
    for (size_t li = 0; li < lines.size(); ++li) {
        const auto cells = split_csv_line(lines[li]);
        if (cells.size() != 2)
            throw std::runtime_error("SCHEMA_MISMATCH: expected two CSV columns");
        if (li == 0 && cells[1] != "0" && cells[1] != "1") continue;  // header row
        if (cells[1] != "0" && cells[1] != "1")
            throw std::runtime_error("SCHEMA_MISMATCH: call must be 0 or 1, got " + cells[1]);
        auto it = truth.find(cells[0]);
        if (it == truth.end())
            throw std::runtime_error("SCHEMA_MISMATCH: unknown encounter " + cells[0]);
        const bool call = cells[1] == "1";
        if (it->second)
            call ? ++counts.tp : ++counts.fn;
        else
            call ? ++counts.fp : ++counts.tn;
    }
    EvalReport rep = binary_predictor_metrics(counts);
    rep.name = "physician";
    fs::create_directories(cfg.reports_dir);
    write_file(cfg.reports_dir + "/physician_report.json", eval_report_to_json(rep));
    return rep;
}

// ---- compare / report -----------------------------------------------------------------

namespace {

std::string write_comparison(const RunConfig& cfg, const std::vector<EvalReport>& reports) {
    const std::string md = compare(reports);
    fs::create_directories(cfg.reports_dir);
    write_file(cfg.reports_dir + "/comparison.md", md);
    write_file(cfg.reports_dir + "/comparison.csv", compare_csv(reports));
    std::string bars = "predictor,auroc\n";
    for (const auto& r : reports)
        if (r.auroc) {
            bars += r.name;
            bars += ',';
            bars += fmt_double(*r.auroc);
            bars += '\n';
        }
    write_file(cfg.reports_dir + "/auroc_bars.csv", bars);
    return md;
}

}  // namespace

std::string cmd_compare(const RunConfig& cfg, const std::vector<std::string>& report_paths) {
    std::vector<EvalReport> reports;
    reports.reserve(report_paths.size());
    for (const auto& p : report_paths) reports.push_back(eval_report_from_json(read_file(p)));
    return write_comparison(cfg, reports);
}

std::string cmd_report(const RunConfig& cfg) {
    std::vector<EvalReport> reports;
    for (auto v : cfg.variants) {
        const std::string p =
            cfg.reports_dir + "/" + std::string(variant_name(v)) + "_report.json";
        if (fs::exists(p)) reports.push_back(eval_report_from_json(read_file(p)));
    }
    const std::string physician = cfg.reports_dir + "/physician_report.json";
    if (fs::exists(physician)) reports.push_back(eval_report_from_json(read_file(physician)));
    if (reports.size() < 2)
        throw std::runtime_error("NEED_TWO_REPORTS: found " + std::to_string(reports.size()) +
                                 " report(s) under " + cfg.reports_dir);
    return write_comparison(cfg, reports);
}

// ---- gradient check ---------------------------------------------------------------------

double gradcheck_max_error(Variant variant, const ModelDims& dims, size_t batch_size,
                           uint64_t seed, double step) {
    Rng rng(seed);
    ModelParams p = init_model(variant, dims, rng.next_u64());

    const size_t nx = dims.n_static + dims.n_dyn + dims.n_derived;
    std::vector<float> xs(batch_size * nx), dts(batch_size * dims.n_dyn),
        zs(batch_size * dims.z_dim);
    for (auto& v : xs) v = (float)rng.normal();
    for (auto& v : dts) v = (float)rng.uniform(0.0, 48.0);
    for (auto& v : zs) v = (float)rng.normal();

    Batch batch;
    for (size_t i = 0; i < batch_size; ++i) {
        SampleView s;
        s.x = &xs[i * nx];
        s.dt = &dts[i * dims.n_dyn];
        s.z = dims.z_dim ? &zs[i * dims.z_dim] : nullptr;
        batch.samples.push_back(s);
        batch.labels.push_back(i % 2 ? 1 : 0);  // both classes present
    }

    ModelParams analytic = zeros_like(p);
    model_forward_backward(p, batch, analytic);

    auto param_refs = tensor_refs(p);
    auto grad_refs = tensor_refs(analytic);
    ModelParams scratch = zeros_like(p);
    double worst = 0.0;
    for (size_t t = 0; t < param_refs.size(); ++t) {
        for (size_t i = 0; i < param_refs[t].count; ++i) {
            double& w = param_refs[t].data[i];
            const double orig = w;
            w = orig + step;
            const double up = model_forward_backward(p, batch, scratch);
            w = orig - step;
            const double down = model_forward_backward(p, batch, scratch);
            w = orig;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic_g = grad_refs[t].data[i];
            const double denom = std::max(1e-6, std::fabs(numeric) + std::fabs(analytic_g));
            worst = std::max(worst, std::fabs(numeric - analytic_g) / denom);
        }
    }
    return worst;
}

// ---- CLI ------------------------------------------------------------------------------

namespace {

Variant parse_variant_arg(const std::string& s) {
    auto v = variant_from_name(s);
    if (!v) throw std::invalid_argument("CONFIG_RANGE: unknown variant " + s);
    return *v;
}

int run_gradcheck_cli(uint64_t seed, uint32_t configs, double tol) {
    static const Variant kAll[] = {Variant::EHR_ONLY, Variant::CXR_ONLY, Variant::CONCAT,
                                   Variant::ATTENTION, Variant::GATED};
    Rng rng(seed);
    bool ok = true;
    for (auto v : kAll) {
        double worst = 0.0;
        for (uint32_t c = 0; c < configs; ++c) {
            ModelDims dims;
            dims.n_static = (uint32_t)rng.uniform_int(2, 6);
            dims.n_dyn = (uint32_t)rng.uniform_int(2, 5);
            dims.n_derived = 3 * dims.n_dyn;
            dims.z_dim = (uint32_t)rng.uniform_int(2, 6);
            dims.d = (uint32_t)rng.uniform_int(3, 6);
            dims.hidden = (uint32_t)rng.uniform_int(3, 8);
            dims.depth = (uint32_t)rng.uniform_int(1, 2);
            const size_t batch = (size_t)rng.uniform_int(2, 6);
            worst = std::max(worst, gradcheck_max_error(v, dims, batch, rng.next_u64()));
        }
        const bool pass = worst < tol;
        ok = ok && pass;
        std::printf("%-9s max relative error %.3e  %s\n", variant_name(v), worst,
                    pass ? "ok" : "FAIL");
    }
    return ok ? 0 : 1;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"gated multimodal prediction of mechanical ventilation"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration file");

    auto* gen = app.add_subcommand("gen", "generate a synthetic cohort and embedding table");
    auto* featurize =
        app.add_subcommand("featurize", "build the feature cache from the cohort file");
    auto* train_cmd = app.add_subcommand("train", "train one fusion variant");
    auto* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference audit of the analytic gradients");
    auto* search = app.add_subcommand("search", "random hyperparameter search");
    auto* eval = app.add_subcommand("eval", "evaluate a trained checkpoint on the test split");
    auto* compare_cmd =
        app.add_subcommand("compare", "tabulate metrics across saved report files");
    auto* report = app.add_subcommand("report", "collect every saved report into one table");

    const std::vector<std::string> variant_names = {"ehr", "cxr", "concat", "attention", "gated"};
    std::string train_variant, search_variant, eval_variant;
    train_cmd->add_option("--variant", train_variant, "fusion variant")
        ->required()
        ->check(CLI::IsMember(variant_names));
    search->add_option("--variant", search_variant, "fusion variant")
        ->required()
        ->check(CLI::IsMember(variant_names));
    eval->add_option("--variant", eval_variant, "fusion variant")
        ->required()
        ->check(CLI::IsMember(variant_names));
    std::string physician_csv;
    eval->add_option("--physician", physician_csv,
                     "two-column CSV (encounter_id,call) scored as a binary predictor");

    uint64_t gc_seed = 7;
    uint32_t gc_configs = 20;
    double gc_tol = 1e-4;
    gradcheck->add_option("--seed", gc_seed, "rng seed");
    gradcheck->add_option("--configs", gc_configs, "random configurations per variant");
    gradcheck->add_option("--tol", gc_tol, "relative error bound");

    std::vector<std::string> report_paths;
    compare_cmd->add_option("--report", report_paths, "report JSON files (repeatable)")
        ->required()
        ->expected(-2);

    std::vector<std::string> argv_storage = args;
    argv_storage.insert(argv_storage.begin(), "ventgate");
    std::vector<const char*> argv;
    argv.reserve(argv_storage.size());
    for (const auto& a : argv_storage) argv.push_back(a.c_str());
    try {
        app.parse((int)argv.size(), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gradcheck->parsed()) return run_gradcheck_cli(gc_seed, gc_configs, gc_tol);
        const RunConfig cfg = load_run_config(config_path);
        if (gen->parsed()) {
            std::fputs(cmd_gen(cfg).format().c_str(), stdout);
        } else if (featurize->parsed()) {
            std::fputs(cmd_featurize(cfg).format().c_str(), stdout);
        } else if (train_cmd->parsed()) {
            const auto s = cmd_train(cfg, parse_variant_arg(train_variant));
            std::printf("%s: best val AUROC %s at epoch %u (%u epochs run)\n",
                        s.checkpoint_path.c_str(), fmt_fixed(s.best_val_auroc, 4).c_str(),
                        s.best_epoch, s.epochs_run);
        } else if (search->parsed()) {
            const auto s = cmd_search(cfg, parse_variant_arg(search_variant));
            std::printf("best val AUROC %s over %zu trials\n",
                        fmt_fixed(s.best_val_auroc, 4).c_str(), s.trials.size());
        } else if (eval->parsed()) {
            const auto s = cmd_eval(cfg, parse_variant_arg(eval_variant));
            std::printf("%s: test AUROC %s, threshold %s\n", s.report.name.c_str(),
                        fmt_fixed(*s.report.auroc, 4).c_str(),
                        fmt_double(*s.report.threshold).c_str());
            if (!physician_csv.empty()) {
                const auto pr = cmd_eval_physician(cfg, physician_csv);
                std::printf("physician: sensitivity %s, specificity %s\n",
                            pr.sensitivity ? fmt_fixed(*pr.sensitivity, 3).c_str() : "--",
                            pr.specificity ? fmt_fixed(*pr.specificity, 3).c_str() : "--");
            }
        } else if (compare_cmd->parsed()) {
            std::fputs(cmd_compare(cfg, report_paths).c_str(), stdout);
        } else if (report->parsed()) {
            std::fputs(cmd_report(cfg).c_str(), stdout);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace ventgate
