#include "ventgate/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "ventgate/metrics.hpp"
#include "ventgate/util.hpp"

namespace ventgate {

double bce_loss(const std::vector<double>& p, const std::vector<uint8_t>& y) {
    if (p.size() != y.size()) throw std::invalid_argument("LENGTH_MISMATCH: probabilities vs labels");
    if (p.empty()) throw std::invalid_argument("EMPTY_BATCH");
    constexpr double kEps = 1e-12;
    double sum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const double pc = std::min(std::max(p[i], kEps), 1.0 - kEps);
        sum += y[i] ? -std::log(pc) : -std::log(1.0 - pc);
    }
    return sum / static_cast<double>(p.size());
}

AdamState make_adam_state(const ModelParams& p) {
    AdamState s;
    s.m = zeros_like(p);
    s.v = zeros_like(p);
    return s;
}

void adam_step(ModelParams& params, ModelParams& grads, AdamState& state, const TrainConfig& cfg) {
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);

    auto pr = tensor_refs(params);
    auto gr = tensor_refs(grads);
    auto mr = tensor_refs(state.m);
    auto vr = tensor_refs(state.v);
    for (size_t k = 0; k < pr.size(); ++k) {
        double* p = pr[k].data;
        const double* g = gr[k].data;
        double* m = mr[k].data;
        double* v = vr[k].data;
        for (size_t i = 0; i < pr[k].count; ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

std::vector<double> predict_rows(const ModelParams& p, const RowDataset& data,
                                 const std::vector<uint32_t>& rows) {
    std::vector<double> scores;
    scores.reserve(rows.size());
    for (uint32_t r : rows) scores.push_back(predict(p, data.view(r)));
    return scores;
}

namespace {

void validate_config(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0)) throw std::invalid_argument("CONFIG_RANGE: learning_rate must be > 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("CONFIG_RANGE: batch_size must be >= 1");
    if (cfg.patience < 1) throw std::invalid_argument("CONFIG_RANGE: patience must be >= 1");
    if (cfg.dropout_rate < 0 || cfg.dropout_rate >= 1)
        throw std::invalid_argument("CONFIG_RANGE: dropout_rate must be in [0,1)");
    if (cfg.d == 0 || cfg.hidden == 0) throw std::invalid_argument("CONFIG_RANGE: zero width");
}

void check_split(const RowDataset& data, const std::vector<uint32_t>& rows, const char* name) {
    if (rows.empty()) throw std::invalid_argument(std::string("EMPTY_SPLIT: ") + name);
    bool pos = false, neg = false;
    for (uint32_t r : rows) (data.y[r] ? pos : neg) = true;
    if (!pos || !neg)
        throw std::invalid_argument(std::string("SINGLE_CLASS: ") + name + " split has one class");
}

void check_leakage(const RowDataset& data) {
    auto encs = [&](const std::vector<uint32_t>& rows) {
        std::set<uint32_t> s;
        for (uint32_t r : rows) s.insert(data.encounter_of_row[r]);
        return s;
    };
    const auto a = encs(data.train_rows), b = encs(data.val_rows), c = encs(data.test_rows);
    auto disjoint = [](const std::set<uint32_t>& x, const std::set<uint32_t>& y) {
        for (uint32_t e : x)
            if (y.count(e)) return false;
        return true;
    };
    if (!disjoint(a, b) || !disjoint(a, c) || !disjoint(b, c))
        throw std::invalid_argument("SPLIT_LEAKAGE: an encounter appears in two splits");
}

void zero_grads(ModelParams& g) {
    for (auto& r : tensor_refs(g))
        if (r.count) std::memset(r.data, 0, r.count * sizeof(double));
}

}  // namespace

TrainResult train(Variant variant, const RowDataset& data, const TrainConfig& cfg) {
    validate_config(cfg);
    check_split(data, data.train_rows, "train");
    check_split(data, data.val_rows, "val");
    check_leakage(data);
    if (variant != Variant::EHR_ONLY && !data.has_embeddings())
        throw std::invalid_argument("MISSING_MODALITY: variant needs an embedding channel");

    ModelDims dims;
    dims.n_static = kStaticCount;
    dims.n_dyn = kDynamicCount;
    dims.n_derived = kDerivedCount;
    dims.z_dim = data.z_dim;
    dims.d = cfg.d;
    dims.hidden = cfg.hidden;
    dims.depth = cfg.depth;

    SplitMix64 seeder(cfg.seed);
    ModelParams params = init_model(variant, dims, seeder.next());
    Rng shuffle_rng(seeder.next());
    Rng dropout_rng(seeder.next());

    ModelParams grads = zeros_like(params);
    AdamState adam = make_adam_state(params);
    auto prefs = tensor_refs(params);
    auto grefs = tensor_refs(grads);

    TrainResult result;
    result.params = params;
    double best = -1.0;
    uint32_t since_best = 0;

    std::vector<uint32_t> order = data.train_rows;
    std::vector<uint8_t> val_labels;
    for (uint32_t r : data.val_rows) val_labels.push_back(data.y[r]);

    for (uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        size_t epoch_rows = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            Batch batch;
            for (size_t i = start; i < end; ++i) {
                batch.samples.push_back(data.view(order[i]));
                batch.labels.push_back(data.y[order[i]]);
            }
            zero_grads(grads);
            BackwardOpts opts;
            opts.dropout_rate = cfg.dropout_rate;
            opts.rng = cfg.dropout_rate > 0 ? &dropout_rng : nullptr;
            opts.pos_weight = cfg.pos_weight;
            const double loss = model_forward_backward(params, batch, grads, opts);
            if (!std::isfinite(loss)) throw std::runtime_error("DIVERGED: non-finite training loss");
            epoch_loss += loss * static_cast<double>(end - start);
            epoch_rows += end - start;

            if (cfg.l2_coefficient > 0) {
                for (size_t k = 0; k < prefs.size(); ++k) {
                    if (prefs[k].name.size() < 2 ||
                        prefs[k].name.compare(prefs[k].name.size() - 2, 2, ".w") != 0)
                        continue;
                    for (size_t i = 0; i < prefs[k].count; ++i)
                        grefs[k].data[i] += cfg.l2_coefficient * prefs[k].data[i];
                }
            }
            adam_step(params, grads, adam, cfg);
        }

        const auto val_scores = predict_rows(params, data, data.val_rows);
        const double val_auroc = auroc(val_scores, val_labels);
        result.history.push_back({epoch, epoch_loss / static_cast<double>(epoch_rows), val_auroc});

        if (val_auroc > best) {
            best = val_auroc;
            result.params = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    result.best_val_auroc = best;
    return result;
}

SearchResult random_search(const SearchSpace& space, Variant variant, const RowDataset& data,
                           const TrainConfig& base) {
    if (space.trials < 1) throw std::invalid_argument("CONFIG_RANGE: trials must be >= 1");
    auto check_range = [](const ParamRange& r, const char* name) {
        if (!(r.lo <= r.hi) || (r.log_scale && r.lo <= 0))
            throw std::invalid_argument(std::string("INVALID_RANGE: ") + name);
    };
    check_range(space.learning_rate, "learning_rate");
    check_range(space.l2, "l2");
    check_range(space.dropout, "dropout");
    if (space.batch_size.lo < 1 || space.batch_size.lo > space.batch_size.hi ||
        space.hidden.lo < 1 || space.hidden.lo > space.hidden.hi || space.latent.lo < 1 ||
        space.latent.lo > space.latent.hi)
        throw std::invalid_argument("INVALID_RANGE: integer range");

    Rng rng(space.seed);
    auto sample_real = [&](const ParamRange& r) {
        if (r.lo == r.hi) return r.lo;
        return r.log_scale ? rng.log_uniform(r.lo, r.hi) : rng.uniform(r.lo, r.hi);
    };
    auto sample_int = [&](const IntRange& r) {
        return static_cast<uint32_t>(
            rng.uniform_int(static_cast<int>(r.lo), static_cast<int>(r.hi)));
    };

    SearchResult result;
    double best = -1.0;
    for (uint32_t trial = 0; trial < space.trials; ++trial) {
        TrainConfig cfg = base;
        cfg.learning_rate = sample_real(space.learning_rate);
        cfg.batch_size = sample_int(space.batch_size);
        cfg.hidden = sample_int(space.hidden);
        cfg.d = sample_int(space.latent);
        cfg.l2_coefficient = sample_real(space.l2);
        cfg.dropout_rate = sample_real(space.dropout);
        cfg.seed = base.seed + trial;

        const auto start = std::chrono::steady_clock::now();
        const auto run = train(variant, data, cfg);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        result.trials.push_back({trial, cfg, run.best_val_auroc, wall});
        if (run.best_val_auroc > best) {
            best = run.best_val_auroc;
            result.best = cfg;
        }
    }
    result.best_val_auroc = best;
    return result;
}

std::string trials_to_csv(const std::vector<TrialRecord>& trials) {
    std::string out =
        "trial_id,learning_rate,batch_size,hidden,latent,l2,dropout,seed,val_auroc,wall_seconds\n";
    for (const auto& t : trials) {
        out += std::to_string(t.trial_id) + "," + fmt_double(t.config.learning_rate) + "," +
               std::to_string(t.config.batch_size) + "," + std::to_string(t.config.hidden) + "," +
               std::to_string(t.config.d) + "," + fmt_double(t.config.l2_coefficient) + "," +
               fmt_double(t.config.dropout_rate) + "," + std::to_string(t.config.seed) + "," +
               fmt_double(t.val_auroc) + "," + fmt_fixed(t.wall_seconds, 3) + "\n";
    }
    return out;
}

}  // namespace ventgate
