#include "ventgate/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "ventgate/util.hpp"

namespace ventgate {

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void apply_activation(Activation act, std::vector<double>& z) {
    switch (act) {
        case Activation::RELU:
            for (auto& v : z) v = v > 0 ? v : 0.0;
            break;
        case Activation::SIGMOID:
            for (auto& v : z) v = sigmoid(v);
            break;
        case Activation::IDENTITY:
            break;
    }
}

DenseParams make_dense(uint32_t out_dim, uint32_t in_dim, Activation act, Rng& rng) {
    DenseParams p;
    p.out_dim = out_dim;
    p.in_dim = in_dim;
    p.activation = act;
    p.weight.resize(static_cast<size_t>(out_dim) * in_dim);
    // Small positive bias on RELU layers keeps units alive even when the whole
    // previous layer is dead, which would otherwise park pre-activations
    // exactly on the kink.
    p.bias.assign(out_dim, act == Activation::RELU ? 0.01 : 0.0);
    const double s = in_dim > 0 ? 1.0 / std::sqrt(static_cast<double>(in_dim)) : 0.0;
    for (auto& w : p.weight) w = rng.uniform(-s, s);
    return p;
}

std::vector<DenseParams> make_mlp(uint32_t in, uint32_t hidden, uint32_t depth, uint32_t out,
                                  Rng& rng) {
    std::vector<DenseParams> layers;
    uint32_t cur = in;
    for (uint32_t i = 0; i < depth; ++i) {
        layers.push_back(make_dense(hidden, cur, Activation::RELU, rng));
        cur = hidden;
    }
    layers.push_back(make_dense(out, cur, Activation::IDENTITY, rng));
    return layers;
}

}  // namespace

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::EHR_ONLY: return "ehr";
        case Variant::CXR_ONLY: return "cxr";
        case Variant::CONCAT: return "concat";
        case Variant::ATTENTION: return "attention";
        case Variant::GATED: return "gated";
    }
    return "?";
}

std::optional<Variant> variant_from_name(std::string_view name) {
    if (name == "ehr") return Variant::EHR_ONLY;
    if (name == "cxr") return Variant::CXR_ONLY;
    if (name == "concat") return Variant::CONCAT;
    if (name == "attention") return Variant::ATTENTION;
    if (name == "gated") return Variant::GATED;
    return std::nullopt;
}

ModelParams init_model(Variant variant, const ModelDims& dims, uint64_t seed) {
    if (dims.d == 0) throw std::invalid_argument("init_model: latent width d must be positive");
    Rng rng(seed);
    ModelParams p;
    p.variant = variant;
    p.dims = dims;
    p.tslm.rho.assign(dims.n_dyn, 0.0);
    if (dims.ehr_input() > 0)
        p.ehr_encoder = make_mlp(dims.ehr_input(), dims.hidden, dims.depth, dims.d, rng);
    if (dims.z_dim > 0) p.projection = make_mlp(dims.z_dim, dims.hidden, dims.depth, dims.d, rng);
    p.fusion = make_dense(dims.d, 2 * dims.d, Activation::IDENTITY, rng);
    p.attn_e = make_dense(1, dims.d, Activation::IDENTITY, rng);
    p.attn_c = make_dense(1, dims.d, Activation::IDENTITY, rng);
    p.gate.w.resize(2 * dims.d);
    const double gs = 1.0 / std::sqrt(2.0 * dims.d);
    for (auto& w : p.gate.w) w = rng.uniform(-gs, gs);
    p.gate.b = 0.0;
    p.head = make_dense(1, dims.d, Activation::SIGMOID, rng);
    return p;
}

ModelParams zeros_like(const ModelParams& p) {
    ModelParams z = p;
    for (auto& ref : tensor_refs(z))
        if (ref.count) std::memset(ref.data, 0, ref.count * sizeof(double));
    return z;
}

std::vector<TensorRef> tensor_refs(ModelParams& p) {
    std::vector<TensorRef> refs;
    auto add = [&](std::string name, std::vector<double>& v, std::vector<uint32_t> shape) {
        refs.push_back({std::move(name), v.data(), v.size(), std::move(shape)});
    };
    add("tslm.rho", p.tslm.rho, {static_cast<uint32_t>(p.tslm.rho.size())});
    auto add_mlp = [&](const char* prefix, std::vector<DenseParams>& layers) {
        for (size_t i = 0; i < layers.size(); ++i) {
            auto& L = layers[i];
            add(std::string(prefix) + "." + std::to_string(i) + ".w", L.weight,
                {L.out_dim, L.in_dim});
            add(std::string(prefix) + "." + std::to_string(i) + ".b", L.bias, {L.out_dim});
        }
    };
    add_mlp("ehr", p.ehr_encoder);
    add_mlp("proj", p.projection);
    add("fusion.w", p.fusion.weight, {p.fusion.out_dim, p.fusion.in_dim});
    add("fusion.b", p.fusion.bias, {p.fusion.out_dim});
    add("attn_e.w", p.attn_e.weight, {p.attn_e.out_dim, p.attn_e.in_dim});
    add("attn_e.b", p.attn_e.bias, {p.attn_e.out_dim});
    add("attn_c.w", p.attn_c.weight, {p.attn_c.out_dim, p.attn_c.in_dim});
    add("attn_c.b", p.attn_c.bias, {p.attn_c.out_dim});
    add("gate.w", p.gate.w, {static_cast<uint32_t>(p.gate.w.size())});
    refs.push_back({"gate.b", &p.gate.b, 1, {1}});
    add("head.w", p.head.weight, {p.head.out_dim, p.head.in_dim});
    add("head.b", p.head.bias, {p.head.out_dim});
    return refs;
}

// ---- forward pieces ---------------------------------------------------------------

std::vector<double> tslm_transform(const std::vector<double>& x_d,
                                   const std::vector<double>& delta_t, const TslmParams& params) {
    const size_t n = params.rho.size();
    if (x_d.size() != n || delta_t.size() != n)
        throw std::invalid_argument("SHAPE_MISMATCH: tslm_transform input widths");
    std::vector<double> out(2 * n);
    for (size_t j = 0; j < n; ++j) {
        if (delta_t[j] < 0) throw std::invalid_argument("NEGATIVE_DELTA: tslm requires dt >= 0");
        const double dthat = delta_t[j] / 24.0;
        out[j] = x_d[j] * std::exp(-softplus(params.rho[j]) * dthat);
        out[n + j] = dthat;
    }
    return out;
}

std::vector<double> dense_forward(const DenseParams& layer, const std::vector<double>& in) {
    if (in.size() != layer.in_dim) throw std::invalid_argument("SHAPE_MISMATCH: dense input width");
    std::vector<double> out(layer.out_dim);
    for (uint32_t o = 0; o < layer.out_dim; ++o) {
        const double* w = &layer.weight[static_cast<size_t>(o) * layer.in_dim];
        double acc = layer.bias[o];
        for (uint32_t i = 0; i < layer.in_dim; ++i) acc += w[i] * in[i];
        out[o] = acc;
    }
    apply_activation(layer.activation, out);
    return out;
}

std::vector<double> encode_ehr(const std::vector<double>& x, const std::vector<double>& dt,
                               const ModelParams& p) {
    const auto& d = p.dims;
    if (x.size() != static_cast<size_t>(d.n_static) + d.n_dyn + d.n_derived)
        throw std::invalid_argument("SHAPE_MISMATCH: ehr feature row width");
    if (dt.size() != d.n_dyn) throw std::invalid_argument("SHAPE_MISMATCH: dt width");

    std::vector<double> xd(x.begin() + d.n_static, x.begin() + d.n_static + d.n_dyn);
    const auto decayed = tslm_transform(xd, dt, p.tslm);

    std::vector<double> in;
    in.reserve(d.ehr_input());
    in.insert(in.end(), x.begin(), x.begin() + d.n_static);
    in.insert(in.end(), decayed.begin(), decayed.end());
    in.insert(in.end(), x.begin() + d.n_static + d.n_dyn, x.end());

    std::vector<double> h = std::move(in);
    for (const auto& layer : p.ehr_encoder) h = dense_forward(layer, h);
    return h;
}

std::vector<double> project_image(const std::vector<double>& z, const ModelParams& p) {
    if (p.projection.empty())
        throw std::invalid_argument("MISSING_MODALITY: model has no imaging branch");
    if (z.size() != p.dims.z_dim) throw std::invalid_argument("SHAPE_MISMATCH: embedding width");
    std::vector<double> h = z;
    for (const auto& layer : p.projection) h = dense_forward(layer, h);
    return h;
}

std::pair<std::vector<double>, double> gate_and_fuse(const std::vector<double>& h_e,
                                                     const std::vector<double>& h_c,
                                                     const GateParams& gate) {
    const size_t d = h_e.size();
    if (h_c.size() != d || gate.w.size() != 2 * d)
        throw std::invalid_argument("SHAPE_MISMATCH: gate inputs");
    double a = gate.b;
    for (size_t i = 0; i < d; ++i) a += gate.w[i] * h_e[i];
    for (size_t i = 0; i < d; ++i) a += gate.w[d + i] * h_c[i];
    const double g = sigmoid(a);
    std::vector<double> h(d);
    for (size_t i = 0; i < d; ++i) h[i] = (1.0 - g) * h_e[i] + g * h_c[i];
    return {std::move(h), g};
}

AttentionOut attention_fuse(const std::vector<double>& h_e, const std::vector<double>& h_c,
                            const DenseParams& score_e, const DenseParams& score_c) {
    if (h_e.size() != h_c.size()) throw std::invalid_argument("SHAPE_MISMATCH: attention inputs");
    const double s_e = dense_forward(score_e, h_e)[0];
    const double s_c = dense_forward(score_c, h_c)[0];
    const double m = std::max(s_e, s_c);
    const double ue = std::exp(s_e - m), uc = std::exp(s_c - m);
    AttentionOut out;
    out.w_e = ue / (ue + uc);
    out.w_c = uc / (ue + uc);
    out.h.resize(h_e.size());
    for (size_t i = 0; i < h_e.size(); ++i) out.h[i] = out.w_e * h_e[i] + out.w_c * h_c[i];
    return out;
}

// ---- full forward with caches -----------------------------------------------------

namespace {

struct BranchCache {
    std::vector<std::vector<double>> acts;   // acts[0] = input, acts[i+1] = layer i output
    std::vector<std::vector<double>> pre;    // pre-activation per layer
    std::vector<std::vector<double>> masks;  // dropout mask per layer; empty when unused
};

struct FwdState {
    bool use_ehr = false, use_cxr = false;
    std::vector<double> xd, dthat, decay;  // raw dynamics, dt/24, exp(-s*dthat)
    BranchCache enc, proj;
    std::vector<double> h_e, h_c, h, u;  // u = [h_e;h_c] where a fused layer consumes it
    double g = 0.0;                      // GATED
    double w_e = 0.0, w_c = 0.0;         // ATTENTION
    double logit = 0.0, p = 0.5;
};

void branch_forward(const std::vector<DenseParams>& layers, std::vector<double> input,
                    BranchCache& c, double drop, Rng* rng) {
    c.acts.clear();
    c.pre.clear();
    c.masks.clear();
    c.acts.push_back(std::move(input));
    for (size_t i = 0; i < layers.size(); ++i) {
        const auto& L = layers[i];
        const auto& in = c.acts.back();
        std::vector<double> z(L.out_dim);
        for (uint32_t o = 0; o < L.out_dim; ++o) {
            const double* w = &L.weight[static_cast<size_t>(o) * L.in_dim];
            double acc = L.bias[o];
            for (uint32_t k = 0; k < L.in_dim; ++k) acc += w[k] * in[k];
            z[o] = acc;
        }
        std::vector<double> a = z;
        apply_activation(L.activation, a);
        std::vector<double> mask;
        if (drop > 0 && rng && i + 1 < layers.size()) {
            mask.resize(a.size());
            const double keep_scale = 1.0 / (1.0 - drop);
            for (size_t o = 0; o < a.size(); ++o) {
                mask[o] = rng->uniform() < drop ? 0.0 : keep_scale;
                a[o] *= mask[o];
            }
        }
        c.pre.push_back(std::move(z));
        c.masks.push_back(std::move(mask));
        c.acts.push_back(std::move(a));
    }
}

// da is the gradient w.r.t. the branch output; returns gradient w.r.t. input.
std::vector<double> branch_backward(const std::vector<DenseParams>& layers, const BranchCache& c,
                                    std::vector<double> da, std::vector<DenseParams>& grads) {
    for (size_t li = layers.size(); li-- > 0;) {
        const auto& L = layers[li];
        const auto& in = c.acts[li];
        const auto& z = c.pre[li];
        const auto& a = c.acts[li + 1];
        const auto& mask = c.masks[li];
        if (!mask.empty())
            for (size_t o = 0; o < da.size(); ++o) da[o] *= mask[o];
        switch (L.activation) {
            case Activation::RELU:
                for (size_t o = 0; o < da.size(); ++o)
                    if (z[o] <= 0) da[o] = 0.0;
                break;
            case Activation::SIGMOID:
                // a here is post-dropout; sigmoid layers are never dropped in this
                // architecture, so a is the true activation
                for (size_t o = 0; o < da.size(); ++o) da[o] *= a[o] * (1.0 - a[o]);
                break;
            case Activation::IDENTITY:
                break;
        }
        auto& G = grads[li];
        std::vector<double> din(L.in_dim, 0.0);
        for (uint32_t o = 0; o < L.out_dim; ++o) {
            const double dz = da[o];
            if (dz == 0.0) continue;
            double* gw = &G.weight[static_cast<size_t>(o) * L.in_dim];
            const double* w = &L.weight[static_cast<size_t>(o) * L.in_dim];
            for (uint32_t k = 0; k < L.in_dim; ++k) {
                gw[k] += dz * in[k];
                din[k] += dz * w[k];
            }
            G.bias[o] += dz;
        }
        da = std::move(din);
    }
    return da;
}

void forward_sample(const ModelParams& p, const SampleView& s, FwdState& st, double drop,
                    Rng* rng) {
    const auto& d = p.dims;
    st.use_ehr = p.variant != Variant::CXR_ONLY;
    st.use_cxr = p.variant != Variant::EHR_ONLY;

    if (st.use_ehr) {
        if (!s.x || !s.dt) throw std::invalid_argument("MISSING_MODALITY: variant requires EHR row");
        st.xd.resize(d.n_dyn);
        st.dthat.resize(d.n_dyn);
        st.decay.resize(d.n_dyn);
        std::vector<double> in(d.ehr_input());
        size_t col = 0;
        for (uint32_t i = 0; i < d.n_static; ++i) in[col++] = s.x[i];
        for (uint32_t j = 0; j < d.n_dyn; ++j) {
            const double dt = s.dt[j];
            if (dt < 0) throw std::invalid_argument("NEGATIVE_DELTA: tslm requires dt >= 0");
            st.xd[j] = s.x[d.n_static + j];
            st.dthat[j] = dt / 24.0;
            st.decay[j] = std::exp(-softplus(p.tslm.rho[j]) * st.dthat[j]);
            in[col++] = st.xd[j] * st.decay[j];
        }
        for (uint32_t j = 0; j < d.n_dyn; ++j) in[col++] = st.dthat[j];
        for (uint32_t i = 0; i < d.n_derived; ++i) in[col++] = s.x[d.n_static + d.n_dyn + i];
        branch_forward(p.ehr_encoder, std::move(in), st.enc, drop, rng);
        st.h_e = st.enc.acts.back();
    }
    if (st.use_cxr) {
        if (!s.z) throw std::invalid_argument("MISSING_MODALITY: variant requires embedding");
        if (p.projection.empty())
            throw std::invalid_argument("MISSING_MODALITY: model has no imaging branch");
        branch_forward(p.projection, std::vector<double>(s.z, s.z + d.z_dim), st.proj, drop, rng);
        st.h_c = st.proj.acts.back();
    }

    switch (p.variant) {
        case Variant::EHR_ONLY:
            st.h = st.h_e;
            break;
        case Variant::CXR_ONLY:
            st.h = st.h_c;
            break;
        case Variant::CONCAT: {
            st.u.clear();
            st.u.reserve(2 * d.d);
            st.u.insert(st.u.end(), st.h_e.begin(), st.h_e.end());
            st.u.insert(st.u.end(), st.h_c.begin(), st.h_c.end());
            st.h = dense_forward(p.fusion, st.u);
            break;
        }
        case Variant::ATTENTION: {
            auto out = attention_fuse(st.h_e, st.h_c, p.attn_e, p.attn_c);
            st.h = std::move(out.h);
            st.w_e = out.w_e;
            st.w_c = out.w_c;
            break;
        }
        case Variant::GATED: {
            auto [h, g] = gate_and_fuse(st.h_e, st.h_c, p.gate);
            st.h = std::move(h);
            st.g = g;
            break;
        }
    }

    double logit = p.head.bias[0];
    for (uint32_t i = 0; i < d.d; ++i) logit += p.head.weight[i] * st.h[i];
    st.logit = logit;
    st.p = sigmoid(logit);
}

// dlogit is d(loss)/d(head pre-activation); the sigmoid/BCE pair collapses to
// (p - y) * weight, so the head is differentiated at the logit directly.
void backward_sample(const ModelParams& p, const FwdState& st, double dlogit, ModelParams& g) {
    const auto& d = p.dims;
    std::vector<double> dh(d.d);
    for (uint32_t i = 0; i < d.d; ++i) {
        g.head.weight[i] += dlogit * st.h[i];
        dh[i] = dlogit * p.head.weight[i];
    }
    g.head.bias[0] += dlogit;

    std::vector<double> dh_e, dh_c;
    switch (p.variant) {
        case Variant::EHR_ONLY:
            dh_e = std::move(dh);
            break;
        case Variant::CXR_ONLY:
            dh_c = std::move(dh);
            break;
        case Variant::CONCAT: {
            // fusion is a single IDENTITY dense layer over u = [h_e;h_c]
            std::vector<double> du(2 * d.d, 0.0);
            for (uint32_t o = 0; o < d.d; ++o) {
                const double dz = dh[o];
                if (dz == 0.0) continue;
                double* gw = &g.fusion.weight[static_cast<size_t>(o) * 2 * d.d];
                const double* w = &p.fusion.weight[static_cast<size_t>(o) * 2 * d.d];
                for (uint32_t k = 0; k < 2 * d.d; ++k) {
                    gw[k] += dz * st.u[k];
                    du[k] += dz * w[k];
                }
                g.fusion.bias[o] += dz;
            }
            dh_e.assign(du.begin(), du.begin() + d.d);
            dh_c.assign(du.begin() + d.d, du.end());
            break;
        }
        case Variant::ATTENTION: {
            dh_e.resize(d.d);
            dh_c.resize(d.d);
            double dw_e = 0.0, dw_c = 0.0;
            for (uint32_t i = 0; i < d.d; ++i) {
                dw_e += dh[i] * st.h_e[i];
                dw_c += dh[i] * st.h_c[i];
                dh_e[i] = st.w_e * dh[i];
                dh_c[i] = st.w_c * dh[i];
            }
            // softmax jacobian over the two scores
            const double mix = st.w_e * dw_e + st.w_c * dw_c;
            const double ds_e = st.w_e * (dw_e - mix);
            const double ds_c = st.w_c * (dw_c - mix);
            for (uint32_t i = 0; i < d.d; ++i) {
                g.attn_e.weight[i] += ds_e * st.h_e[i];
                g.attn_c.weight[i] += ds_c * st.h_c[i];
                dh_e[i] += ds_e * p.attn_e.weight[i];
                dh_c[i] += ds_c * p.attn_c.weight[i];
            }
            g.attn_e.bias[0] += ds_e;
            g.attn_c.bias[0] += ds_c;
            break;
        }
        case Variant::GATED: {
            dh_e.resize(d.d);
            dh_c.resize(d.d);
            double dg = 0.0;
            for (uint32_t i = 0; i < d.d; ++i) {
                dg += dh[i] * (st.h_c[i] - st.h_e[i]);
                dh_e[i] = (1.0 - st.g) * dh[i];
                dh_c[i] = st.g * dh[i];
            }
            const double da = dg * st.g * (1.0 - st.g);
            for (uint32_t i = 0; i < d.d; ++i) {
                g.gate.w[i] += da * st.h_e[i];
                g.gate.w[d.d + i] += da * st.h_c[i];
                dh_e[i] += da * p.gate.w[i];
                dh_c[i] += da * p.gate.w[d.d + i];
            }
            g.gate.b += da;
            break;
        }
    }

    if (st.use_cxr && !dh_c.empty()) branch_backward(p.projection, st.proj, std::move(dh_c), g.projection);
    if (st.use_ehr && !dh_e.empty()) {
        auto din = branch_backward(p.ehr_encoder, st.enc, std::move(dh_e), g.ehr_encoder);
        // decayed_j = xd_j * exp(-softplus(rho_j) * dthat_j)
        for (uint32_t j = 0; j < d.n_dyn; ++j) {
            const double ddecayed = din[d.n_static + j];
            g.tslm.rho[j] +=
                ddecayed * st.xd[j] * st.decay[j] * (-st.dthat[j]) * sigmoid(p.tslm.rho[j]);
        }
    }
}

}  // namespace

double predict(const ModelParams& p, const SampleView& s, double* gate_out) {
    FwdState st;
    forward_sample(p, s, st, 0.0, nullptr);
    if (gate_out) {
        if (p.variant == Variant::GATED) *gate_out = st.g;
        if (p.variant == Variant::ATTENTION) *gate_out = st.w_c;
    }
    return st.p;
}

double model_forward_backward(const ModelParams& p, const Batch& batch, ModelParams& grads,
                              const BackwardOpts& opts) {
    if (batch.samples.size() != batch.labels.size())
        throw std::invalid_argument("LENGTH_MISMATCH: batch samples vs labels");
    if (batch.samples.empty()) throw std::invalid_argument("EMPTY_BATCH");

    double weight_sum = 0.0;
    for (uint8_t y : batch.labels) weight_sum += y ? opts.pos_weight : 1.0;

    constexpr double kEps = 1e-12;
    double loss = 0.0;
    FwdState st;
    for (size_t i = 0; i < batch.samples.size(); ++i) {
        forward_sample(p, batch.samples[i], st, opts.dropout_rate, opts.rng);
        const double y = batch.labels[i] ? 1.0 : 0.0;
        const double w = batch.labels[i] ? opts.pos_weight : 1.0;
        const double pc = std::min(std::max(st.p, kEps), 1.0 - kEps);
        loss += -w * (y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
        backward_sample(p, st, w * (st.p - y) / weight_sum, grads);
    }
    return loss / weight_sum;
}

// ---- checkpoint -------------------------------------------------------------------
//
// magic "VGM1", u32 variant, u32 schema version, 7 u32 dims, u32 tensor count,
// then per tensor: u16 name length, name, u32 rank, rank u32 dims, 64-bit floats.

namespace {
constexpr char kVgmMagic[4] = {'V', 'G', 'M', '1'};
constexpr uint32_t kCheckpointVersion = 1;
}  // namespace

std::string checkpoint_to_bytes(const ModelParams& p) {
    ModelParams copy = p;
    auto refs = tensor_refs(copy);

    std::string out;
    out.append(kVgmMagic, 4);
    put_u32(out, static_cast<uint32_t>(p.variant));
    put_u32(out, kCheckpointVersion);
    const auto& d = p.dims;
    for (uint32_t v : {d.n_static, d.n_dyn, d.n_derived, d.z_dim, d.d, d.hidden, d.depth})
        put_u32(out, v);
    put_u32(out, static_cast<uint32_t>(refs.size()));
    for (const auto& r : refs) {
        put_u16(out, static_cast<uint16_t>(r.name.size()));
        out += r.name;
        put_u32(out, static_cast<uint32_t>(r.shape.size()));
        for (uint32_t s : r.shape) put_u32(out, s);
        for (size_t i = 0; i < r.count; ++i) put_f64(out, r.data[i]);
    }
    return out;
}

ModelParams checkpoint_from_bytes(const std::string& bytes) {
    ByteReader in(bytes);
    const std::string magic = in.bytes(4);
    if (std::memcmp(magic.data(), kVgmMagic, 4) != 0)
        throw std::runtime_error("BAD_MAGIC: not a model checkpoint");
    const uint32_t variant_tag = in.u32();
    if (variant_tag > 4) throw std::runtime_error("SCHEMA_MISMATCH: unknown variant tag");
    const uint32_t version = in.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("SCHEMA_MISMATCH: unsupported checkpoint version");
    ModelDims dims;
    dims.n_static = in.u32();
    dims.n_dyn = in.u32();
    dims.n_derived = in.u32();
    dims.z_dim = in.u32();
    dims.d = in.u32();
    dims.hidden = in.u32();
    dims.depth = in.u32();

    ModelParams p = init_model(static_cast<Variant>(variant_tag), dims, 0);
    auto refs = tensor_refs(p);
    const uint32_t count = in.u32();
    if (count != refs.size()) throw std::runtime_error("SCHEMA_MISMATCH: tensor count");
    for (auto& r : refs) {
        const uint16_t len = in.u16();
        const std::string name = in.bytes(len);
        if (name != r.name) throw std::runtime_error("SCHEMA_MISMATCH: tensor name " + name);
        const uint32_t rank = in.u32();
        std::vector<uint32_t> shape(rank);
        for (auto& s : shape) s = in.u32();
        if (shape != r.shape) throw std::runtime_error("SCHEMA_MISMATCH: tensor shape for " + name);
        for (size_t i = 0; i < r.count; ++i) r.data[i] = in.f64();
    }
    if (!in.at_end()) throw std::runtime_error("SCHEMA_MISMATCH: trailing bytes in checkpoint");
    return p;
}

void save_checkpoint(const std::string& path, const ModelParams& p) {
    write_file(path, checkpoint_to_bytes(p));
}

ModelParams load_checkpoint(const std::string& path) {
    return checkpoint_from_bytes(read_file(path));
}

}  // namespace ventgate
