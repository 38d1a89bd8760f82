#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ventgate/rng.hpp"

namespace ventgate {

enum class Activation : uint32_t { RELU = 0, SIGMOID = 1, IDENTITY = 2 };

enum class Variant : uint32_t { EHR_ONLY = 0, CXR_ONLY = 1, CONCAT = 2, ATTENTION = 3, GATED = 4 };

const char* variant_name(Variant v);  // ehr, cxr, concat, attention, gated
std::optional<Variant> variant_from_name(std::string_view name);

struct DenseParams {
    uint32_t out_dim = 0;
    uint32_t in_dim = 0;
    Activation activation = Activation::IDENTITY;
    std::vector<double> weight;  // out_dim x in_dim, row-major
    std::vector<double> bias;    // out_dim
};

// Per-variable decay rates, pre-softplus.
struct TslmParams {
    std::vector<double> rho;
};

struct GateParams {
    std::vector<double> w;  // length 2d
    double b = 0.0;
};

struct ModelDims {
    uint32_t n_static = 0;
    uint32_t n_dyn = 0;
    uint32_t n_derived = 0;
    uint32_t z_dim = 0;   // embedding width; 0 when no imaging branch exists
    uint32_t d = 64;      // shared latent width
    uint32_t hidden = 64; // hidden-layer width of encoder and projection
    uint32_t depth = 2;   // hidden layers per branch

    uint32_t ehr_input() const { return n_static + 2 * n_dyn + n_derived; }
    bool operator==(const ModelDims&) const = default;
};

// Every branch is allocated regardless of variant so checkpoints have one
// shape per dims; unused branches simply receive zero gradient.
struct ModelParams {
    Variant variant = Variant::GATED;
    ModelDims dims;
    TslmParams tslm;
    std::vector<DenseParams> ehr_encoder;  // depth hidden RELU layers + IDENTITY layer to d
    std::vector<DenseParams> projection;   // same shape over z_dim input; empty when z_dim=0
    DenseParams fusion;                    // 2d -> d IDENTITY (CONCAT)
    DenseParams attn_e, attn_c;            // d -> 1 IDENTITY scoring layers (ATTENTION)
    GateParams gate;                       // scalar gate over [h_e; h_c] (GATED)
    DenseParams head;                      // d -> 1 SIGMOID
};

ModelParams init_model(Variant variant, const ModelDims& dims, uint64_t seed);
ModelParams zeros_like(const ModelParams& p);

// Flat view of every learnable tensor, in a fixed order shared by the
// optimizer, the checkpoint format and finite-difference sweeps.
struct TensorRef {
    std::string name;
    double* data = nullptr;
    size_t count = 0;
    std::vector<uint32_t> shape;
};
std::vector<TensorRef> tensor_refs(ModelParams& p);

// ---- forward pieces (also exposed for direct testing) ---------------------------

// [x_d * exp(-softplus(rho) * dt/24) ; dt/24]; rejects negative dt.
std::vector<double> tslm_transform(const std::vector<double>& x_d,
                                   const std::vector<double>& delta_t, const TslmParams& params);

std::vector<double> dense_forward(const DenseParams& layer, const std::vector<double>& in);

// x row is [static ; dynamic ; derived] in schema order; dt in hours.
std::vector<double> encode_ehr(const std::vector<double>& x, const std::vector<double>& dt,
                               const ModelParams& p);
std::vector<double> project_image(const std::vector<double>& z, const ModelParams& p);

// h = (1-g) h_e + g h_c with g = sigmoid(w.[h_e;h_c] + b).
std::pair<std::vector<double>, double> gate_and_fuse(const std::vector<double>& h_e,
                                                     const std::vector<double>& h_c,
                                                     const GateParams& gate);

struct AttentionOut {
    std::vector<double> h;
    double w_e = 0.0, w_c = 0.0;  // softmax weights, sum to 1
};
AttentionOut attention_fuse(const std::vector<double>& h_e, const std::vector<double>& h_c,
                            const DenseParams& score_e, const DenseParams& score_c);

// ---- whole-model forward/backward ------------------------------------------------

// One sample as stored in the row dataset; null pointers mark absent
// modalities. Feature rows are f32 on disk and in memory; all arithmetic
// above them runs in double.
struct SampleView {
    const float* x = nullptr;   // n_static + n_dyn + n_derived
    const float* dt = nullptr;  // n_dyn
    const float* z = nullptr;   // z_dim
};

// probability in (0,1); gate_out receives g for GATED, attention weight w_c
// for ATTENTION, otherwise untouched
double predict(const ModelParams& p, const SampleView& s, double* gate_out = nullptr);

struct Batch {
    std::vector<SampleView> samples;
    std::vector<uint8_t> labels;
    size_t size() const { return samples.size(); }
};

// Mean binary cross-entropy over the batch plus exact analytic gradients,
// accumulated into `grads` (caller zeroes). Positive samples may be
// up-weighted; dropout (training only) uses the supplied rng for masks.
struct BackwardOpts {
    double dropout_rate = 0.0;
    Rng* rng = nullptr;
    double pos_weight = 1.0;
};
double model_forward_backward(const ModelParams& p, const Batch& batch, ModelParams& grads,
                              const BackwardOpts& opts = {});

// ---- checkpoint ------------------------------------------------------------------

std::string checkpoint_to_bytes(const ModelParams& p);
ModelParams checkpoint_from_bytes(const std::string& bytes);
void save_checkpoint(const std::string& path, const ModelParams& p);
ModelParams load_checkpoint(const std::string& path);

}  // namespace ventgate
