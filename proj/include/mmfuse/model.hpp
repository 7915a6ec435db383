#pragma once

#include <string>
#include <vector>

#include "mmfuse/attention.hpp"
#include "mmfuse/config.hpp"
#include "mmfuse/fusion.hpp"
#include "mmfuse/rng.hpp"
#include "mmfuse/tensor.hpp"

namespace mmfuse {

struct Param {
    std::string name;
    Shape shape;
    std::vector<double> value;
    std::vector<double> velocity;  // SGD momentum buffer
};

class ParamSet {
public:
    int add(std::string name, Shape shape, std::vector<double> value);
    Param& at(int id) { return params_.at(static_cast<size_t>(id)); }
    const Param& at(int id) const { return params_.at(static_cast<size_t>(id)); }
    Param* find(const std::string& name);
    size_t size() const { return params_.size(); }
    std::vector<Param>& all() { return params_; }
    const std::vector<Param>& all() const { return params_; }

private:
    std::vector<Param> params_;
};

struct AffineIds {
    int w = -1;
    int b = -1;
};

struct GateIds {
    int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

struct FilmIds {
    int scale_w = -1, scale_b = -1, shift_w = -1, shift_b = -1;
};

// Two-layer encoders (affine + relu + affine) into a shared channel width,
// optional gate and modulation generators, linear classifier.
struct Model {
    ParamSet params;
    AffineIds enc_v1, enc_v2, enc_a1, enc_a2, cls;
    GateIds gate;
    bool has_gate = false;
    FilmIds film;
    bool has_film = false;
    ZetaState zeta_state;

    FusionKind fusion = FusionKind::summation_fixed;
    int channels = 0;
    int num_classes = 0;
    int dim_v = 0;
    int dim_a = 0;
    std::string film_conditioner = "a";

    int64_t fused_dim() const {
        return fusion == FusionKind::concatenation ? 2 * channels : channels;
    }
};

Model build_model(const ExperimentConfig& cfg, int dim_v, int dim_a, int num_classes);

// Parameters bound per step: leaves when a graph is given, constants otherwise.
struct BoundParams {
    std::vector<Tensor> tensors;
    const Tensor& at(int id) const { return tensors.at(static_cast<size_t>(id)); }
};

BoundParams bind_params(const Model& m, Graph* g);

Tensor encoder_forward(const BoundParams& bp, const AffineIds& l1, const AffineIds& l2,
                       const Tensor& x);
ZetaGate gate_tensors(const Model& m, const BoundParams& bp);
FilmTensors film_tensors(const Model& m, const BoundParams& bp);

// velocity = momentum * velocity + grad; value -= lr * velocity
void sgd_update(ParamSet& params, const std::vector<std::vector<double>>& grads, double lr,
                double momentum);

}  // namespace mmfuse
