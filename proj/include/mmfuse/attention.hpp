#pragma once

#include <vector>

#include "mmfuse/energy.hpp"
#include "mmfuse/tensor.hpp"

namespace mmfuse {

// Gate parameters bound to the current graph (leaves during training,
// constants at evaluation): pooled modalities are concatenated to a 2C
// vector, passed through a C-wide hidden affine + relu and an output affine,
// then squashed to per-channel weights in (0,1).
struct ZetaGate {
    Tensor w1;  // (2C, C)
    Tensor b1;  // (C)
    Tensor w2;  // (C, C)
    Tensor b2;  // (C)
};

// Persistent statistics of the correlation proxy. var_max is the running
// per-channel maximum of the batch variance of zeta and never resets; last_r
// is reused whenever batch statistics are unavailable (inference, batch of 1).
struct ZetaState {
    std::vector<double> var_max;
    double last_r = 0.76159415595576485;  // tanh(1), the uninformative-gate value

    bool initialized() const { return !var_max.empty(); }
};

// (B,C,S) -> (B,C) channel means; identity on (B,C) vector features.
Tensor global_avg_pool(const Tensor& x);

// Per-sample per-channel weights in (0,1). Differentiable w.r.t. both
// modalities and the gate parameters.
Tensor zeta_forward(const Tensor& x1, const Tensor& x2, const ZetaGate& gate);

// U = zeta*x1 + (1-zeta)*x2; zeta of shape (B,C) broadcasts over a trailing
// spatial axis.
Tensor superpose(const Tensor& x1, const Tensor& x2, const Tensor& zeta);

// Ratio of current to maximal batch dispersion of zeta, squashed by tanh.
// Updates state.var_max before computing r and stores r in state.last_r.
// Uses zeta values only: the proxy is a measurement, not a training signal.
double correlation_proxy(const Tensor& zeta, ZetaState& state, double s, double lambda);

// E* = (2-r)*e_u - zeta^2*e_1 - (1-zeta)^2*e_2 elementwise. e_1 and e_2 must
// carry lambda=0; e_u must carry lambda>0.
Tensor excess_energy(const EnergyMap& e_u, const EnergyMap& e_1, const EnergyMap& e_2,
                     const Tensor& zeta, double r);

// Fused-feature update: sigmoid(E*) ⊙ U.
Tensor simam2_apply(const Tensor& u, const Tensor& excess);

// Diagnostic only: the cross term of the fused-energy decomposition,
// (e_u - zeta^2 e_1 - (1-zeta)^2 e_2) / (2 zeta (1-zeta)). Never tracked.
Tensor mutual_energy(const EnergyMap& e_u, const EnergyMap& e_1, const EnergyMap& e_2,
                     const Tensor& zeta);

}  // namespace mmfuse
