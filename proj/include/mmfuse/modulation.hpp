#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmfuse/rng.hpp"
#include "mmfuse/tensor.hpp"

namespace mmfuse {

enum class ModScheme { none, decoupled, decoupling_free };

std::string mod_scheme_name(ModScheme s);
ModScheme parse_mod_scheme(const std::string& name);

struct ModulationRecord {
    int64_t step = 0;
    double rho_v = 1.0;
    double rho_a = 1.0;
    double k_v = 1.0;
    double k_a = 1.0;
    ModScheme scheme = ModScheme::none;
    double noise_std_v = 0.0;
    double noise_std_a = 0.0;
};

// Discrepancy ratio without decoupling: rho_v = sum(zeta) / sum(1 - zeta)
// over all samples and channels of the batch; rho_a is the reciprocal.
std::pair<double, double> ratio_free(const Tensor& zeta);

// Decoupled ratio from per-modality logits: rho_v = sum over the batch of the
// label-class softmax score of logits_v divided by the same sum for logits_a.
std::pair<double, double> ratio_decoupled(const Tensor& logits_v, const Tensor& logits_a,
                                          std::span<const int> labels);

// Dominant-modality attenuation: k = 1 - tanh(alpha * rho) when rho > 1, else 1.
double coefficient(double rho, double alpha);

// Parameter-gradient ownership. Encoder gradients are modulated; gate, fusion
// and classifier gradients are never touched.
enum class ParamOwner { encoder_v, encoder_a, shared };
ParamOwner classify_param(const std::string& name);

struct GradientGroup {
    std::vector<std::span<double>> tensors;
};

struct NoiseStats {
    double std_v = 0.0;  // mean per-tensor noise std actually applied
    double std_a = 0.0;
};

// Scales each modality's encoder gradients by its coefficient; with
// ge_enabled, adds zero-mean Gaussian noise whose std equals the empirical
// (population) std of that gradient tensor after scaling.
NoiseStats modulate(GradientGroup& grads_v, GradientGroup& grads_a, double k_v, double k_a,
                    bool ge_enabled, CounterRng& rng);

}  // namespace mmfuse
