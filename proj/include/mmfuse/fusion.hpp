#pragma once

#include <optional>
#include <string>

#include "mmfuse/attention.hpp"
#include "mmfuse/tensor.hpp"

namespace mmfuse {

enum class FusionKind {
    summation_fixed,
    summation_learnable,
    film,
    film_zeta,
    concatenation,
};

std::string fusion_kind_name(FusionKind k);
FusionKind parse_fusion_kind(const std::string& name);
// kinds whose zeta comes from the learnable gate
bool fusion_has_gate(FusionKind k);

// Split point of padded concatenation, so a classifier can be decoupled at
// the boundary.
struct ConcatLayout {
    int64_t c1 = 0;
    int64_t c2 = 0;
};

// Affine generators mapping the pooled conditioner to per-feature scale and
// shift, bound to the current graph.
struct FilmTensors {
    Tensor scale_w;  // (C, C)
    Tensor scale_b;  // (C)
    Tensor shift_w;  // (C, C)
    Tensor shift_b;  // (C)
};

struct FusionResult {
    Tensor fused;                       // U
    Tensor zeta;                        // (B, C_fused); constant 0.5 for fixed kinds
    Tensor operand1;                    // effective superposed operands
    Tensor operand2;
    std::optional<ConcatLayout> layout; // concatenation only
    bool zeta_learned = false;
};

// Summation: fixed zeta = 0.5 or learnable zeta from the gate.
FusionResult fuse_summation(const Tensor& x1, const Tensor& x2, bool learnable,
                            const ZetaGate* gate);

// Feature-wise modulation U = gamma*F + beta, and the zeta-balanced variant
// U = zeta*(gamma*F) + (1-zeta)*beta whose two terms act as the modalities.
// with_zeta requires the gate.
FusionResult fuse_film(const Tensor& conditioner, const Tensor& target,
                       const FilmTensors& film, bool with_zeta, const ZetaGate* gate);

// Concatenation expressed as padded summation with fixed zeta = 0.5.
FusionResult fuse_concat(const Tensor& x1, const Tensor& x2);

// SimAM^2 around any fusion result: unimodal energies at lambda=0 on the
// effective operands, fused energy at lambda>0, correlation proxy, excess
// energy, sigmoid gating. During training with batch >= 2 the proxy state is
// updated; otherwise state.last_r is reused.
Tensor apply_simam2(const FusionResult& fusion, ZetaState& state, double lambda, double s,
                    bool training);

}  // namespace mmfuse
