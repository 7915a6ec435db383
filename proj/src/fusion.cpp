#include "mmfuse/fusion.hpp"

namespace mmfuse {

std::string fusion_kind_name(FusionKind k) {
    switch (k) {
        case FusionKind::summation_fixed: return "summation-fixed";
        case FusionKind::summation_learnable: return "summation-learnable";
        case FusionKind::film: return "film";
        case FusionKind::film_zeta: return "film-zeta";
        case FusionKind::concatenation: return "concatenation";
    }
    return "?";
}

FusionKind parse_fusion_kind(const std::string& name) {
    if (name == "summation-fixed") return FusionKind::summation_fixed;
    if (name == "summation-learnable") return FusionKind::summation_learnable;
    if (name == "film") return FusionKind::film;
    if (name == "film-zeta") return FusionKind::film_zeta;
    if (name == "concatenation") return FusionKind::concatenation;
    throw ConfigError("unknown fusion kind '" + name +
                      "' (expected summation-fixed, summation-learnable, film, film-zeta or "
                      "concatenation)");
}

bool fusion_has_gate(FusionKind k) {
    return k == FusionKind::summation_learnable || k == FusionKind::film_zeta;
}

namespace {

Tensor fixed_half(const Tensor& like) {
    Tensor pooled = global_avg_pool(like);
    return Tensor::full(pooled.shape(), 0.5);
}

}  // namespace

FusionResult fuse_summation(const Tensor& x1, const Tensor& x2, bool learnable,
                            const ZetaGate* gate) {
    if (x1.shape() != x2.shape())
        throw ShapeError("fuse_summation: shape mismatch, " + shape_str(x1.shape()) + " vs " +
                         shape_str(x2.shape()));
    FusionResult out;
    if (learnable) {
        if (!gate) throw ShapeError("fuse_summation: learnable zeta requires gate state");
        out.zeta = zeta_forward(x1, x2, *gate);
        out.zeta_learned = true;
    } else {
        out.zeta = fixed_half(x1);
    }
    out.fused = superpose(x1, x2, out.zeta);
    out.operand1 = x1;
    out.operand2 = x2;
    return out;
}

FusionResult fuse_film(const Tensor& conditioner, const Tensor& target,
                       const FilmTensors& film, bool with_zeta, const ZetaGate* gate) {
    if (target.rank() != 2)
        throw ShapeError("fuse_film: modulated features must be (B,C)");
    Tensor pooled = global_avg_pool(conditioner);
    if (pooled.rank() != 2 || pooled.dim(0) != target.dim(0))
        throw ShapeError("fuse_film: conditioner and target batch sizes disagree");
    Tensor gamma = affine(pooled, film.scale_w, film.scale_b);
    Tensor beta = affine(pooled, film.shift_w, film.shift_b);
    if (gamma.shape() != target.shape() || beta.shape() != target.shape())
        throw ShapeError("fuse_film: gamma/beta shape does not match modulated features");

    FusionResult out;
    out.operand1 = mul(gamma, target);
    out.operand2 = beta;
    if (with_zeta) {
        if (!gate) throw ShapeError("fuse_film: with_zeta requires gate state");
        out.zeta = zeta_forward(out.operand1, out.operand2, *gate);
        out.zeta_learned = true;
        out.fused = superpose(out.operand1, out.operand2, out.zeta);
    } else {
        // plain modulation; the two terms still act as the modalities with
        // equal weight for energy purposes
        out.zeta = fixed_half(out.operand1);
        out.fused = add(out.operand1, out.operand2);
    }
    return out;
}

FusionResult fuse_concat(const Tensor& x1, const Tensor& x2) {
    if (x1.rank() != x2.rank() || x1.rank() < 1)
        throw ShapeError("fuse_concat: operands must have equal rank >= 1");
    if (x1.rank() == 2 && x1.dim(0) != x2.dim(0))
        throw ShapeError("fuse_concat: batch sizes disagree");
    const int64_t c1 = x1.dim(x1.rank() - 1);
    const int64_t c2 = x2.dim(x2.rank() - 1);
    FusionResult out;
    out.operand1 = pad_last(x1, 0, c2);
    out.operand2 = pad_last(x2, c1, 0);
    out.zeta = fixed_half(out.operand1);
    out.fused = superpose(out.operand1, out.operand2, out.zeta);
    out.layout = ConcatLayout{c1, c2};
    return out;
}

Tensor apply_simam2(const FusionResult& fusion, ZetaState& state, double lambda, double s,
                    bool training) {
    if (lambda <= 0.0) throw ShapeError("apply_simam2: lambda must be positive");
    EnergyMap e1 = minimal_energy_map(fusion.operand1, 0.0);
    EnergyMap e2 = minimal_energy_map(fusion.operand2, 0.0);
    EnergyMap eu = minimal_energy_map(fusion.fused, lambda);

    double r = state.last_r;
    if (training && fusion.zeta.rank() == 2 && fusion.zeta.dim(0) >= 2)
        r = correlation_proxy(fusion.zeta.detached(), state, s, lambda);

    Tensor estar = excess_energy(eu, e1, e2, fusion.zeta, r);
    return simam2_apply(fusion.fused, estar);
}

}  // namespace mmfuse
