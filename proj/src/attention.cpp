#include "mmfuse/attention.hpp"

#include <cmath>

namespace mmfuse {

namespace {

// broadcast (B,C) zeta over the trailing spatial axis of x when present
Tensor zeta_like(const Tensor& zeta, const Tensor& x) {
    if (zeta.shape() == x.shape()) return zeta;
    if (x.rank() == 3 && zeta.rank() == 2 && zeta.dim(0) == x.dim(0) &&
        zeta.dim(1) == x.dim(1))
        return expand(zeta, 2, x.dim(2));
    throw ShapeError("zeta shape " + shape_str(zeta.shape()) + " does not match features " +
                     shape_str(x.shape()));
}

}  // namespace

Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() == 2) return x;
    if (x.rank() == 3) return reduce(ReduceOp::mean, x, {2});
    throw ShapeError("global_avg_pool: expected (B,C) or (B,C,S), got " + shape_str(x.shape()));
}

Tensor zeta_forward(const Tensor& x1, const Tensor& x2, const ZetaGate& gate) {
    if (x1.shape() != x2.shape())
        throw ShapeError("zeta_forward: shape mismatch between modalities, " +
                         shape_str(x1.shape()) + " vs " + shape_str(x2.shape()));
    Tensor p1 = global_avg_pool(x1);
    Tensor p2 = global_avg_pool(x2);
    const int64_t c = p1.dim(1);
    if (gate.w1.rank() != 2 || gate.w1.dim(0) != 2 * c || gate.w1.dim(1) != c ||
        gate.w2.rank() != 2 || gate.w2.dim(0) != c || gate.w2.dim(1) != c)
        throw ShapeError("zeta_forward: gate parameters do not match channel count");
    Tensor h = relu(affine(concat_cols(p1, p2), gate.w1, gate.b1));
    return sigmoid(affine(h, gate.w2, gate.b2));
}

Tensor superpose(const Tensor& x1, const Tensor& x2, const Tensor& zeta) {
    if (x1.shape() != x2.shape())
        throw ShapeError("superpose: shape mismatch, " + shape_str(x1.shape()) + " vs " +
                         shape_str(x2.shape()));
    Tensor z = zeta_like(zeta, x1);
    return add(mul(z, x1), mul(sub(1.0, z), x2));
}

double correlation_proxy(const Tensor& zeta, ZetaState& state, double s, double lambda) {
    if (zeta.rank() != 2) throw ShapeError("correlation_proxy: zeta must be (batch, channels)");
    if (s <= 0.0 || lambda <= 0.0)
        throw ShapeError("correlation_proxy: s and lambda must be positive");
    const int64_t b = zeta.dim(0);
    const int64_t c = zeta.dim(1);
    if (b < 2)
        throw DegenerateInputError(
            "correlation_proxy: batch variance undefined for batch size 1, reuse last_r");

    if (state.var_max.empty()) state.var_max.assign(static_cast<size_t>(c), 0.0);
    if (static_cast<int64_t>(state.var_max.size()) != c)
        throw ShapeError("correlation_proxy: channel count changed across calls");

    const double* zv = zeta.data();
    double var_sum = 0.0;
    double max_sum = 0.0;
    for (int64_t j = 0; j < c; ++j) {
        double mean = 0.0;
        for (int64_t i = 0; i < b; ++i) mean += zv[i * c + j];
        mean /= static_cast<double>(b);
        double var = 0.0;
        for (int64_t i = 0; i < b; ++i) {
            const double d = zv[i * c + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(b);
        // record the maximum before forming the ratio
        auto& vm = state.var_max[static_cast<size_t>(j)];
        if (var > vm) vm = var;
        var_sum += var;
        max_sum += vm;
    }
    const double r = std::tanh((s * var_sum + lambda) / (max_sum + lambda));
    state.last_r = r;
    return r;
}

Tensor excess_energy(const EnergyMap& e_u, const EnergyMap& e_1, const EnergyMap& e_2,
                     const Tensor& zeta, double r) {
    if (e_1.lambda != 0.0 || e_2.lambda != 0.0)
        throw ShapeError("excess_energy: unimodal energies must be computed with lambda=0");
    if (e_u.lambda <= 0.0)
        throw ShapeError("excess_energy: fused energy must be computed with lambda>0");
    if (!(r > 0.0 && r <= 1.0)) throw ShapeError("excess_energy: r must lie in (0,1]");
    if (e_u.values.shape() != e_1.values.shape() || e_u.values.shape() != e_2.values.shape())
        throw ShapeError("excess_energy: energy map shapes disagree");

    Tensor z = zeta_like(zeta, e_u.values);
    Tensor omz = sub(1.0, z);
    Tensor t = sub(mul(e_u.values, 2.0 - r), mul(mul(z, z), e_1.values));
    return sub(t, mul(mul(omz, omz), e_2.values));
}

Tensor simam2_apply(const Tensor& u, const Tensor& excess) {
    if (u.shape() != excess.shape())
        throw ShapeError("simam2_apply: shape mismatch, " + shape_str(u.shape()) + " vs " +
                         shape_str(excess.shape()));
    return mul(sigmoid(excess), u);
}

Tensor mutual_energy(const EnergyMap& e_u, const EnergyMap& e_1, const EnergyMap& e_2,
                     const Tensor& zeta) {
    if (e_u.values.shape() != e_1.values.shape() || e_u.values.shape() != e_2.values.shape())
        throw ShapeError("mutual_energy: energy map shapes disagree");
    Tensor z = zeta_like(zeta.detached(), e_u.values).detached();
    for (double v : z.values())
        if (v == 0.0 || v == 1.0)
            throw DegenerateInputError(
                "mutual_energy: decomposition undefined for zeta in {0,1}");
    Tensor eu = e_u.values.detached();
    Tensor e1 = e_1.values.detached();
    Tensor e2 = e_2.values.detached();
    Tensor omz = sub(1.0, z);
    Tensor num = sub(sub(eu, mul(mul(z, z), e1)), mul(mul(omz, omz), e2));
    return div(num, mul(mul(z, omz), 2.0));
}

}  // namespace mmfuse
