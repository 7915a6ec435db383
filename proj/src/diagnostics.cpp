#include "mmfuse/diagnostics.hpp"

#include <cmath>

#include "mmfuse/attention.hpp"
#include "mmfuse/energy.hpp"

namespace mmfuse {

Tensor soft_hgr(const Tensor& f, const Tensor& g) {
    if (f.rank() != 2 || g.rank() != 2 || f.dim(0) != g.dim(0))
        throw ShapeError("soft_hgr: expected (B,K) features with a common batch");
    const int64_t b = f.dim(0);
    if (b < 2) throw DegenerateInputError("soft_hgr: batch must be >= 2");
    const double inv_b = 1.0 / static_cast<double>(b);

    Tensor fc = sub(f, expand(reduce(ReduceOp::mean, f, {0}), 0, b));
    Tensor gc = sub(g, expand(reduce(ReduceOp::mean, g, {0}), 0, b));
    // trace(cov(f,g)) over matching features requires equal widths; the
    // penalty term is defined for any pair of widths but the probe only uses
    // equal ones, so keep the contract tight.
    if (f.dim(1) != g.dim(1)) throw ShapeError("soft_hgr: feature widths disagree");

    Tensor cross = mul(reduce_all(ReduceOp::sum, mul(fc, gc)), inv_b);
    Tensor cov_f = mul(matmul(transpose(fc), fc), inv_b);
    Tensor cov_g = mul(matmul(transpose(gc), gc), inv_b);
    // both covariances are symmetric, so trace(cov_f cov_g) = sum(cov_f ⊙ cov_g)
    Tensor penalty = reduce_all(ReduceOp::sum, mul(cov_f, cov_g));
    return sub(cross, mul(penalty, 0.5));
}

nlohmann::json ProbeReport::to_json() const {
    return nlohmann::json{{"probe", name},     {"config_hash", config_hash},
                          {"seed", seed},      {"scalars", scalars},
                          {"rows", rows},      {"notes", notes}};
}

std::string ProbeReport::file_name() const {
    return "probe_" + name + "_" + config_hash + ".json";
}

namespace {

bool constant_vector(std::span<const double> x) {
    for (double v : x)
        if (v != x[0]) return false;
    return true;
}

// mean |mutual energy| over neurons relative to mean unimodal energy, for a
// fixed 0.5 superposition of the given operands
double mutual_ratio(const Tensor& op1, const Tensor& op2, double lambda) {
    Tensor zeta = Tensor::full(op1.shape(), 0.5);
    Tensor u = superpose(op1, op2, zeta);
    EnergyMap eu = minimal_energy_map(u, lambda);
    EnergyMap e1 = minimal_energy_map(op1, 0.0);
    EnergyMap e2 = minimal_energy_map(op2, 0.0);
    Tensor e = mutual_energy(eu, e1, e2, zeta);
    double num = 0.0;
    for (double v : e.values()) num += std::abs(v);
    num /= static_cast<double>(e.numel());
    double den = 0.0;
    for (double v : e1.values.values()) den += v;
    for (double v : e2.values.values()) den += v;
    den /= static_cast<double>(e1.values.numel());
    return num / den;
}

}  // namespace

std::optional<ConcatEnergyTrial> concat_energy_trial(std::span<const double> x1,
                                                     std::span<const double> x2,
                                                     double lambda) {
    if (x1.size() != x2.size() || x1.size() < 2)
        throw ShapeError("concat_energy_trial: need equal-length vectors of size >= 2");
    if (constant_vector(x1) || constant_vector(x2)) return std::nullopt;  // degenerate, skip

    const int64_t c = static_cast<int64_t>(x1.size());
    Tensor v1(std::vector<double>(x1.begin(), x1.end()), {c});
    Tensor v2(std::vector<double>(x2.begin(), x2.end()), {c});

    ConcatEnergyTrial out;
    out.ratio_concat = mutual_ratio(pad_last(v1, 0, c), pad_last(v2, c, 0), lambda);
    out.ratio_summation = mutual_ratio(v1, v2, lambda);
    return out;
}

}  // namespace mmfuse
