#include "mmfuse/modulation.hpp"

#include <cmath>

#include "mmfuse/kernels.hpp"

namespace mmfuse {

std::string mod_scheme_name(ModScheme s) {
    switch (s) {
        case ModScheme::none: return "none";
        case ModScheme::decoupled: return "decoupled";
        case ModScheme::decoupling_free: return "decoupling-free";
    }
    return "?";
}

ModScheme parse_mod_scheme(const std::string& name) {
    if (name == "none") return ModScheme::none;
    if (name == "decoupled") return ModScheme::decoupled;
    if (name == "decoupling-free") return ModScheme::decoupling_free;
    throw ConfigError("unknown modulation scheme '" + name +
                      "' (expected none, decoupled or decoupling-free)");
}

std::pair<double, double> ratio_free(const Tensor& zeta) {
    if (!zeta.defined() || zeta.numel() == 0) throw ShapeError("ratio_free: empty zeta");
    double num = 0.0;
    double den = 0.0;
    for (double z : zeta.values()) {
        // sigmoid saturation can round a weight to exactly 0 or 1
        if (!(z >= 0.0 && z <= 1.0))
            throw DegenerateInputError("ratio_free: zeta values must lie in [0,1]");
        num += z;
        den += 1.0 - z;
    }
    if (num == 0.0 || den == 0.0)
        throw DegenerateInputError("ratio_free: all zeta saturated, ratio undefined");
    const double rho_v = num / den;
    return {rho_v, 1.0 / rho_v};
}

std::pair<double, double> ratio_decoupled(const Tensor& logits_v, const Tensor& logits_a,
                                          std::span<const int> labels) {
    if (logits_v.rank() != 2 || logits_a.rank() != 2 ||
        logits_v.shape() != logits_a.shape())
        throw ShapeError("ratio_decoupled: logits must be (batch, classes) of equal shape");
    const int64_t rows = logits_v.dim(0);
    const int64_t cols = logits_v.dim(1);
    if (static_cast<int64_t>(labels.size()) != rows)
        throw ShapeError("ratio_decoupled: label count does not match batch");

    std::vector<double> pv(static_cast<size_t>(rows * cols));
    std::vector<double> pa(static_cast<size_t>(rows * cols));
    kernels::softmax(logits_v.data(), pv.data(), rows, cols, 1);
    kernels::softmax(logits_a.data(), pa.data(), rows, cols, 1);
    double sv = 0.0;
    double sa = 0.0;
    for (int64_t i = 0; i < rows; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= cols) throw ShapeError("ratio_decoupled: label out of range");
        sv += pv[static_cast<size_t>(i * cols + y)];
        sa += pa[static_cast<size_t>(i * cols + y)];
    }
    const double rho_v = sv / sa;
    return {rho_v, 1.0 / rho_v};
}

double coefficient(double rho, double alpha) {
    if (!(rho > 0.0)) throw ShapeError("coefficient: rho must be positive");
    if (!(alpha > 0.0)) throw ShapeError("coefficient: alpha must be positive");
    return rho > 1.0 ? 1.0 - std::tanh(alpha * rho) : 1.0;
}

ParamOwner classify_param(const std::string& name) {
    if (name.rfind("enc_v.", 0) == 0) return ParamOwner::encoder_v;
    if (name.rfind("enc_a.", 0) == 0) return ParamOwner::encoder_a;
    if (name.rfind("gate.", 0) == 0 || name.rfind("film.", 0) == 0 ||
        name.rfind("cls.", 0) == 0)
        return ParamOwner::shared;
    throw ShapeError("classify_param: unknown parameter ownership for '" + name + "'");
}

namespace {

double scale_and_enhance(std::span<double> g, double k, bool ge, CounterRng& rng) {
    for (double& v : g) v *= k;
    if (!ge || g.empty()) return 0.0;
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    double var = 0.0;
    for (double v : g) var += (v - mean) * (v - mean);
    var /= static_cast<double>(g.size());
    const double sd = std::sqrt(var);
    if (sd == 0.0) return 0.0;
    for (double& v : g) v += sd * rng.next_gaussian();
    return sd;
}

}  // namespace

NoiseStats modulate(GradientGroup& grads_v, GradientGroup& grads_a, double k_v, double k_a,
                    bool ge_enabled, CounterRng& rng) {
    if (!(k_v > 0.0 && k_v <= 1.0 && k_a > 0.0 && k_a <= 1.0))
        throw ShapeError("modulate: coefficients must lie in (0,1]");
    NoiseStats stats;
    double acc = 0.0;
    for (auto& g : grads_v.tensors) acc += scale_and_enhance(g, k_v, ge_enabled, rng);
    stats.std_v = grads_v.tensors.empty() ? 0.0 : acc / static_cast<double>(grads_v.tensors.size());
    acc = 0.0;
    for (auto& g : grads_a.tensors) acc += scale_and_enhance(g, k_a, ge_enabled, rng);
    stats.std_a = grads_a.tensors.empty() ? 0.0 : acc / static_cast<double>(grads_a.tensors.size());
    return stats;
}

}  // namespace mmfuse
