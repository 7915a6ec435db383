#include "mmfuse/energy.hpp"

namespace mmfuse {

ChannelStats channel_stats(const Tensor& x) {
    if (x.rank() < 1) throw ShapeError("channel_stats: rank-0 tensor");
    const int last = x.rank() - 1;
    Tensor mu = reduce(ReduceOp::mean, x, {last});
    Tensor var = reduce(ReduceOp::var, x, {last});
    return {mu, var};
}

EnergyMinimizer closed_form_minimizer(double t, std::span<const double> others, double lambda) {
    if (others.empty()) throw ShapeError("closed_form_minimizer: no other neurons");
    if (lambda < 0.0) throw ShapeError("closed_form_minimizer: lambda must be >= 0");
    double mu = 0.0;
    for (double v : others) mu += v;
    mu /= static_cast<double>(others.size());
    double s2 = 0.0;
    for (double v : others) s2 += (v - mu) * (v - mu);
    s2 /= static_cast<double>(others.size());

    const double d = t - mu;
    const double denom = d * d + 2.0 * s2 + 2.0 * lambda;
    if (denom == 0.0)
        throw DegenerateInputError(
            "closed_form_minimizer: all neurons equal with lambda=0, energy has no unique minimum");
    EnergyMinimizer m;
    m.w = 2.0 * d / denom;
    m.b = -0.5 * (t + mu) * m.w;
    return m;
}

double energy_at(double t, std::span<const double> others, double w, double b, double lambda) {
    if (others.empty()) throw ShapeError("energy_at: no other neurons");
    double acc = 0.0;
    for (double x : others) {
        const double r = -1.0 - (w * x + b);
        acc += r * r;
    }
    acc /= static_cast<double>(others.size());
    const double rt = 1.0 - (w * t + b);
    return acc + rt * rt + lambda * w * w;
}

EnergyMap minimal_energy_map(const Tensor& x, double lambda) {
    if (x.rank() < 1) throw ShapeError("minimal_energy_map: rank-0 tensor");
    if (lambda < 0.0) throw ShapeError("minimal_energy_map: lambda must be >= 0");
    const int last = x.rank() - 1;
    const int64_t m = x.dim(last);
    if (m < 2) throw ShapeError("minimal_energy_map: channel size must be >= 2");

    Tensor mu = expand(reduce(ReduceOp::mean, x, {last}), last, m);
    Tensor d = sub(x, mu);
    Tensor d2 = mul(d, d);
    Tensor s2 = expand(reduce(ReduceOp::mean, d2, {last}), last, m);

    Tensor denom = add(add(d2, mul(s2, 2.0)), 2.0 * lambda);
    for (double v : denom.values())
        if (v == 0.0)
            throw DegenerateInputError(
                "minimal_energy_map: constant channel with lambda=0 has no defined energy");
    Tensor e = div(add(mul(s2, 4.0), 4.0 * lambda), denom);
    return {e, lambda};
}

Tensor simam_unimodal(const Tensor& x, double lambda) {
    EnergyMap e = minimal_energy_map(x, lambda);
    return mul(x, sigmoid(div(1.0, e.values)));
}

}  // namespace mmfuse
