#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mmfuse/rng.hpp"
#include "mmfuse/tensor.hpp"

namespace testutil {

using mmfuse::CounterRng;
using mmfuse::Graph;
using mmfuse::Shape;
using mmfuse::Tensor;

inline Tensor random_tensor(CounterRng& rng, Shape shape, double lo = -2.0, double hi = 2.0) {
    auto n = static_cast<size_t>(mmfuse::shape_numel(shape));
    return Tensor(rng.uniform_vec(n, lo, hi), shape);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

// Relative gradient error of a scalar-valued tensor function against central
// finite differences, one norm-ratio per input, worst over inputs.
inline double grad_rel_err(const std::vector<std::vector<double>>& inputs,
                           const std::vector<Shape>& shapes,
                           const std::function<Tensor(std::vector<Tensor>&)>& f,
                           double h = 1e-5) {
    Graph g;
    std::vector<Tensor> leaves;
    for (size_t i = 0; i < inputs.size(); ++i) leaves.push_back(g.leaf(inputs[i], shapes[i]));
    Tensor loss = f(leaves);
    g.backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& leaf : leaves) {
        auto gr = g.grad(leaf);
        analytic.emplace_back(gr.begin(), gr.end());
    }

    auto eval = [&](const std::vector<std::vector<double>>& vals) {
        Graph g2;
        std::vector<Tensor> l2;
        for (size_t i = 0; i < vals.size(); ++i) l2.push_back(g2.leaf(vals[i], shapes[i]));
        return f(l2).scalar_value();
    };

    double worst = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i) {
        double diff2 = 0.0, na2 = 0.0, nf2 = 0.0;
        for (size_t j = 0; j < inputs[i].size(); ++j) {
            auto pert = inputs;
            pert[i][j] += h;
            const double up = eval(pert);
            pert[i][j] -= 2.0 * h;
            const double down = eval(pert);
            const double fd = (up - down) / (2.0 * h);
            const double d = analytic[i][j] - fd;
            diff2 += d * d;
            na2 += analytic[i][j] * analytic[i][j];
            nf2 += fd * fd;
        }
        const double denom = std::sqrt(na2) + std::sqrt(nf2);
        if (denom > 1e-12) worst = std::max(worst, std::sqrt(diff2) / denom);
    }
    return worst;
}

}  // namespace testutil
