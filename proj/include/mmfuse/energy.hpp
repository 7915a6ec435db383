#pragma once

#include <span>

#include "mmfuse/tensor.hpp"

namespace mmfuse {

// Per-neuron minimal energies. Statistics are taken over the last axis:
// (B, C, S) features group per (sample, channel) over spatial positions,
// (B, C) vector features group per sample over the whole feature vector.
struct EnergyMap {
    Tensor values;
    double lambda = 0.0;
};

// All-neuron mean and population variance per group (last axis removed).
struct ChannelStats {
    Tensor mu_hat;
    Tensor sigma_hat2;
};

ChannelStats channel_stats(const Tensor& x);

// Closed-form minimizer of the per-neuron energy for target value t against
// the remaining neurons of its channel (leave-one-out statistics).
struct EnergyMinimizer {
    double w = 0.0;
    double b = 0.0;
};

EnergyMinimizer closed_form_minimizer(double t, std::span<const double> others, double lambda);

// The per-neuron energy for an arbitrary linear transform (w, b).
double energy_at(double t, std::span<const double> others, double w, double b, double lambda);

// Elementwise minimal energy over every neuron of every channel. Differentiable.
// A constant channel with lambda == 0 has no defined minimum and raises
// DegenerateInputError rather than returning 0/0.
EnergyMap minimal_energy_map(const Tensor& x, double lambda);

// Unimodal attention: x * sigmoid(1 / e*).
Tensor simam_unimodal(const Tensor& x, double lambda);

}  // namespace mmfuse
