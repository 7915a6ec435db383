#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/tensor.hpp"

namespace mmfuse {

// Trace surrogate of the maximal correlation between two feature batches:
// trace(cov(f,g)) - 1/2 trace(cov(f) cov(g)), population covariances over the
// batch. Inputs are centered per feature internally (idempotent when the
// caller already centered them). Differentiable when inputs are tracked.
Tensor soft_hgr(const Tensor& f, const Tensor& g);

struct ProbeReport {
    std::string name;
    std::string config_hash;
    uint64_t seed = 0;
    nlohmann::json scalars = nlohmann::json::object();
    nlohmann::json rows = nlohmann::json::array();
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
    std::string file_name() const;  // probe_<name>_<confighash>.json
};

// One trial of the concatenation-degeneracy probe: mutual-energy magnitude
// relative to unimodal energies for the padded (concat) path and for the
// plain summation control on the same vectors. nullopt when a vector is
// constant (degenerate energies, trial skipped).
struct ConcatEnergyTrial {
    double ratio_concat = 0.0;
    double ratio_summation = 0.0;
};
std::optional<ConcatEnergyTrial> concat_energy_trial(std::span<const double> x1,
                                                     std::span<const double> x2,
                                                     double lambda);

}  // namespace mmfuse
