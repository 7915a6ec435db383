#pragma once

#include "mmfuse/diagnostics.hpp"
#include "mmfuse/train.hpp"

namespace mmfuse {

// Trains with the soft-HGR MAE penalty forced toward each target and records
// the post-training batch dispersion of zeta (sum over channels of the batch
// variance). include_copy_mode adds a fully-correlated control where modality
// a is a copy of modality v.
ProbeReport zeta_dispersion_probe(const ExperimentConfig& base, std::vector<double> targets,
                                  bool include_copy_mode);

// Runs one training with both discrepancy-ratio schemes recorded every step
// and reports Pearson and Spearman correlation between the rho_v series.
// Requires at least 10 recorded steps.
ProbeReport ratio_agreement_probe(const ExperimentConfig& cfg);

// Distribution of mutual-energy magnitudes of padded random vectors relative
// to unimodal energies, paired with the plain summation control on the same
// vectors.
ProbeReport concat_energy_probe(int trials, int dim, uint64_t seed, double lambda);

// Accuracy gap when swapping which modality conditions the modulation, for
// the plain and zeta-balanced variants, averaged over seeds.
ProbeReport film_order_probe(const ExperimentConfig& base, std::vector<uint64_t> seeds);

}  // namespace mmfuse
