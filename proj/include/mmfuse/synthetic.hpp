#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mmfuse {

// Controllable bimodal classification task: per sample, a category-dependent
// mean plus a shared latent mixed into both modalities (weight
// inter_modal_corr) plus per-modality Gaussian noise of scale 1/snr. Large
// snr_a with small snr_v makes modality a dominant and v weak.
struct SyntheticSpec {
    int num_categories = 6;
    int dim_a = 20;
    int dim_v = 20;
    double snr_a = 0.5;
    double snr_v = 0.18;
    double inter_modal_corr = 0.3;
    int train_size = 1600;
    int val_size = 300;
    int test_size = 1000;
    uint64_t seed = 1;
};

struct Dataset {
    int num_categories = 0;
    int dim_v = 0;
    int dim_a = 0;
    int64_t train_size = 0;
    int64_t val_size = 0;
    int64_t test_size = 0;
    // rows ordered train, then val, then test
    std::vector<double> x_v;
    std::vector<double> x_a;
    std::vector<int> y;

    int64_t total() const { return train_size + val_size + test_size; }

    struct Split {
        int64_t offset;
        int64_t size;
    };
    Split train() const { return {0, train_size}; }
    Split val() const { return {train_size, val_size}; }
    Split test() const { return {train_size + val_size, test_size}; }
    Split split_named(const std::string& name) const;
};

Dataset gen_synthetic(const SyntheticSpec& spec);

// replace modality a with a copy of modality v (fully correlated control)
Dataset copy_modality_dataset(const SyntheticSpec& spec);

}  // namespace mmfuse
