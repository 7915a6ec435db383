#include "mmfuse/synthetic.hpp"

#include <cmath>

#include "mmfuse/common.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse {

namespace {
constexpr int kSharedDim = 8;
constexpr double kMeanScale = 1.0;
// per-sample reliability spread: noise scale is 1/snr times a unit-mean
// lognormal factor, so some samples have clean and some corrupted readings
// of a modality (as clips do in real audio-visual data)
constexpr double kNoiseLogStd = 0.8;
}  // namespace

Dataset::Split Dataset::split_named(const std::string& name) const {
    if (name == "train") return train();
    if (name == "val") return val();
    if (name == "test") return test();
    throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.num_categories < 2) throw ConfigError("synthetic: num_categories must be >= 2");
    if (spec.dim_a < 1 || spec.dim_v < 1) throw ConfigError("synthetic: dims must be positive");
    if (spec.snr_a <= 0.0 || spec.snr_v <= 0.0) throw ConfigError("synthetic: snr must be > 0");
    if (spec.inter_modal_corr < 0.0 || spec.inter_modal_corr > 1.0)
        throw ConfigError("synthetic: inter_modal_corr must lie in [0,1]");
    if (spec.train_size < 1 || spec.val_size < 1 || spec.test_size < 1)
        throw ConfigError("synthetic: split sizes must be positive");

    CounterRng rng(spec.seed, rng_stream::data);

    const int k = spec.num_categories;
    const int dv = spec.dim_v;
    const int da = spec.dim_a;
    // fixed task structure: category means and shared-latent mixing maps
    std::vector<double> mean_v = rng.gaussian_vec(static_cast<size_t>(k * dv), 0.0, kMeanScale);
    std::vector<double> mean_a = rng.gaussian_vec(static_cast<size_t>(k * da), 0.0, kMeanScale);
    const double mix_scale = 1.0 / std::sqrt(static_cast<double>(kSharedDim));
    std::vector<double> mix_v =
        rng.gaussian_vec(static_cast<size_t>(kSharedDim * dv), 0.0, mix_scale);
    std::vector<double> mix_a =
        rng.gaussian_vec(static_cast<size_t>(kSharedDim * da), 0.0, mix_scale);

    Dataset ds;
    ds.num_categories = k;
    ds.dim_v = dv;
    ds.dim_a = da;
    ds.train_size = spec.train_size;
    ds.val_size = spec.val_size;
    ds.test_size = spec.test_size;
    const int64_t n = ds.total();
    ds.x_v.resize(static_cast<size_t>(n * dv));
    ds.x_a.resize(static_cast<size_t>(n * da));
    ds.y.resize(static_cast<size_t>(n));

    const double noise_v = 1.0 / spec.snr_v;
    const double noise_a = 1.0 / spec.snr_a;
    const double lognorm_shift = -0.5 * kNoiseLogStd * kNoiseLogStd;  // unit mean
    std::vector<double> z(kSharedDim);
    for (int64_t i = 0; i < n; ++i) {
        const int yi = static_cast<int>(rng.next_below(static_cast<uint64_t>(k)));
        ds.y[static_cast<size_t>(i)] = yi;
        for (auto& zv : z) zv = rng.next_gaussian();
        const double burst_v = std::exp(kNoiseLogStd * rng.next_gaussian() + lognorm_shift);
        const double burst_a = std::exp(kNoiseLogStd * rng.next_gaussian() + lognorm_shift);
        double* xv = ds.x_v.data() + i * dv;
        for (int d = 0; d < dv; ++d) {
            double shared = 0.0;
            for (int s = 0; s < kSharedDim; ++s) shared += z[static_cast<size_t>(s)] * mix_v[static_cast<size_t>(s * dv + d)];
            xv[d] = mean_v[static_cast<size_t>(yi * dv + d)] + spec.inter_modal_corr * shared +
                    noise_v * burst_v * rng.next_gaussian();
        }
        double* xa = ds.x_a.data() + i * da;
        for (int d = 0; d < da; ++d) {
            double shared = 0.0;
            for (int s = 0; s < kSharedDim; ++s) shared += z[static_cast<size_t>(s)] * mix_a[static_cast<size_t>(s * da + d)];
            xa[d] = mean_a[static_cast<size_t>(yi * da + d)] + spec.inter_modal_corr * shared +
                    noise_a * burst_a * rng.next_gaussian();
        }
    }
    return ds;
}

Dataset copy_modality_dataset(const SyntheticSpec& spec) {
    SyntheticSpec s = spec;
    s.dim_a = spec.dim_v;
    Dataset ds = gen_synthetic(s);
    ds.x_a = ds.x_v;
    return ds;
}

}  // namespace mmfuse
