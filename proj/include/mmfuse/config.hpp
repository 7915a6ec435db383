#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "mmfuse/fusion.hpp"
#include "mmfuse/modulation.hpp"
#include "mmfuse/synthetic.hpp"

namespace mmfuse {

struct ExperimentConfig {
    FusionKind fusion = FusionKind::summation_fixed;
    bool simam2 = false;
    ModScheme scheme = ModScheme::none;
    double lambda = 1e-6;
    double s = 2.5;
    double alpha = 0.1;
    double learning_rate = 0.03;
    double momentum = 0.9;
    int epochs = 30;
    int batch_size = 64;
    int channels = 32;
    std::string film_conditioner = "a";  // which modality conditions the other
    int mod_epoch_start = 0;             // inclusive window for gradient modulation
    int mod_epoch_end = -1;              // inclusive; -1 means the final epoch
    bool log_both_ratios = false;        // record both ratio schemes when computable
    double hgr_weight = 0.0;             // weight of the |soft_hgr - hgr_target| penalty
    double hgr_target = 0.0;
    uint64_t seed = 1;
    SyntheticSpec synthetic;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);

// throws ConfigError for invalid combinations
void validate_config(const ExperimentConfig& cfg);

// stable hash of the canonical JSON form, hex string
std::string config_hash_hex(const ExperimentConfig& cfg);

}  // namespace mmfuse
