#pragma once

#include <string>

#include <json.hpp>

#include "mmfuse/model.hpp"

namespace mmfuse {

// Self-describing JSON-numeric snapshot of a trained model: every parameter
// tensor keyed by its stable name, the correlation-proxy state, and the
// structural fields needed to rebuild the model. Doubles are serialized in
// shortest round-trip form, so load(save(m)) restores values bit-exactly.
inline constexpr const char* kCheckpointFormat = "mmfuse-checkpoint-v1";

struct Checkpoint {
    std::string format = kCheckpointFormat;
    FusionKind fusion = FusionKind::summation_fixed;
    int channels = 0;
    int num_classes = 0;
    int dim_v = 0;
    int dim_a = 0;
    std::string film_conditioner = "a";
    int epoch = 0;  // epoch the snapshot was taken at
    ParamSet params;
    std::vector<double> var_max;
    double last_r = 0.0;
};

Checkpoint snapshot_model(const Model& m, int epoch);
Model model_from_checkpoint(const Checkpoint& ckpt);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mmfuse
