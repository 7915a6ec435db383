#include "mmfuse/checkpoint.hpp"

#include <fstream>

namespace mmfuse {

using nlohmann::json;

Checkpoint snapshot_model(const Model& m, int epoch) {
    Checkpoint c;
    c.fusion = m.fusion;
    c.channels = m.channels;
    c.num_classes = m.num_classes;
    c.dim_v = m.dim_v;
    c.dim_a = m.dim_a;
    c.film_conditioner = m.film_conditioner;
    c.epoch = epoch;
    c.params = m.params;
    c.var_max = m.zeta_state.var_max;
    c.last_r = m.zeta_state.last_r;
    return c;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
    ExperimentConfig cfg;
    cfg.fusion = ckpt.fusion;
    cfg.channels = ckpt.channels;
    cfg.film_conditioner = ckpt.film_conditioner;
    Model m = build_model(cfg, ckpt.dim_v, ckpt.dim_a, ckpt.num_classes);
    if (m.params.size() != ckpt.params.size())
        throw ConfigError("checkpoint: parameter set does not match model structure");
    for (size_t i = 0; i < m.params.size(); ++i) {
        Param& dst = m.params.at(static_cast<int>(i));
        const Param& src = ckpt.params.at(static_cast<int>(i));
        if (dst.name != src.name || dst.shape != src.shape)
            throw ConfigError("checkpoint: parameter '" + src.name + "' does not match model");
        dst.value = src.value;
        dst.velocity = src.velocity;
    }
    m.zeta_state.var_max = ckpt.var_max;
    m.zeta_state.last_r = ckpt.last_r;
    return m;
}

json checkpoint_to_json(const Checkpoint& c) {
    json params = json::object();
    for (const auto& p : c.params.all()) {
        params[p.name] = json{{"shape", p.shape}, {"values", p.value}, {"velocity", p.velocity}};
    }
    json order = json::array();
    for (const auto& p : c.params.all()) order.push_back(p.name);
    return json{{"format", c.format},
                {"fusion", fusion_kind_name(c.fusion)},
                {"channels", c.channels},
                {"num_classes", c.num_classes},
                {"dim_v", c.dim_v},
                {"dim_a", c.dim_a},
                {"film_conditioner", c.film_conditioner},
                {"epoch", c.epoch},
                {"param_order", order},
                {"params", params},
                {"zeta_state", json{{"var_max", c.var_max}, {"last_r", c.last_r}}}};
}

Checkpoint checkpoint_from_json(const json& j) {
    Checkpoint c;
    if (!j.is_object() || !j.contains("format"))
        throw ConfigError("checkpoint: malformed file");
    c.format = j.at("format").get<std::string>();
    if (c.format != kCheckpointFormat)
        throw ConfigError("checkpoint: unsupported format tag '" + c.format + "'");
    c.fusion = parse_fusion_kind(j.at("fusion").get<std::string>());
    c.channels = j.at("channels").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.dim_v = j.at("dim_v").get<int>();
    c.dim_a = j.at("dim_a").get<int>();
    c.film_conditioner = j.at("film_conditioner").get<std::string>();
    c.epoch = j.at("epoch").get<int>();
    const json& params = j.at("params");
    for (const auto& name : j.at("param_order")) {
        const json& p = params.at(name.get<std::string>());
        Shape shape = p.at("shape").get<Shape>();
        std::vector<double> values = p.at("values").get<std::vector<double>>();
        const int id = c.params.add(name.get<std::string>(), std::move(shape), std::move(values));
        if (p.contains("velocity"))
            c.params.at(id).velocity = p.at("velocity").get<std::vector<double>>();
    }
    const json& z = j.at("zeta_state");
    c.var_max = z.at("var_max").get<std::vector<double>>();
    c.last_r = z.at("last_r").get<double>();
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
    out << checkpoint_to_json(c).dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("checkpoint parse error: ") + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace mmfuse
