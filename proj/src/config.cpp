#include "mmfuse/config.hpp"

#include <fstream>
#include <set>

namespace mmfuse {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(std::string(where) + ": unknown key '" + it.key() + "'");
}

template <typename T>
void read(const json& j, const char* key, T& into) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    check_keys(j,
               {"fusion", "simam2", "scheme", "lambda", "s", "alpha", "learning_rate",
                "momentum", "epochs", "batch_size", "channels", "film_conditioner",
                "mod_epoch_start", "mod_epoch_end", "log_both_ratios", "hgr_weight",
                "hgr_target", "seed", "synthetic"},
               "config");
    ExperimentConfig cfg;
    if (j.contains("fusion")) cfg.fusion = parse_fusion_kind(j.at("fusion").get<std::string>());
    read(j, "simam2", cfg.simam2);
    if (j.contains("scheme")) cfg.scheme = parse_mod_scheme(j.at("scheme").get<std::string>());
    read(j, "lambda", cfg.lambda);
    read(j, "s", cfg.s);
    read(j, "alpha", cfg.alpha);
    read(j, "learning_rate", cfg.learning_rate);
    read(j, "momentum", cfg.momentum);
    read(j, "epochs", cfg.epochs);
    read(j, "batch_size", cfg.batch_size);
    read(j, "channels", cfg.channels);
    read(j, "film_conditioner", cfg.film_conditioner);
    read(j, "mod_epoch_start", cfg.mod_epoch_start);
    read(j, "mod_epoch_end", cfg.mod_epoch_end);
    read(j, "log_both_ratios", cfg.log_both_ratios);
    read(j, "hgr_weight", cfg.hgr_weight);
    read(j, "hgr_target", cfg.hgr_target);
    read(j, "seed", cfg.seed);
    if (j.contains("synthetic")) {
        const json& s = j.at("synthetic");
        check_keys(s,
                   {"num_categories", "dim_a", "dim_v", "snr_a", "snr_v", "inter_modal_corr",
                    "train_size", "val_size", "test_size", "seed"},
                   "synthetic");
        read(s, "num_categories", cfg.synthetic.num_categories);
        read(s, "dim_a", cfg.synthetic.dim_a);
        read(s, "dim_v", cfg.synthetic.dim_v);
        read(s, "snr_a", cfg.synthetic.snr_a);
        read(s, "snr_v", cfg.synthetic.snr_v);
        read(s, "inter_modal_corr", cfg.synthetic.inter_modal_corr);
        read(s, "train_size", cfg.synthetic.train_size);
        read(s, "val_size", cfg.synthetic.val_size);
        read(s, "test_size", cfg.synthetic.test_size);
        read(s, "seed", cfg.synthetic.seed);
    }
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    json s{{"num_categories", cfg.synthetic.num_categories},
           {"dim_a", cfg.synthetic.dim_a},
           {"dim_v", cfg.synthetic.dim_v},
           {"snr_a", cfg.synthetic.snr_a},
           {"snr_v", cfg.synthetic.snr_v},
           {"inter_modal_corr", cfg.synthetic.inter_modal_corr},
           {"train_size", cfg.synthetic.train_size},
           {"val_size", cfg.synthetic.val_size},
           {"test_size", cfg.synthetic.test_size},
           {"seed", cfg.synthetic.seed}};
    return json{{"fusion", fusion_kind_name(cfg.fusion)},
                {"simam2", cfg.simam2},
                {"scheme", mod_scheme_name(cfg.scheme)},
                {"lambda", cfg.lambda},
                {"s", cfg.s},
                {"alpha", cfg.alpha},
                {"learning_rate", cfg.learning_rate},
                {"momentum", cfg.momentum},
                {"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size},
                {"channels", cfg.channels},
                {"film_conditioner", cfg.film_conditioner},
                {"mod_epoch_start", cfg.mod_epoch_start},
                {"mod_epoch_end", cfg.mod_epoch_end},
                {"log_both_ratios", cfg.log_both_ratios},
                {"hgr_weight", cfg.hgr_weight},
                {"hgr_target", cfg.hgr_target},
                {"seed", cfg.seed},
                {"synthetic", s}};
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.lambda <= 0.0) throw ConfigError("lambda must be positive");
    if (cfg.s <= 0.0) throw ConfigError("s must be positive");
    if (cfg.alpha <= 0.0) throw ConfigError("alpha must be positive");
    if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
        throw ConfigError("momentum must lie in [0,1)");
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.channels < 2) throw ConfigError("channels must be >= 2");
    if (cfg.film_conditioner != "a" && cfg.film_conditioner != "v")
        throw ConfigError("film_conditioner must be 'a' or 'v'");
    if (cfg.mod_epoch_start < 0) throw ConfigError("mod_epoch_start must be >= 0");
    if (cfg.mod_epoch_end != -1 && cfg.mod_epoch_end < cfg.mod_epoch_start)
        throw ConfigError("mod_epoch_end must be -1 or >= mod_epoch_start");
    if (cfg.hgr_weight < 0.0) throw ConfigError("hgr_weight must be >= 0");

    const bool is_film =
        cfg.fusion == FusionKind::film || cfg.fusion == FusionKind::film_zeta;
    if (cfg.scheme == ModScheme::decoupled && is_film)
        throw ConfigError(
            "decoupled ratios are undefined for film fusion (nonlinear coupling); use "
            "decoupling-free with film-zeta or another fusion");
    if (cfg.scheme == ModScheme::decoupling_free && !fusion_has_gate(cfg.fusion))
        throw ConfigError("decoupling-free modulation needs learnable zeta; use "
                          "summation-learnable or film-zeta fusion");
    if (cfg.log_both_ratios) {
        if (!fusion_has_gate(cfg.fusion))
            throw ConfigError("log_both_ratios needs learnable zeta for the free ratio");
        if (is_film)
            throw ConfigError("log_both_ratios needs a fusion with defined decoupled ratios");
    }

    // synthetic spec bounds mirror gen_synthetic
    const auto& s = cfg.synthetic;
    if (s.num_categories < 2) throw ConfigError("synthetic.num_categories must be >= 2");
    if (s.dim_a < 1 || s.dim_v < 1) throw ConfigError("synthetic dims must be positive");
    if (s.snr_a <= 0.0 || s.snr_v <= 0.0) throw ConfigError("synthetic snr must be > 0");
    if (s.inter_modal_corr < 0.0 || s.inter_modal_corr > 1.0)
        throw ConfigError("synthetic.inter_modal_corr must lie in [0,1]");
    if (s.train_size < 1 || s.val_size < 1 || s.test_size < 1)
        throw ConfigError("synthetic split sizes must be positive");
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
    const std::string text = config_to_json(cfg).dump();
    uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace mmfuse
