#include "mmfuse/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmfuse/checkpoint.hpp"
#include "mmfuse/config.hpp"
#include "mmfuse/probes.hpp"
#include "mmfuse/train.hpp"

namespace mmfuse {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

ExperimentConfig load_cfg(const std::string& path, int64_t seed_override) {
    ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config_file(path);
    if (seed_override >= 0) {
        cfg.seed = static_cast<uint64_t>(seed_override);
        cfg.synthetic.seed = static_cast<uint64_t>(seed_override);
    }
    validate_config(cfg);
    return cfg;
}

void print_metrics_row(const MetricsRow& row) {
    std::cout << metrics_csv_header() << "\n" << metrics_csv_row(row) << "\n";
}

int cmd_train(const std::string& config_path, int64_t seed, const std::string& out_dir) {
    ExperimentConfig cfg = load_cfg(config_path, seed);
    TrainOutput result = train(cfg);

    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "metrics.csv", metrics_to_csv(result.metrics));
    write_text(fs::path(out_dir) / "modulation.csv", modulation_csv(result.mod_records));
    write_text(fs::path(out_dir) / "config.json", config_to_json(cfg).dump(1) + "\n");
    save_checkpoint(result.best, (fs::path(out_dir) / "checkpoint.json").string());

    std::cout << "best_epoch=" << result.best_epoch << " val_top1="
              << format_double(result.metrics[static_cast<size_t>(2 * result.best_epoch + 1)]
                                   .top1_accuracy)
              << "\n";
    print_metrics_row(result.test_row);
    std::cout << "outputs in " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& config_path,
             const std::string& split, int64_t seed, const std::string& out_dir) {
    ExperimentConfig cfg = load_cfg(config_path, seed);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (ckpt.fusion != cfg.fusion || ckpt.channels != cfg.channels)
        throw ConfigError("eval: checkpoint structure does not match the config");
    Model m = model_from_checkpoint(ckpt);
    Dataset ds = gen_synthetic(cfg.synthetic);
    if (ds.dim_v != m.dim_v || ds.dim_a != m.dim_a || ds.num_categories != m.num_classes)
        throw ConfigError("eval: dataset dimensions do not match the checkpoint");
    EvalResult r = evaluate_model(m, ds, ds.split_named(split), cfg);
    MetricsRow row{ckpt.epoch, split, r.top1, r.map, r.loss, 1.0, 1.0,
                   cfg.simam2 ? ckpt.last_r : 0.0};
    print_metrics_row(row);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text(fs::path(out_dir) / ("eval_" + split + ".csv"),
                   metrics_csv_header() + "\n" + metrics_csv_row(row) + "\n");
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, int64_t seed, const std::string& out_dir,
              std::vector<std::string> treatments, std::vector<std::string> fusions,
              std::vector<uint64_t> seeds, bool serial) {
    ExperimentConfig base = load_cfg(config_path, seed);
    if (treatments.empty()) treatments = sweep_treatments();
    if (fusions.empty()) fusions = {"summation", "film", "concatenation"};
    if (seeds.empty()) seeds = {1, 2, 3, 4, 5};

    // validate the whole grid before spending any time training
    for (const auto& t : treatments)
        for (const auto& f : fusions)
            validate_config(sweep_cell_config(base, t, f, seeds.front()));

    SweepResult result = run_sweep(base, treatments, fusions, seeds, !serial);

    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "results.csv", result.csv());
    write_text(fs::path(out_dir) / "results_summary.csv", result.summary_csv());
    write_text(fs::path(out_dir) / "config.json", config_to_json(base).dump(1) + "\n");
    std::cout << result.table_text() << "outputs in " << out_dir << "\n";
    for (const auto& c : result.cells)
        if (!c.ok)
            std::cerr << "cell failed: " << c.treatment << "/" << c.fusion_family << "/seed "
                      << c.seed << ": " << c.error << "\n";
    return 0;
}

int cmd_diag(const std::string& probe, const std::string& config_path, int64_t seed,
             const std::string& out_dir, std::vector<double> targets, int trials, int dim,
             std::vector<uint64_t> seeds) {
    ExperimentConfig cfg = load_cfg(config_path, seed);
    ProbeReport report;
    if (probe == "zeta-dispersion") {
        if (targets.empty()) targets = {0.1, 1.0, 4.0};
        report = zeta_dispersion_probe(cfg, targets, true);
    } else if (probe == "ratio-agreement") {
        report = ratio_agreement_probe(cfg);
    } else if (probe == "concat-energy") {
        report = concat_energy_probe(trials, dim, cfg.seed, cfg.lambda);
    } else if (probe == "film-order") {
        if (seeds.empty()) seeds = {1, 2, 3};
        report = film_order_probe(cfg, seeds);
    } else {
        throw ConfigError("unknown probe '" + probe +
                          "' (expected zeta-dispersion, ratio-agreement, concat-energy or "
                          "film-order)");
    }
    fs::create_directories(out_dir);
    const fs::path file = fs::path(out_dir) / report.file_name();
    write_text(file, report.to_json().dump(1) + "\n");
    std::cout << report.scalars.dump(1) << "\n";
    for (const auto& note : report.notes) std::cout << "note: " << note << "\n";
    std::cout << "report written to " << file.string() << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& config_path, int64_t seed, int batch, double tolerance) {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
        cfg = load_cfg(config_path, seed);
    } else {
        cfg.fusion = FusionKind::summation_learnable;
        cfg.simam2 = true;
        if (seed >= 0) {
            cfg.seed = static_cast<uint64_t>(seed);
            cfg.synthetic.seed = static_cast<uint64_t>(seed);
        }
        validate_config(cfg);
    }
    GradCheckReport report = end_to_end_gradcheck(cfg, batch, 1e-5, tolerance);
    for (const auto& [name, err] : report.per_param)
        std::cout << name << " rel_err=" << format_double(err) << "\n";
    std::cout << (report.ok ? "PASS" : "FAIL") << " max_rel_err="
              << format_double(report.max_rel_err) << " (" << report.worst_param
              << "), tolerance=" << format_double(tolerance) << "\n";
    return report.ok ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"energy-based attention and gradient modulation for bimodal fusion"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "mmfuse_out", ckpt_path, split = "test", probe;
    int64_t seed = -1;
    std::vector<double> targets;
    std::vector<uint64_t> seeds;
    int trials = 1000, dim = 32, batch = 4;
    double tolerance = 1e-3;
    bool serial = false;
    std::vector<std::string> treatments, fusions;

    auto* t = app.add_subcommand("train", "train one configuration");
    t->add_option("--config", config_path, "JSON experiment config");
    t->add_option("--seed", seed, "override config and data seeds");
    t->add_option("--out", out_dir, "output directory");

    auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
    e->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    e->add_option("--config", config_path, "JSON experiment config");
    e->add_option("--split", split, "train, val or test");
    e->add_option("--seed", seed, "override config and data seeds");
    e->add_option("--out", out_dir, "output directory");

    auto* s = app.add_subcommand("sweep", "treatment x fusion x seed grid");
    s->add_option("--config", config_path, "base JSON experiment config");
    s->add_option("--seed", seed, "override base seeds");
    s->add_option("--out", out_dir, "output directory");
    s->add_option("--treatments", treatments, "subset of treatments");
    s->add_option("--fusions", fusions, "subset of fusion families");
    s->add_option("--seeds", seeds, "seed list (default 1..5)");
    s->add_flag("--serial", serial, "run cells sequentially");

    auto* d = app.add_subcommand("diag", "run an analysis probe");
    d->add_option("probe", probe, "zeta-dispersion, ratio-agreement, concat-energy, film-order")
        ->required();
    d->add_option("--config", config_path, "JSON experiment config");
    d->add_option("--seed", seed, "override config and data seeds");
    d->add_option("--out", out_dir, "output directory");
    d->add_option("--targets", targets, "soft-HGR targets (zeta-dispersion)");
    d->add_option("--trials", trials, "trial count (concat-energy)");
    d->add_option("--dim", dim, "vector width (concat-energy)");
    d->add_option("--seeds", seeds, "seed list (film-order)");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the pipeline");
    gc->add_option("--config", config_path, "JSON experiment config");
    gc->add_option("--seed", seed, "override config and data seeds");
    gc->add_option("--batch", batch, "batch size");
    gc->add_option("--tolerance", tolerance, "relative error bound");

    try {
        app.parse(argc, argv);
        if (t->parsed()) return cmd_train(config_path, seed, out_dir);
        if (e->parsed()) return cmd_eval(ckpt_path, config_path, split, seed, out_dir);
        if (s->parsed())
            return cmd_sweep(config_path, seed, out_dir, treatments, fusions, seeds, serial);
        if (d->parsed())
            return cmd_diag(probe, config_path, seed, out_dir, targets, trials, dim, seeds);
        if (gc->parsed()) return cmd_gradcheck(config_path, seed, batch, tolerance);
        return 1;
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const TrainAbort& err) {
        std::cerr << "numerical abort: " << err.what() << "\n" << err.dump() << "\n";
        return 3;
    } catch (const NumericError& err) {
        std::cerr << "numerical abort: " << err.what() << "\n";
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}

}  // namespace mmfuse
