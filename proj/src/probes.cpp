#include "mmfuse/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmfuse/rng.hpp"

namespace mmfuse {

namespace {

Tensor split_tensor(const std::vector<double>& flat, int64_t dim, Dataset::Split sp) {
    std::vector<double> out(static_cast<size_t>(sp.size * dim));
    std::copy_n(flat.data() + sp.offset * dim, sp.size * dim, out.data());
    return Tensor(std::move(out), {sp.size, dim});
}

struct ZetaSnapshot {
    double dispersion = 0.0;  // sum over channels of batch variance of zeta
    double hgr = 0.0;         // soft-HGR of the encoder features
};

// forward the whole training split once in eval mode
ZetaSnapshot snapshot_zeta(Model& m, const Dataset& ds, const ExperimentConfig& cfg) {
    BoundParams bp = bind_params(m, nullptr);
    Tensor xv = split_tensor(ds.x_v, ds.dim_v, ds.train());
    Tensor xa = split_tensor(ds.x_a, ds.dim_a, ds.train());
    PipelineOut fwd = pipeline_forward(m, bp, xv, xa, cfg, false);

    ZetaSnapshot snap;
    Tensor var = reduce(ReduceOp::var, fwd.fusion.zeta.detached(), {0});
    for (double v : var.values()) snap.dispersion += v;
    snap.hgr = soft_hgr(fwd.feat_v.detached(), fwd.feat_a.detached()).scalar_value();
    return snap;
}

}  // namespace

ProbeReport zeta_dispersion_probe(const ExperimentConfig& base, std::vector<double> targets,
                                  bool include_copy_mode) {
    ProbeReport report;
    report.name = "zeta_dispersion";
    report.config_hash = config_hash_hex(base);
    report.seed = base.seed;

    ExperimentConfig cfg = base;
    cfg.fusion = FusionKind::summation_learnable;  // the study needs learnable zeta
    cfg.scheme = ModScheme::none;
    if (cfg.hgr_weight <= 0.0) cfg.hgr_weight = 1.0;

    struct Row {
        std::string label;
        double target = 0.0;
        double achieved = 0.0;
        double dispersion = 0.0;
        bool converged = true;
    };
    std::vector<Row> rows;

    for (double target : targets) {
        ExperimentConfig c = cfg;
        c.hgr_target = target;
        validate_config(c);
        TrainOutput r = train(c);
        Dataset ds = gen_synthetic(c.synthetic);
        ZetaSnapshot snap = snapshot_zeta(r.model, ds, c);
        Row row;
        row.label = "target_" + format_double(target);
        row.target = target;
        row.achieved = snap.hgr;
        row.dispersion = snap.dispersion;
        row.converged = std::abs(snap.hgr - target) <= 0.5 * std::max(1.0, std::abs(target));
        if (!row.converged)
            report.notes.push_back("auxiliary objective did not reach target " +
                                   format_double(target) + " (achieved " +
                                   format_double(snap.hgr) + ")");
        rows.push_back(row);
    }

    if (include_copy_mode) {
        ExperimentConfig c = cfg;
        c.hgr_weight = 0.0;  // the copy construction itself forces full correlation
        validate_config(c);
        Dataset ds = copy_modality_dataset(c.synthetic);
        TrainOutput r = train_on(c, ds);
        ZetaSnapshot snap = snapshot_zeta(r.model, ds, c);
        Row row;
        row.label = "copy_modality";
        row.target = std::numeric_limits<double>::quiet_NaN();
        row.achieved = snap.hgr;
        row.dispersion = snap.dispersion;
        rows.push_back(row);
    }

    std::vector<size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return rows[a].dispersion < rows[b].dispersion; });
    for (size_t rank = 0; rank < order.size(); ++rank) {
        const Row& row = rows[order[rank]];
        report.rows.push_back(nlohmann::json{{"label", row.label},
                                             {"target", row.target},
                                             {"achieved_hgr", row.achieved},
                                             {"dispersion", row.dispersion},
                                             {"converged", row.converged},
                                             {"dispersion_rank", rank}});
    }
    if (rows.size() == 1) report.notes.push_back("single target: sweep degenerates to one row");
    return report;
}

ProbeReport ratio_agreement_probe(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    cfg.log_both_ratios = true;
    if (!fusion_has_gate(cfg.fusion)) cfg.fusion = FusionKind::summation_learnable;
    if (cfg.scheme == ModScheme::none) cfg.scheme = ModScheme::decoupling_free;
    validate_config(cfg);

    TrainOutput r = train(cfg);
    if (r.rho_free_series.size() < 10)
        throw DegenerateInputError("ratio_agreement: fewer than 10 recorded steps");

    ProbeReport report;
    report.name = "ratio_agreement";
    report.config_hash = config_hash_hex(cfg);
    report.seed = cfg.seed;
    report.scalars["steps"] = r.rho_free_series.size();
    report.scalars["pearson"] = pearson_correlation(r.rho_free_series, r.rho_dec_series);
    report.scalars["spearman"] = spearman_correlation(r.rho_free_series, r.rho_dec_series);
    report.scalars["test_top1"] = r.test_row.top1_accuracy;
    for (size_t i = 0; i < r.rho_free_series.size(); ++i)
        report.rows.push_back(nlohmann::json{{"step", i},
                                             {"rho_v_free", r.rho_free_series[i]},
                                             {"rho_v_decoupled", r.rho_dec_series[i]}});
    return report;
}

ProbeReport concat_energy_probe(int trials, int dim, uint64_t seed, double lambda) {
    if (trials < 1 || dim < 2) throw ShapeError("concat_energy_probe: bad arguments");
    CounterRng rng(seed, rng_stream::probe);
    int skipped = 0;
    int concat_smaller = 0;
    double sum_concat = 0.0, sum_sum = 0.0;
    int counted = 0;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> x1 = rng.gaussian_vec(static_cast<size_t>(dim));
        std::vector<double> x2 = rng.gaussian_vec(static_cast<size_t>(dim));
        auto trial = concat_energy_trial(x1, x2, lambda);
        if (!trial) {
            ++skipped;
            continue;
        }
        ++counted;
        sum_concat += trial->ratio_concat;
        sum_sum += trial->ratio_summation;
        if (trial->ratio_concat < trial->ratio_summation) ++concat_smaller;
    }
    ProbeReport report;
    report.name = "concat_energy";
    report.config_hash = "na";
    report.seed = seed;
    report.scalars["trials"] = trials;
    report.scalars["skipped_degenerate"] = skipped;
    report.scalars["mean_ratio_concat"] = counted ? sum_concat / counted : 0.0;
    report.scalars["mean_ratio_summation"] = counted ? sum_sum / counted : 0.0;
    report.scalars["fraction_concat_smaller"] =
        counted ? static_cast<double>(concat_smaller) / counted : 0.0;
    report.scalars["dim"] = dim;
    report.scalars["lambda"] = lambda;
    return report;
}

ProbeReport film_order_probe(const ExperimentConfig& base, std::vector<uint64_t> seeds) {
    ProbeReport report;
    report.name = "film_order";
    report.config_hash = config_hash_hex(base);
    report.seed = seeds.empty() ? base.seed : seeds.front();
    if (seeds.empty()) seeds.push_back(base.seed);
    if (seeds.size() == 1)
        report.notes.push_back("single seed: gap estimates carry unquantified variance");

    struct Cell {
        double mean_top1 = 0.0;
    };
    auto run_mean = [&](FusionKind kind, const std::string& conditioner) {
        double acc = 0.0;
        for (uint64_t s : seeds) {
            ExperimentConfig c = base;
            c.fusion = kind;
            c.scheme = ModScheme::none;
            c.film_conditioner = conditioner;
            c.seed = s;
            c.synthetic.seed = s;
            validate_config(c);
            acc += train(c).test_row.top1_accuracy;
        }
        return acc / static_cast<double>(seeds.size());
    };

    const double film_a = run_mean(FusionKind::film, "a");
    const double film_v = run_mean(FusionKind::film, "v");
    const double zeta_a = run_mean(FusionKind::film_zeta, "a");
    const double zeta_v = run_mean(FusionKind::film_zeta, "v");

    report.scalars["film_cond_a_top1"] = film_a;
    report.scalars["film_cond_v_top1"] = film_v;
    report.scalars["film_zeta_cond_a_top1"] = zeta_a;
    report.scalars["film_zeta_cond_v_top1"] = zeta_v;
    report.scalars["gap_film"] = std::abs(film_a - film_v);
    report.scalars["gap_film_zeta"] = std::abs(zeta_a - zeta_v);
    report.scalars["seeds"] = seeds.size();
    return report;
}

}  // namespace mmfuse
