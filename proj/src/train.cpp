#include "mmfuse/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mmfuse/diagnostics.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse {

namespace {

Tensor make_batch(const std::vector<double>& flat, int64_t dim,
                  std::span<const int64_t> rows) {
    std::vector<double> out(rows.size() * static_cast<size_t>(dim));
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy_n(flat.data() + rows[i] * dim, dim, out.data() + static_cast<int64_t>(i) * dim);
    return Tensor(std::move(out), {static_cast<int64_t>(rows.size()), dim});
}

std::vector<int> label_batch(const std::vector<int>& labels, std::span<const int64_t> rows) {
    std::vector<int> out(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) out[i] = labels[static_cast<size_t>(rows[i])];
    return out;
}

}  // namespace

PipelineOut pipeline_forward(Model& m, const BoundParams& bp, const Tensor& xv,
                             const Tensor& xa, const ExperimentConfig& cfg, bool training) {
    PipelineOut out;
    out.feat_v = encoder_forward(bp, m.enc_v1, m.enc_v2, xv);
    out.feat_a = encoder_forward(bp, m.enc_a1, m.enc_a2, xa);

    switch (m.fusion) {
        case FusionKind::summation_fixed:
            out.fusion = fuse_summation(out.feat_v, out.feat_a, false, nullptr);
            break;
        case FusionKind::summation_learnable: {
            ZetaGate gate = gate_tensors(m, bp);
            out.fusion = fuse_summation(out.feat_v, out.feat_a, true, &gate);
            break;
        }
        case FusionKind::film:
        case FusionKind::film_zeta: {
            FilmTensors film = film_tensors(m, bp);
            const bool cond_a = m.film_conditioner == "a";
            const Tensor& cond = cond_a ? out.feat_a : out.feat_v;
            const Tensor& target = cond_a ? out.feat_v : out.feat_a;
            if (m.fusion == FusionKind::film_zeta) {
                ZetaGate gate = gate_tensors(m, bp);
                out.fusion = fuse_film(cond, target, film, true, &gate);
            } else {
                out.fusion = fuse_film(cond, target, film, false, nullptr);
            }
            break;
        }
        case FusionKind::concatenation:
            out.fusion = fuse_concat(out.feat_v, out.feat_a);
            break;
    }

    out.fused = cfg.simam2
                    ? apply_simam2(out.fusion, m.zeta_state, cfg.lambda, cfg.s, training)
                    : out.fusion.fused;
    out.r_used = m.zeta_state.last_r;
    out.logits = affine(out.fused, bp.at(m.cls.w), bp.at(m.cls.b));
    return out;
}

std::pair<Tensor, Tensor> decoupled_logits(const Model& m, const FusionResult& fr,
                                           const BoundParams& bp) {
    if (m.fusion == FusionKind::film || m.fusion == FusionKind::film_zeta)
        throw ShapeError("decoupled_logits: undefined for film fusion");
    Tensor w = bp.at(m.cls.w).detached();
    Tensor half_b = mul(bp.at(m.cls.b).detached(), 0.5);
    Tensor zeta = fr.zeta.detached();
    const int64_t rows = fr.operand1.dim(0);
    Tensor lv = add(matmul(mul(zeta, fr.operand1.detached()), w), expand(half_b, 0, rows));
    Tensor la = add(matmul(mul(sub(1.0, zeta), fr.operand2.detached()), w),
                    expand(half_b, 0, rows));
    return {lv, la};
}

EvalResult evaluate_model(Model& m, const Dataset& ds, Dataset::Split split,
                          const ExperimentConfig& cfg) {
    if (split.size <= 0) throw ShapeError("evaluate_model: empty split");
    BoundParams bp = bind_params(m, nullptr);
    const int64_t k = m.num_classes;
    std::vector<double> scores(static_cast<size_t>(split.size * k));
    std::vector<int> labels(static_cast<size_t>(split.size));
    double loss_sum = 0.0;

    for (int64_t at = 0; at < split.size; at += cfg.batch_size) {
        const int64_t b = std::min<int64_t>(cfg.batch_size, split.size - at);
        std::vector<int64_t> rows(static_cast<size_t>(b));
        std::iota(rows.begin(), rows.end(), split.offset + at);
        Tensor xv = make_batch(ds.x_v, ds.dim_v, rows);
        Tensor xa = make_batch(ds.x_a, ds.dim_a, rows);
        std::vector<int> yb = label_batch(ds.y, rows);

        PipelineOut out = pipeline_forward(m, bp, xv, xa, cfg, false);
        Tensor probs = softmax(out.logits, 1);
        std::copy_n(probs.data(), b * k, scores.data() + at * k);
        std::copy_n(yb.data(), b, labels.data() + at);
        loss_sum += cross_entropy_mean(out.logits, yb).scalar_value() * static_cast<double>(b);
    }
    EvalResult r;
    r.top1 = top1_accuracy(scores, split.size, k, labels);
    r.map = mean_average_precision(scores, split.size, k, labels);
    r.loss = loss_sum / static_cast<double>(split.size);
    return r;
}

namespace {

std::string nan_dump(int epoch, int64_t step, std::span<const int64_t> rows, const Tensor& xv,
                     const Tensor& xa, const char* what) {
    auto minmax = [](const Tensor& t) {
        double lo = t.value_at(0), hi = t.value_at(0);
        for (double v : t.values()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return std::pair<double, double>{lo, hi};
    };
    auto [vlo, vhi] = minmax(xv);
    auto [alo, ahi] = minmax(xa);
    nlohmann::json j{{"error", what},
                     {"epoch", epoch},
                     {"step", step},
                     {"batch_rows", std::vector<int64_t>(rows.begin(), rows.end())},
                     {"x_v_min", vlo},
                     {"x_v_max", vhi},
                     {"x_a_min", alo},
                     {"x_a_max", ahi}};
    return j.dump();
}

bool fusion_decouples(FusionKind k) {
    return k == FusionKind::summation_fixed || k == FusionKind::summation_learnable ||
           k == FusionKind::concatenation;
}

}  // namespace

TrainOutput train(const ExperimentConfig& cfg) { return train_on(cfg, gen_synthetic(cfg.synthetic)); }

TrainOutput train_on(const ExperimentConfig& cfg, const Dataset& ds) {
    validate_config(cfg);
    TrainOutput out;
    Model m = build_model(cfg, ds.dim_v, ds.dim_a, ds.num_categories);

    CounterRng shuffle_rng(cfg.seed, rng_stream::shuffle);
    CounterRng noise_rng(cfg.seed, rng_stream::noise);

    const int mod_end = cfg.mod_epoch_end < 0 ? cfg.epochs - 1 : cfg.mod_epoch_end;
    const bool aux_hgr = cfg.hgr_weight > 0.0;

    std::vector<int64_t> order(static_cast<size_t>(ds.train_size));
    std::iota(order.begin(), order.end(), 0);

    double best_val = -1.0;
    int64_t step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates over the training rows
        for (int64_t i = ds.train_size - 1; i > 0; --i) {
            const int64_t j =
                static_cast<int64_t>(shuffle_rng.next_below(static_cast<uint64_t>(i + 1)));
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }

        double rho_sum = 0.0, k_sum = 0.0;
        int64_t mod_steps = 0;

        for (int64_t at = 0; at < ds.train_size; at += cfg.batch_size, ++step) {
            const int64_t b = std::min<int64_t>(cfg.batch_size, ds.train_size - at);
            std::span<const int64_t> rows(order.data() + at, static_cast<size_t>(b));
            Tensor xv = make_batch(ds.x_v, ds.dim_v, rows);
            Tensor xa = make_batch(ds.x_a, ds.dim_a, rows);
            std::vector<int> yb = label_batch(ds.y, rows);

            try {
                Graph g;
                BoundParams bp = bind_params(m, &g);
                PipelineOut fwd = pipeline_forward(m, bp, xv, xa, cfg, true);
                Tensor loss = cross_entropy_mean(fwd.logits, yb);
                if (aux_hgr && b >= 2) {
                    Tensor pen = abs_val(sub(soft_hgr(fwd.feat_v, fwd.feat_a), cfg.hgr_target));
                    loss = add(loss, mul(pen, cfg.hgr_weight));
                }
                g.backward(loss);

                std::vector<std::vector<double>> grads(m.params.size());
                for (size_t i = 0; i < m.params.size(); ++i) {
                    auto gs = g.grad(bp.at(static_cast<int>(i)));
                    grads[i].assign(gs.begin(), gs.end());
                }

                // gradient modulation between backward and the optimizer step
                const bool in_window =
                    cfg.scheme != ModScheme::none && epoch >= cfg.mod_epoch_start &&
                    epoch <= mod_end;
                const bool free_ok = fwd.fusion.zeta_learned;
                const bool dec_ok = fusion_decouples(m.fusion);
                if (in_window || cfg.log_both_ratios) {
                    double rho_free_v = 0.0, rho_free_a = 0.0;
                    double rho_dec_v = 0.0, rho_dec_a = 0.0;
                    if (free_ok)
                        std::tie(rho_free_v, rho_free_a) = ratio_free(fwd.fusion.zeta.detached());
                    if (dec_ok) {
                        auto [lv, la] = decoupled_logits(m, fwd.fusion, bp);
                        std::tie(rho_dec_v, rho_dec_a) = ratio_decoupled(lv, la, yb);
                    }
                    if (in_window) {
                        const bool use_free = cfg.scheme == ModScheme::decoupling_free;
                        if (use_free && !free_ok)
                            throw ShapeError("decoupling-free scheme without learnable zeta");
                        if (!use_free && !dec_ok)
                            throw ShapeError("decoupled scheme unsupported for this fusion");
                        const double rv = use_free ? rho_free_v : rho_dec_v;
                        const double ra = use_free ? rho_free_a : rho_dec_a;
                        ModulationRecord rec;
                        rec.step = step;
                        rec.scheme = cfg.scheme;
                        rec.rho_v = rv;
                        rec.rho_a = ra;
                        rec.k_v = coefficient(rv, cfg.alpha);
                        rec.k_a = coefficient(ra, cfg.alpha);

                        GradientGroup gv, ga;
                        for (size_t i = 0; i < m.params.size(); ++i) {
                            switch (classify_param(m.params.at(static_cast<int>(i)).name)) {
                                case ParamOwner::encoder_v: gv.tensors.emplace_back(grads[i]); break;
                                case ParamOwner::encoder_a: ga.tensors.emplace_back(grads[i]); break;
                                case ParamOwner::shared: break;
                            }
                        }
                        NoiseStats ns = modulate(gv, ga, rec.k_v, rec.k_a, true, noise_rng);
                        rec.noise_std_v = ns.std_v;
                        rec.noise_std_a = ns.std_a;
                        out.mod_records.push_back(rec);
                        rho_sum += rec.rho_v;
                        k_sum += rec.k_v;
                        ++mod_steps;
                    }
                    if (cfg.log_both_ratios && free_ok && dec_ok) {
                        out.rho_free_series.push_back(rho_free_v);
                        out.rho_dec_series.push_back(rho_dec_v);
                        const ModScheme other = cfg.scheme == ModScheme::decoupled
                                                    ? ModScheme::decoupling_free
                                                    : ModScheme::decoupled;
                        const double rv =
                            other == ModScheme::decoupling_free ? rho_free_v : rho_dec_v;
                        const double ra =
                            other == ModScheme::decoupling_free ? rho_free_a : rho_dec_a;
                        ModulationRecord rec;
                        rec.step = step;
                        rec.scheme = other;
                        rec.rho_v = rv;
                        rec.rho_a = ra;
                        rec.k_v = coefficient(rv, cfg.alpha);
                        rec.k_a = coefficient(ra, cfg.alpha);
                        out.mod_records.push_back(rec);  // recorded, never applied
                    }
                }

                sgd_update(m.params, grads, cfg.learning_rate, cfg.momentum);
            } catch (const NumericError& e) {
                throw TrainAbort(e.what(), nan_dump(epoch, step, rows, xv, xa, e.what()));
            }
        }

        EvalResult tr = evaluate_model(m, ds, ds.train(), cfg);
        EvalResult va = evaluate_model(m, ds, ds.val(), cfg);
        const double rho_col = mod_steps ? rho_sum / static_cast<double>(mod_steps) : 1.0;
        const double k_col = mod_steps ? k_sum / static_cast<double>(mod_steps) : 1.0;
        const double r_col = cfg.simam2 ? m.zeta_state.last_r : 0.0;
        out.metrics.push_back({epoch, "train", tr.top1, tr.map, tr.loss, rho_col, k_col, r_col});
        out.metrics.push_back({epoch, "val", va.top1, va.map, va.loss, rho_col, k_col, r_col});

        if (va.top1 > best_val) {
            best_val = va.top1;
            out.best = snapshot_model(m, epoch);
            out.best_epoch = epoch;
        }
    }

    Model best_model = model_from_checkpoint(out.best);
    EvalResult te = evaluate_model(best_model, ds, ds.test(), cfg);
    out.test_row = {out.best_epoch, "test", te.top1, te.map, te.loss, 1.0, 1.0,
                    cfg.simam2 ? out.best.last_r : 0.0};
    out.metrics.push_back(out.test_row);
    out.model = std::move(m);
    return out;
}

std::string modulation_csv_header() { return "step,scheme,rho_v,rho_a,k_v,k_a"; }

std::string modulation_csv(const std::vector<ModulationRecord>& records) {
    std::string s = modulation_csv_header() + "\n";
    for (const auto& r : records) {
        s += std::to_string(r.step);
        s += "," + mod_scheme_name(r.scheme);
        s += "," + format_double(r.rho_v);
        s += "," + format_double(r.rho_a);
        s += "," + format_double(r.k_v);
        s += "," + format_double(r.k_a);
        s += "\n";
    }
    return s;
}

// ---- gradient check -----------------------------------------------------------

GradCheckReport end_to_end_gradcheck(const ExperimentConfig& cfg, int batch, double step,
                                     double tolerance) {
    validate_config(cfg);
    SyntheticSpec tiny = cfg.synthetic;
    tiny.train_size = batch;
    tiny.val_size = 1;
    tiny.test_size = 1;
    Dataset ds = gen_synthetic(tiny);
    Model m = build_model(cfg, ds.dim_v, ds.dim_a, ds.num_categories);

    std::vector<int64_t> rows(static_cast<size_t>(batch));
    std::iota(rows.begin(), rows.end(), 0);
    Tensor xv = make_batch(ds.x_v, ds.dim_v, rows);
    Tensor xa = make_batch(ds.x_a, ds.dim_a, rows);
    std::vector<int> yb = label_batch(ds.y, rows);

    // evaluation mode keeps the proxy state frozen so the loss is a pure
    // function of the parameters
    auto loss_value = [&]() {
        BoundParams bp = bind_params(m, nullptr);
        PipelineOut fwd = pipeline_forward(m, bp, xv, xa, cfg, false);
        return cross_entropy_mean(fwd.logits, yb).scalar_value();
    };

    Graph g;
    BoundParams bp = bind_params(m, &g);
    PipelineOut fwd = pipeline_forward(m, bp, xv, xa, cfg, false);
    g.backward(cross_entropy_mean(fwd.logits, yb));

    GradCheckReport report;
    report.ok = true;
    for (size_t i = 0; i < m.params.size(); ++i) {
        Param& p = m.params.at(static_cast<int>(i));
        auto analytic = g.grad(bp.at(static_cast<int>(i)));
        double diff2 = 0.0, na2 = 0.0, nf2 = 0.0;
        for (size_t j = 0; j < p.value.size(); ++j) {
            const double keep = p.value[j];
            p.value[j] = keep + step;
            const double up = loss_value();
            p.value[j] = keep - step;
            const double down = loss_value();
            p.value[j] = keep;
            const double fd = (up - down) / (2.0 * step);
            const double d = analytic[j] - fd;
            diff2 += d * d;
            na2 += analytic[j] * analytic[j];
            nf2 += fd * fd;
        }
        const double denom = std::sqrt(na2) + std::sqrt(nf2);
        const double rel = denom < 1e-12 ? 0.0 : std::sqrt(diff2) / denom;
        report.per_param.emplace_back(p.name, rel);
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_param = p.name;
        }
        if (rel >= tolerance) report.ok = false;
    }
    return report;
}

// ---- sweep --------------------------------------------------------------------

const std::vector<std::string>& sweep_treatments() {
    static const std::vector<std::string> t{"baseline", "simam2", "ogm_ge", "ogm_ge_simam2",
                                            "free_simam2"};
    return t;
}

ExperimentConfig sweep_cell_config(const ExperimentConfig& base, const std::string& treatment,
                                   const std::string& fusion_family, uint64_t seed) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    cfg.synthetic.seed = seed;
    cfg.log_both_ratios = false;

    const bool free_row = treatment == "free_simam2";
    if (fusion_family == "summation") {
        cfg.fusion = free_row ? FusionKind::summation_learnable : FusionKind::summation_fixed;
    } else if (fusion_family == "film") {
        cfg.fusion = free_row ? FusionKind::film_zeta : FusionKind::film;
    } else if (fusion_family == "concatenation") {
        cfg.fusion = FusionKind::concatenation;
    } else {
        throw ConfigError("unknown fusion family '" + fusion_family +
                          "' (expected summation, film or concatenation)");
    }

    if (treatment == "baseline") {
        cfg.simam2 = false;
        cfg.scheme = ModScheme::none;
    } else if (treatment == "simam2") {
        cfg.simam2 = true;
        cfg.scheme = ModScheme::none;
    } else if (treatment == "ogm_ge") {
        cfg.simam2 = false;
        cfg.scheme = ModScheme::decoupled;
    } else if (treatment == "ogm_ge_simam2") {
        cfg.simam2 = true;
        cfg.scheme = ModScheme::decoupled;
    } else if (treatment == "free_simam2") {
        cfg.simam2 = true;
        // concatenation keeps the decoupled ratios: padded halves have no
        // learnable zeta to read the free ratio from
        cfg.scheme = fusion_family == "concatenation" ? ModScheme::decoupled
                                                      : ModScheme::decoupling_free;
        if (cfg.scheme == ModScheme::decoupling_free && fusion_family == "summation")
            cfg.log_both_ratios = true;
    } else {
        throw ConfigError("unknown treatment '" + treatment + "'");
    }
    return cfg;
}

SweepResult run_sweep(const ExperimentConfig& base, const std::vector<std::string>& treatments,
                      const std::vector<std::string>& fusion_families,
                      const std::vector<uint64_t>& seeds, bool parallel_cells) {
    std::vector<SweepCell> cells;
    for (const auto& t : treatments)
        for (const auto& f : fusion_families)
            for (uint64_t s : seeds) {
                SweepCell c;
                c.treatment = t;
                c.fusion_family = f;
                c.seed = s;
                cells.push_back(std::move(c));
            }

    const int64_t n = static_cast<int64_t>(cells.size());
#pragma omp parallel for schedule(dynamic) if (parallel_cells)
    for (int64_t i = 0; i < n; ++i) {
        SweepCell& c = cells[static_cast<size_t>(i)];
        try {
            ExperimentConfig cfg = sweep_cell_config(base, c.treatment, c.fusion_family, c.seed);
            TrainOutput r = train(cfg);
            c.test_top1 = r.test_row.top1_accuracy;
            c.test_map = r.test_row.map;
            c.best_epoch = r.best_epoch;
            double best_val = 0.0;
            for (const auto& row : r.metrics)
                if (row.split == "val") best_val = std::max(best_val, row.top1_accuracy);
            c.val_top1 = best_val;
            if (r.rho_free_series.size() >= 2) {
                c.ratio_pearson = pearson_correlation(r.rho_free_series, r.rho_dec_series);
                c.ratio_spearman = spearman_correlation(r.rho_free_series, r.rho_dec_series);
            }
            c.ok = true;
        } catch (const std::exception& e) {
            c.ok = false;
            c.error = e.what();
        }
    }
    SweepResult out;
    out.cells = std::move(cells);
    return out;
}

std::string SweepResult::csv() const {
    std::string s =
        "treatment,fusion,seed,ok,test_top1,test_mAP,val_top1,best_epoch,ratio_pearson,"
        "ratio_spearman,error\n";
    for (const auto& c : cells) {
        s += c.treatment + "," + c.fusion_family + "," + std::to_string(c.seed) + ",";
        s += (c.ok ? "1" : "0");
        s += "," + format_double(c.test_top1) + "," + format_double(c.test_map);
        s += "," + format_double(c.val_top1) + "," + std::to_string(c.best_epoch);
        s += "," + format_double(c.ratio_pearson) + "," + format_double(c.ratio_spearman);
        s += ",\"" + c.error + "\"\n";
    }
    return s;
}

namespace {

struct Agg {
    int n = 0;
    double sum = 0.0, sum2 = 0.0, map_sum = 0.0;
    void add(double top1, double map) {
        ++n;
        sum += top1;
        sum2 += top1 * top1;
        map_sum += map;
    }
    double mean() const { return n ? sum / n : 0.0; }
    double stddev() const {
        if (n < 2) return 0.0;
        const double m = mean();
        return std::sqrt(std::max(0.0, sum2 / n - m * m));
    }
    double map_mean() const { return n ? map_sum / n : 0.0; }
};

}  // namespace

std::string SweepResult::summary_csv() const {
    std::string s = "treatment,fusion,n,mean_top1,std_top1,mean_mAP\n";
    for (const auto& t : sweep_treatments())
        for (const std::string f : {"summation", "film", "concatenation"}) {
            Agg a;
            for (const auto& c : cells)
                if (c.ok && c.treatment == t && c.fusion_family == f)
                    a.add(c.test_top1, c.test_map);
            if (!a.n) continue;
            s += t + "," + f + "," + std::to_string(a.n) + "," + format_double(a.mean()) + "," +
                 format_double(a.stddev()) + "," + format_double(a.map_mean()) + "\n";
        }
    return s;
}

std::string SweepResult::table_text() const {
    std::ostringstream os;
    os << "treatment          fusion          n   top1(mean±std)    mAP(mean)\n";
    for (const auto& t : sweep_treatments())
        for (const std::string f : {"summation", "film", "concatenation"}) {
            Agg a;
            int failed = 0;
            for (const auto& c : cells) {
                if (c.treatment != t || c.fusion_family != f) continue;
                if (c.ok)
                    a.add(c.test_top1, c.test_map);
                else
                    ++failed;
            }
            if (!a.n && !failed) continue;
            char line[160];
            snprintf(line, sizeof(line), "%-18s %-14s %3d   %.4f ± %.4f   %.4f", t.c_str(),
                     f.c_str(), a.n, a.mean(), a.stddev(), a.map_mean());
            os << line;
            if (failed) os << "   (" << failed << " failed)";
            os << "\n";
        }
    return os.str();
}

}  // namespace mmfuse
