#include <algorithm>
#include <numeric>

#include "mmfuse/train.hpp"

// A reference training loop wired directly from tensor ops: encoders, the
// fusion arithmetic written inline, classifier, cross-entropy, SGD. No
// attention or modulation code runs here. Used to verify that the full
// pipeline with simam2=false and scheme=none is numerically identical.

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

Tensor plain_fused(const Model& m, const BoundParams& bp, const Tensor& hv, const Tensor& ha) {
    switch (m.fusion) {
        case FusionKind::summation_fixed: {
            Tensor z = Tensor::full(hv.shape(), 0.5);
            return add(mul(z, hv), mul(sub(1.0, z), ha));
        }
        case FusionKind::film: {
            const bool cond_a = m.film_conditioner == "a";
            const Tensor& cond = cond_a ? ha : hv;
            const Tensor& target = cond_a ? hv : ha;
            Tensor gamma = affine(cond, bp.at(m.film.scale_w), bp.at(m.film.scale_b));
            Tensor beta = affine(cond, bp.at(m.film.shift_w), bp.at(m.film.shift_b));
            return add(mul(gamma, target), beta);
        }
        case FusionKind::concatenation: {
            const int64_t c1 = hv.dim(1);
            const int64_t c2 = ha.dim(1);
            Tensor op1 = pad_last(hv, 0, c2);
            Tensor op2 = pad_last(ha, c1, 0);
            Tensor z = Tensor::full(op1.shape(), 0.5);
            return add(mul(z, op1), mul(sub(1.0, z), op2));
        }
        default:
            throw ConfigError("train_plain: supports summation-fixed, film and concatenation");
    }
}

Tensor plain_logits(const Model& m, const BoundParams& bp, const Tensor& xv, const Tensor& xa) {
    Tensor hv = encoder_forward(bp, m.enc_v1, m.enc_v2, xv);
    Tensor ha = encoder_forward(bp, m.enc_a1, m.enc_a2, xa);
    Tensor fused = plain_fused(m, bp, hv, ha);
    return affine(fused, bp.at(m.cls.w), bp.at(m.cls.b));
}

EvalResult plain_evaluate(const Model& m, const Dataset& ds, Dataset::Split split,
                          const ExperimentConfig& cfg) {
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
        Tensor logits = plain_logits(m, bp, xv, xa);
        Tensor probs = softmax(logits, 1);
        std::copy_n(probs.data(), b * k, scores.data() + at * k);
        std::copy_n(yb.data(), b, labels.data() + at);
        loss_sum += cross_entropy_mean(logits, yb).scalar_value() * static_cast<double>(b);
    }
    EvalResult r;
    r.top1 = top1_accuracy(scores, split.size, k, labels);
    r.map = mean_average_precision(scores, split.size, k, labels);
    r.loss = loss_sum / static_cast<double>(split.size);
    return r;
}

}  // namespace

TrainOutput train_plain(const ExperimentConfig& cfg) {
    validate_config(cfg);
    if (cfg.simam2 || cfg.scheme != ModScheme::none)
        throw ConfigError("train_plain: requires simam2=false and scheme=none");

    Dataset ds = gen_synthetic(cfg.synthetic);
    TrainOutput out;
    Model m = build_model(cfg, ds.dim_v, ds.dim_a, ds.num_categories);
    CounterRng shuffle_rng(cfg.seed, rng_stream::shuffle);

    std::vector<int64_t> order(static_cast<size_t>(ds.train_size));
    std::iota(order.begin(), order.end(), 0);
    double best_val = -1.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int64_t i = ds.train_size - 1; i > 0; --i) {
            const int64_t j =
                static_cast<int64_t>(shuffle_rng.next_below(static_cast<uint64_t>(i + 1)));
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }
        for (int64_t at = 0; at < ds.train_size; at += cfg.batch_size) {
            const int64_t b = std::min<int64_t>(cfg.batch_size, ds.train_size - at);
            std::span<const int64_t> rows(order.data() + at, static_cast<size_t>(b));
            Tensor xv = make_batch(ds.x_v, ds.dim_v, rows);
            Tensor xa = make_batch(ds.x_a, ds.dim_a, rows);
            std::vector<int> yb = label_batch(ds.y, rows);

            Graph g;
            BoundParams bp = bind_params(m, &g);
            g.backward(cross_entropy_mean(plain_logits(m, bp, xv, xa), yb));

            std::vector<std::vector<double>> grads(m.params.size());
            for (size_t i = 0; i < m.params.size(); ++i) {
                auto gs = g.grad(bp.at(static_cast<int>(i)));
                grads[i].assign(gs.begin(), gs.end());
            }
            sgd_update(m.params, grads, cfg.learning_rate, cfg.momentum);
        }

        EvalResult tr = plain_evaluate(m, ds, ds.train(), cfg);
        EvalResult va = plain_evaluate(m, ds, ds.val(), cfg);
        out.metrics.push_back({epoch, "train", tr.top1, tr.map, tr.loss, 1.0, 1.0, 0.0});
        out.metrics.push_back({epoch, "val", va.top1, va.map, va.loss, 1.0, 1.0, 0.0});
        if (va.top1 > best_val) {
            best_val = va.top1;
            out.best = snapshot_model(m, epoch);
            out.best_epoch = epoch;
        }
    }

    Model best_model = model_from_checkpoint(out.best);
    EvalResult te = plain_evaluate(best_model, ds, ds.test(), cfg);
    out.test_row = {out.best_epoch, "test", te.top1, te.map, te.loss, 1.0, 1.0, 0.0};
    out.metrics.push_back(out.test_row);
    out.model = std::move(m);
    return out;
}

}  // namespace mmfuse
