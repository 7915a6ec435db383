#include "mmfuse/model.hpp"

#include <cmath>

namespace mmfuse {

int ParamSet::add(std::string name, Shape shape, std::vector<double> value) {
    if (shape_numel(shape) != static_cast<int64_t>(value.size()))
        throw ShapeError("param '" + name + "': shape does not match value length");
    Param p;
    p.name = std::move(name);
    p.shape = std::move(shape);
    p.velocity.assign(value.size(), 0.0);
    p.value = std::move(value);
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
}

Param* ParamSet::find(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

namespace {

AffineIds add_affine(ParamSet& ps, const std::string& prefix, int64_t in, int64_t out,
                     CounterRng& rng, double bias_init = 0.0) {
    const double std = 1.0 / std::sqrt(static_cast<double>(in));
    AffineIds ids;
    ids.w = ps.add(prefix + ".w", {in, out}, rng.gaussian_vec(static_cast<size_t>(in * out), 0.0, std));
    ids.b = ps.add(prefix + ".b", {out},
                   std::vector<double>(static_cast<size_t>(out), bias_init));
    return ids;
}

}  // namespace

Model build_model(const ExperimentConfig& cfg, int dim_v, int dim_a, int num_classes) {
    Model m;
    m.fusion = cfg.fusion;
    m.channels = cfg.channels;
    m.num_classes = num_classes;
    m.dim_v = dim_v;
    m.dim_a = dim_a;
    m.film_conditioner = cfg.film_conditioner;

    CounterRng rng(cfg.seed, rng_stream::init);
    const int64_t c = cfg.channels;
    m.enc_v1 = add_affine(m.params, "enc_v.l1", dim_v, c, rng);
    m.enc_v2 = add_affine(m.params, "enc_v.l2", c, c, rng);
    m.enc_a1 = add_affine(m.params, "enc_a.l1", dim_a, c, rng);
    m.enc_a2 = add_affine(m.params, "enc_a.l2", c, c, rng);

    if (fusion_has_gate(cfg.fusion)) {
        m.has_gate = true;
        const double s1 = 1.0 / std::sqrt(static_cast<double>(2 * c));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(c));
        m.gate.w1 = m.params.add("gate.w1", {2 * c, c},
                                 rng.gaussian_vec(static_cast<size_t>(2 * c * c), 0.0, s1));
        m.gate.b1 = m.params.add("gate.b1", {c}, std::vector<double>(static_cast<size_t>(c), 0.0));
        m.gate.w2 = m.params.add("gate.w2", {c, c},
                                 rng.gaussian_vec(static_cast<size_t>(c * c), 0.0, s2));
        m.gate.b2 = m.params.add("gate.b2", {c}, std::vector<double>(static_cast<size_t>(c), 0.0));
    }
    if (cfg.fusion == FusionKind::film || cfg.fusion == FusionKind::film_zeta) {
        m.has_film = true;
        const double s = 1.0 / std::sqrt(static_cast<double>(c));
        m.film.scale_w = m.params.add("film.scale_w", {c, c},
                                      rng.gaussian_vec(static_cast<size_t>(c * c), 0.0, s));
        // scale bias starts at 1 so modulation begins near identity
        m.film.scale_b =
            m.params.add("film.scale_b", {c}, std::vector<double>(static_cast<size_t>(c), 1.0));
        m.film.shift_w = m.params.add("film.shift_w", {c, c},
                                      rng.gaussian_vec(static_cast<size_t>(c * c), 0.0, s));
        m.film.shift_b =
            m.params.add("film.shift_b", {c}, std::vector<double>(static_cast<size_t>(c), 0.0));
    }
    m.cls = add_affine(m.params, "cls", m.fused_dim(), num_classes, rng);
    return m;
}

BoundParams bind_params(const Model& m, Graph* g) {
    BoundParams bp;
    bp.tensors.reserve(m.params.size());
    for (const auto& p : m.params.all()) {
        if (g)
            bp.tensors.push_back(g->leaf(p.value, p.shape));
        else
            bp.tensors.push_back(Tensor(p.value, p.shape));
    }
    return bp;
}

Tensor encoder_forward(const BoundParams& bp, const AffineIds& l1, const AffineIds& l2,
                       const Tensor& x) {
    Tensor h = relu(affine(x, bp.at(l1.w), bp.at(l1.b)));
    return affine(h, bp.at(l2.w), bp.at(l2.b));
}

ZetaGate gate_tensors(const Model& m, const BoundParams& bp) {
    if (!m.has_gate) throw ShapeError("gate_tensors: model has no gate");
    return ZetaGate{bp.at(m.gate.w1), bp.at(m.gate.b1), bp.at(m.gate.w2), bp.at(m.gate.b2)};
}

FilmTensors film_tensors(const Model& m, const BoundParams& bp) {
    if (!m.has_film) throw ShapeError("film_tensors: model has no modulation generators");
    return FilmTensors{bp.at(m.film.scale_w), bp.at(m.film.scale_b), bp.at(m.film.shift_w),
                       bp.at(m.film.shift_b)};
}

void sgd_update(ParamSet& params, const std::vector<std::vector<double>>& grads, double lr,
                double momentum) {
    if (grads.size() != params.size())
        throw ShapeError("sgd_update: gradient count does not match parameters");
    for (size_t i = 0; i < params.size(); ++i) {
        Param& p = params.at(static_cast<int>(i));
        const auto& g = grads[i];
        if (g.size() != p.value.size())
            throw ShapeError("sgd_update: gradient size mismatch for '" + p.name + "'");
        for (size_t j = 0; j < g.size(); ++j) {
            p.velocity[j] = momentum * p.velocity[j] + g[j];
            p.value[j] -= lr * p.velocity[j];
        }
    }
}

}  // namespace mmfuse
