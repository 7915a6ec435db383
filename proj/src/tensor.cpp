#include "mmfuse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "mmfuse/kernels.hpp"

namespace mmfuse {

namespace K = kernels;

namespace {

void check_shape_valid(const Shape& shape, int64_t data_size) {
    for (int64_t d : shape)
        if (d <= 0) throw ShapeError("tensor: dimension sizes must be positive, got " + shape_str(shape));
    if (shape_numel(shape) != data_size)
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data_size));
}

void check_finite(const std::vector<double>& v, const char* op) {
    if (!K::all_finite(v.data(), static_cast<int64_t>(v.size())))
        throw NumericError(std::string(op) + ": produced non-finite values");
}

Graph* common_graph(const Tensor& a, const Tensor& b) {
    Graph* g = a.requires_grad() ? a.graph() : nullptr;
    if (b.requires_grad()) {
        if (g && g != b.graph())
            throw ShapeError("operands are recorded on different graphs");
        g = b.graph();
    }
    return g;
}

std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
    return st;
}

}  // namespace

Tensor make_tracked(std::shared_ptr<const std::vector<double>> data, Shape shape, Graph* g,
                    int node) {
    Tensor t;
    t.data_ = std::move(data);
    t.shape_ = std::move(shape);
    t.graph_ = g;
    t.node_ = node;
    return t;
}

Tensor::Tensor(std::vector<double> data, Shape shape) {
    check_shape_valid(shape, static_cast<int64_t>(data.size()));
    check_finite(data, "tensor");
    data_ = std::make_shared<const std::vector<double>>(std::move(data));
    shape_ = std::move(shape);
}

Tensor Tensor::scalar(double v) { return Tensor({v}, Shape{}); }

Tensor Tensor::full(Shape shape, double v) {
    std::vector<double> d(static_cast<size_t>(shape_numel(shape)), v);
    return Tensor(std::move(d), std::move(shape));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

std::span<const double> Tensor::values() const {
    if (!data_) throw ShapeError("tensor: undefined");
    return {data_->data(), data_->size()};
}

double Tensor::scalar_value() const {
    if (numel() != 1) throw ShapeError("tensor: not a scalar, shape " + shape_str(shape_));
    return (*data_)[0];
}

Tensor Tensor::detached() const {
    Tensor t;
    t.data_ = data_;
    t.shape_ = shape_;
    return t;
}

// ---- Graph ------------------------------------------------------------------

Tensor Graph::leaf(std::vector<double> data, Shape shape) {
    check_shape_valid(shape, static_cast<int64_t>(data.size()));
    check_finite(data, "leaf");
    auto buf = std::make_shared<const std::vector<double>>(std::move(data));
    const int id = add_node(static_cast<int64_t>(buf->size()), "leaf", nullptr);
    return make_tracked(std::move(buf), std::move(shape), this, id);
}

int Graph::add_node(int64_t out_numel, std::string op, BackFn back) {
    nodes_.push_back(Node{out_numel, std::move(op), std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
}

std::vector<double>& Graph::grad_buffer(int node) {
    if (grads_.size() < nodes_.size()) {
        grads_.resize(nodes_.size());
        reached_.resize(nodes_.size(), 0);
    }
    auto& buf = grads_[static_cast<size_t>(node)];
    if (buf.empty()) buf.assign(static_cast<size_t>(nodes_[static_cast<size_t>(node)].numel), 0.0);
    reached_[static_cast<size_t>(node)] = 1;
    return buf;
}

const std::vector<double>& Graph::grad_of(int node) { return grad_buffer(node); }

bool Graph::node_reached(int node) const {
    return node < static_cast<int>(reached_.size()) && reached_[static_cast<size_t>(node)];
}

void Graph::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ShapeError("backward: loss must be a scalar tensor");
    if (loss.graph() != this || loss.node() < 0)
        throw ShapeError("backward: loss is not recorded on this graph");
    grads_.assign(nodes_.size(), {});
    reached_.assign(nodes_.size(), 0);
    ran_ = true;
    grad_buffer(loss.node())[0] = 1.0;
    for (int i = loss.node(); i >= 0; --i) {
        if (!reached_[static_cast<size_t>(i)]) continue;
        auto& fn = nodes_[static_cast<size_t>(i)].back;
        if (fn) fn(*this, i);
    }
}

std::span<const double> Graph::grad(const Tensor& t) {
    if (!ran_) throw ShapeError("grad: backward() has not run");
    if (t.graph() != this || t.node() < 0)
        throw ShapeError("grad: tensor is not recorded on this graph");
    const auto& buf = grad_buffer(t.node());
    return {buf.data(), buf.size()};
}

// ---- op helpers -------------------------------------------------------------

namespace {

using ConstData = std::shared_ptr<const std::vector<double>>;

Tensor finish(std::vector<double> out, Shape shape, Graph* g, const char* op,
              const std::function<void(Graph&, int)>& back) {
    check_finite(out, op);
    auto buf = std::make_shared<const std::vector<double>>(std::move(out));
    if (!g) return make_tracked(std::move(buf), std::move(shape), nullptr, -1);
    const int id = g->add_node(static_cast<int64_t>(buf->size()), op, back);
    return make_tracked(std::move(buf), std::move(shape), g, id);
}

ConstData shared_of(const Tensor& t) {
    // tensors are immutable, so sharing the buffer into closures is safe
    return t.shared_values();
}

}  // namespace

// ---- elementwise ------------------------------------------------------------

Tensor ew(EwOp op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("elementwise: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const int64_t n = a.numel();
    if (op == EwOp::div) {
        for (double v : b.values())
            if (v == 0.0) throw DegenerateInputError("div: division by exact zero");
    }
    if (op == EwOp::pow && b.requires_grad())
        throw ShapeError("pow: gradient w.r.t. a tensor exponent is not supported");

    std::vector<double> out(static_cast<size_t>(n));
    const double* ap = a.data();
    const double* bp = b.data();
    switch (op) {
        case EwOp::add: K::ew_add(ap, bp, out.data(), n); break;
        case EwOp::sub: K::ew_sub(ap, bp, out.data(), n); break;
        case EwOp::mul: K::ew_mul(ap, bp, out.data(), n); break;
        case EwOp::div: K::ew_div(ap, bp, out.data(), n); break;
        case EwOp::pow: K::ew_pow(ap, bp, out.data(), n); break;
    }

    Graph* g = common_graph(a, b);
    if (!g) return finish(std::move(out), a.shape(), nullptr, "elementwise", {});

    auto ad = shared_of(a);
    auto bd = shared_of(b);
    auto od = (op == EwOp::div) ? std::make_shared<const std::vector<double>>(out)
                                : nullptr;  // saved for div backward
    const int an = a.requires_grad() ? a.node() : -1;
    const int bn = b.requires_grad() ? b.node() : -1;

    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        switch (op) {
            case EwOp::add:
                if (an >= 0) K::axpy(gout.data(), 1.0, gr.grad_buffer(an).data(), n);
                if (bn >= 0) K::axpy(gout.data(), 1.0, gr.grad_buffer(bn).data(), n);
                break;
            case EwOp::sub:
                if (an >= 0) K::axpy(gout.data(), 1.0, gr.grad_buffer(an).data(), n);
                if (bn >= 0) K::axpy(gout.data(), -1.0, gr.grad_buffer(bn).data(), n);
                break;
            case EwOp::mul:
                if (an >= 0) K::acc_mul(gout.data(), bd->data(), gr.grad_buffer(an).data(), n);
                if (bn >= 0) K::acc_mul(gout.data(), ad->data(), gr.grad_buffer(bn).data(), n);
                break;
            case EwOp::div: {
                std::vector<double> gb(static_cast<size_t>(n));
                K::ew_div(gout.data(), bd->data(), gb.data(), n);  // g/b
                if (an >= 0) K::axpy(gb.data(), 1.0, gr.grad_buffer(an).data(), n);
                if (bn >= 0) {
                    std::vector<double> t(static_cast<size_t>(n));
                    K::ew_mul(gb.data(), od->data(), t.data(), n);  // g*a/b^2
                    K::axpy(t.data(), -1.0, gr.grad_buffer(bn).data(), n);
                }
                break;
            }
            case EwOp::pow: {
                if (an >= 0) {
                    std::vector<double> bm1(static_cast<size_t>(n));
                    K::ew_sub_scalar(bd->data(), 1.0, bm1.data(), n);
                    std::vector<double> t(static_cast<size_t>(n));
                    K::ew_pow(ad->data(), bm1.data(), t.data(), n);  // a^(b-1)
                    std::vector<double> u(static_cast<size_t>(n));
                    K::ew_mul(t.data(), bd->data(), u.data(), n);
                    K::acc_mul(u.data(), gout.data(), gr.grad_buffer(an).data(), n);
                }
                break;
            }
        }
    };
    return finish(std::move(out), a.shape(), g, "elementwise", back);
}

Tensor ew(EwOp op, const Tensor& a, double b) {
    const int64_t n = a.numel();
    if (op == EwOp::div && b == 0.0)
        throw DegenerateInputError("div: division by exact zero");
    std::vector<double> out(static_cast<size_t>(n));
    const double* ap = a.data();
    switch (op) {
        case EwOp::add: K::ew_add_scalar(ap, b, out.data(), n); break;
        case EwOp::sub: K::ew_sub_scalar(ap, b, out.data(), n); break;
        case EwOp::mul: K::ew_mul_scalar(ap, b, out.data(), n); break;
        case EwOp::div: K::ew_div_scalar(ap, b, out.data(), n); break;
        case EwOp::pow: K::ew_pow_scalar(ap, b, out.data(), n); break;
    }
    if (!a.requires_grad()) return finish(std::move(out), a.shape(), nullptr, "elementwise", {});

    Graph* g = a.graph();
    auto ad = shared_of(a);
    const int an = a.node();
    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        switch (op) {
            case EwOp::add:
            case EwOp::sub:
                K::axpy(gout.data(), 1.0, gr.grad_buffer(an).data(), n);
                break;
            case EwOp::mul:
                K::axpy(gout.data(), b, gr.grad_buffer(an).data(), n);
                break;
            case EwOp::div:
                K::axpy(gout.data(), 1.0 / b, gr.grad_buffer(an).data(), n);
                break;
            case EwOp::pow: {
                std::vector<double> t(static_cast<size_t>(n));
                K::ew_pow_scalar(ad->data(), b - 1.0, t.data(), n);
                std::vector<double> u(static_cast<size_t>(n));
                K::ew_mul(t.data(), gout.data(), u.data(), n);
                K::axpy(u.data(), b, gr.grad_buffer(an).data(), n);
                break;
            }
        }
    };
    return finish(std::move(out), a.shape(), g, "elementwise", back);
}

Tensor ew(EwOp op, double a, const Tensor& b) {
    const int64_t n = b.numel();
    if (op == EwOp::add || op == EwOp::mul) return ew(op, b, a);
    if (op == EwOp::div) {
        for (double v : b.values())
            if (v == 0.0) throw DegenerateInputError("div: division by exact zero");
    }
    if (op == EwOp::pow && b.requires_grad() && a <= 0.0)
        throw DegenerateInputError("pow: base must be positive when the exponent needs gradients");

    std::vector<double> out(static_cast<size_t>(n));
    const double* bp = b.data();
    switch (op) {
        case EwOp::sub: K::ew_rsub_scalar(bp, a, out.data(), n); break;
        case EwOp::div: K::ew_rdiv_scalar(bp, a, out.data(), n); break;
        case EwOp::pow: K::ew_rpow_scalar(bp, a, out.data(), n); break;
        default: break;
    }
    if (!b.requires_grad()) return finish(std::move(out), b.shape(), nullptr, "elementwise", {});

    Graph* g = b.graph();
    auto bd = shared_of(b);
    auto od = (op == EwOp::div || op == EwOp::pow)
                  ? std::make_shared<const std::vector<double>>(out)
                  : nullptr;
    const int bn = b.node();
    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        switch (op) {
            case EwOp::sub:
                K::axpy(gout.data(), -1.0, gr.grad_buffer(bn).data(), n);
                break;
            case EwOp::div: {
                // d(a/b)/db = -a/b^2 = -out/b
                std::vector<double> t(static_cast<size_t>(n));
                K::ew_div(od->data(), bd->data(), t.data(), n);
                std::vector<double> u(static_cast<size_t>(n));
                K::ew_mul(t.data(), gout.data(), u.data(), n);
                K::axpy(u.data(), -1.0, gr.grad_buffer(bn).data(), n);
                break;
            }
            case EwOp::pow: {
                // d(a^b)/db = out * ln(a)
                std::vector<double> t(static_cast<size_t>(n));
                K::ew_mul(od->data(), gout.data(), t.data(), n);
                K::axpy(t.data(), std::log(a), gr.grad_buffer(bn).data(), n);
                break;
            }
            default: break;
        }
    };
    return finish(std::move(out), b.shape(), g, "elementwise", back);
}

// ---- reduce -----------------------------------------------------------------

Tensor reduce(ReduceOp op, const Tensor& x, std::vector<int> axes) {
    if (!x.defined()) throw ShapeError("reduce: undefined tensor");
    if (axes.empty()) throw ShapeError("reduce: empty axis list");
    std::sort(axes.begin(), axes.end());
    for (size_t i = 0; i < axes.size(); ++i) {
        if (axes[i] < 0 || axes[i] >= x.rank())
            throw ShapeError("reduce: axis out of range");
        if (i > 0 && axes[i] == axes[i - 1]) throw ShapeError("reduce: duplicate axis");
    }

    const auto strides = row_major_strides(x.shape());
    auto kept_sizes = std::make_shared<std::vector<int64_t>>();
    auto kept_strides = std::make_shared<std::vector<int64_t>>();
    auto red_sizes = std::make_shared<std::vector<int64_t>>();
    auto red_strides = std::make_shared<std::vector<int64_t>>();
    Shape out_shape;
    size_t ai = 0;
    for (int d = 0; d < x.rank(); ++d) {
        if (ai < axes.size() && axes[ai] == d) {
            red_sizes->push_back(x.dim(d));
            red_strides->push_back(strides[static_cast<size_t>(d)]);
            ++ai;
        } else {
            kept_sizes->push_back(x.dim(d));
            kept_strides->push_back(strides[static_cast<size_t>(d)]);
            out_shape.push_back(x.dim(d));
        }
    }
    const int64_t out_numel = shape_numel(out_shape);
    const int64_t red_numel = shape_numel(
        Shape(red_sizes->begin(), red_sizes->end()));

    ReduceKind kind;
    switch (op) {
        case ReduceOp::sum: kind = ReduceKind::sum; break;
        case ReduceOp::mean: kind = ReduceKind::mean; break;
        case ReduceOp::var: kind = ReduceKind::var; break;
        case ReduceOp::max: kind = ReduceKind::max; break;
    }

    std::vector<double> out(static_cast<size_t>(out_numel));
    auto means = (op == ReduceOp::var)
                     ? std::make_shared<std::vector<double>>(static_cast<size_t>(out_numel))
                     : nullptr;
    K::reduce(kind, x.data(), out.data(), means ? means->data() : nullptr, kept_sizes->data(),
              kept_strides->data(), static_cast<int>(kept_sizes->size()), red_sizes->data(),
              red_strides->data(), static_cast<int>(red_sizes->size()), out_numel, red_numel);

    // max is not differentiable here; result is always untracked
    if (!x.requires_grad() || op == ReduceOp::max)
        return finish(std::move(out), std::move(out_shape), nullptr, "reduce", {});

    Graph* g = x.graph();
    const int xn = x.node();
    const int64_t in_numel = x.numel();
    auto xd = shared_of(x);
    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        auto& dx = gr.grad_buffer(xn);
        (void)in_numel;
        if (op == ReduceOp::var) {
            K::reduce_var_backward(gout.data(), xd->data(), means->data(), dx.data(),
                                   kept_sizes->data(), kept_strides->data(),
                                   static_cast<int>(kept_sizes->size()), red_sizes->data(),
                                   red_strides->data(), static_cast<int>(red_sizes->size()),
                                   out_numel, red_numel);
        } else {
            const double scale =
                op == ReduceOp::mean ? 1.0 / static_cast<double>(red_numel) : 1.0;
            K::reduce_meansum_backward(gout.data(), dx.data(), scale, kept_sizes->data(),
                                       kept_strides->data(),
                                       static_cast<int>(kept_sizes->size()), red_sizes->data(),
                                       red_strides->data(),
                                       static_cast<int>(red_sizes->size()), out_numel,
                                       red_numel);
        }
    };
    return finish(std::move(out), std::move(out_shape), g, "reduce", back);
}

Tensor reduce_all(ReduceOp op, const Tensor& x) {
    if (x.rank() == 0) {
        if (op == ReduceOp::sum || op == ReduceOp::mean) return x;
        throw ShapeError("reduce_all: rank-0 input");
    }
    std::vector<int> axes(static_cast<size_t>(x.rank()));
    std::iota(axes.begin(), axes.end(), 0);
    return reduce(op, x, std::move(axes));
}

// ---- activations ------------------------------------------------------------

namespace {

enum class Act { sigmoid, tanh, relu };

Tensor unary_act(Act kind, const Tensor& x, const char* name) {
    const int64_t n = x.numel();
    std::vector<double> out(static_cast<size_t>(n));
    switch (kind) {
        case Act::sigmoid: K::sigmoid(x.data(), out.data(), n); break;
        case Act::tanh: K::tanh_act(x.data(), out.data(), n); break;
        case Act::relu: K::relu(x.data(), out.data(), n); break;
    }
    if (!x.requires_grad()) return finish(std::move(out), x.shape(), nullptr, name, {});

    Graph* g = x.graph();
    const int xn = x.node();
    auto saved = (kind == Act::relu) ? shared_of(x)
                                     : std::make_shared<const std::vector<double>>(out);
    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        auto& dx = gr.grad_buffer(xn);
        switch (kind) {
            case Act::sigmoid: K::acc_sigmoid_bwd(gout.data(), saved->data(), dx.data(), n); break;
            case Act::tanh: K::acc_tanh_bwd(gout.data(), saved->data(), dx.data(), n); break;
            case Act::relu: K::acc_relu_bwd(gout.data(), saved->data(), dx.data(), n); break;
        }
    };
    return finish(std::move(out), x.shape(), g, name, back);
}

}  // namespace

Tensor sigmoid(const Tensor& x) { return unary_act(Act::sigmoid, x, "sigmoid"); }
Tensor tanh(const Tensor& x) { return unary_act(Act::tanh, x, "tanh"); }
Tensor relu(const Tensor& x) { return unary_act(Act::relu, x, "relu"); }

Tensor softmax(const Tensor& x, int axis) {
    if (axis < 0 || axis >= x.rank()) throw ShapeError("softmax: axis out of range");
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= x.dim(d);
    for (int d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
    const int64_t len = x.dim(axis);

    std::vector<double> out(static_cast<size_t>(x.numel()));
    K::softmax(x.data(), out.data(), outer, len, inner);
    if (!x.requires_grad()) return finish(std::move(out), x.shape(), nullptr, "softmax", {});

    Graph* g = x.graph();
    const int xn = x.node();
    auto yd = std::make_shared<const std::vector<double>>(out);
    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        K::acc_softmax_bwd(gout.data(), yd->data(), gr.grad_buffer(xn).data(), outer, len,
                           inner);
    };
    return finish(std::move(out), x.shape(), g, "softmax", back);
}

// ---- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: operands must be rank-2, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<size_t>(m * n));
    K::matmul(a.data(), b.data(), out.data(), m, k, n);

    Graph* g = common_graph(a, b);
    if (!g) return finish(std::move(out), {m, n}, nullptr, "matmul", {});

    auto ad = shared_of(a);
    auto bd = shared_of(b);
    const int an = a.requires_grad() ? a.node() : -1;
    const int bn = b.requires_grad() ? b.node() : -1;
    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        if (an >= 0) K::acc_matmul_nt(gout.data(), bd->data(), gr.grad_buffer(an).data(), m, n, k);
        if (bn >= 0) K::acc_matmul_tn(ad->data(), gout.data(), gr.grad_buffer(bn).data(), m, k, n);
    };
    return finish(std::move(out), {m, n}, g, "matmul", back);
}

Tensor transpose(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("transpose: rank-2 tensor required");
    const int64_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(static_cast<size_t>(m * n));
    K::transpose(x.data(), out.data(), m, n);
    if (!x.requires_grad()) return finish(std::move(out), {n, m}, nullptr, "transpose", {});

    Graph* g = x.graph();
    const int xn = x.node();
    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        K::acc_transpose(gout.data(), gr.grad_buffer(xn).data(), m, n);
    };
    return finish(std::move(out), {n, m}, g, "transpose", back);
}

// ---- structure ops ----------------------------------------------------------

Tensor expand(const Tensor& x, int axis, int64_t n) {
    if (axis < 0 || axis > x.rank()) throw ShapeError("expand: axis out of range");
    if (n <= 0) throw ShapeError("expand: repetition count must be positive");
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= x.dim(d);
    for (int d = axis; d < x.rank(); ++d) inner *= x.dim(d);

    Shape out_shape = x.shape();
    out_shape.insert(out_shape.begin() + axis, n);
    std::vector<double> out(static_cast<size_t>(outer * n * inner));
    K::expand_fwd(x.data(), out.data(), outer, n, inner);
    if (!x.requires_grad()) return finish(std::move(out), std::move(out_shape), nullptr, "expand", {});

    Graph* g = x.graph();
    const int xn = x.node();
    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        K::expand_bwd(gout.data(), gr.grad_buffer(xn).data(), outer, n, inner);
    };
    return finish(std::move(out), std::move(out_shape), g, "expand", back);
}

Tensor pad_last(const Tensor& x, int64_t left, int64_t right) {
    if (x.rank() < 1) throw ShapeError("pad_last: rank-0 tensor");
    if (left < 0 || right < 0) throw ShapeError("pad_last: negative padding");
    const int64_t c = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / c;
    Shape out_shape = x.shape();
    out_shape.back() += left + right;
    std::vector<double> out(static_cast<size_t>(rows * (left + c + right)));
    K::pad_last_fwd(x.data(), out.data(), rows, c, left, right);
    if (!x.requires_grad())
        return finish(std::move(out), std::move(out_shape), nullptr, "pad_last", {});

    Graph* g = x.graph();
    const int xn = x.node();
    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        K::pad_last_bwd(gout.data(), gr.grad_buffer(xn).data(), rows, c, left, right);
    };
    return finish(std::move(out), std::move(out_shape), g, "pad_last", back);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape: element count mismatch, " + shape_str(x.shape()) + " -> " +
                         shape_str(shape));
    for (int64_t d : shape)
        if (d <= 0) throw ShapeError("reshape: dimension sizes must be positive");
    std::vector<double> out(x.values().begin(), x.values().end());
    if (!x.requires_grad()) return finish(std::move(out), std::move(shape), nullptr, "reshape", {});

    Graph* g = x.graph();
    const int xn = x.node();
    const int64_t n = x.numel();
    auto back = [=](Graph& gr, int self) {
        const auto& gout = gr.grad_of(self);
        K::axpy(gout.data(), 1.0, gr.grad_buffer(xn).data(), n);
    };
    return finish(std::move(out), std::move(shape), g, "reshape", back);
}

// ---- loss -------------------------------------------------------------------

Tensor cross_entropy_mean(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy: logits must be (batch, classes)");
    const int64_t rows = logits.dim(0), cols = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != rows)
        throw ShapeError("cross_entropy: label count does not match batch");
    for (int y : labels)
        if (y < 0 || y >= cols) throw ShapeError("cross_entropy: label out of range");

    auto labels_copy = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
    auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(rows * cols));
    const double loss = K::cross_entropy_fwd(logits.data(), rows, cols, labels_copy->data(),
                                             probs->data());
    std::vector<double> out{loss};
    if (!logits.requires_grad()) return finish(std::move(out), Shape{}, nullptr, "cross_entropy", {});

    Graph* g = logits.graph();
    const int xn = logits.node();
    auto back = [=](Graph& gr, int self) {
        const double gs = gr.grad_of(self)[0];
        K::cross_entropy_bwd(probs->data(), labels_copy->data(), gs,
                             gr.grad_buffer(xn).data(), rows, cols);
    };
    return finish(std::move(out), Shape{}, g, "cross_entropy", back);
}

// ---- composites -------------------------------------------------------------

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1)
        throw ShapeError("affine: expected x(B,I), w(I,O), b(O)");
    if (b.dim(0) != w.dim(1)) throw ShapeError("affine: bias width does not match weight");
    Tensor y = matmul(x, w);
    return add(y, expand(b, 0, x.dim(0)));
}

Tensor abs_val(const Tensor& x) { return add(relu(x), relu(sub(0.0, x))); }

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
        throw ShapeError("concat_cols: expected (B,C1) and (B,C2)");
    return add(pad_last(a, 0, b.dim(1)), pad_last(b, a.dim(1), 0));
}

}  // namespace mmfuse
