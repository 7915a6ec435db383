#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mmfuse/common.hpp"

namespace mmfuse {

class Graph;

// Immutable dense array of 64-bit floats, row-major. A tensor is either a
// plain constant or a handle into a Graph node; data is never mutated after
// construction.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<double> data, Shape shape);

    static Tensor scalar(double v);
    static Tensor full(Shape shape, double v);
    static Tensor zeros(Shape shape);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
    int64_t dim(int axis) const { return shape_.at(static_cast<size_t>(axis)); }

    std::span<const double> values() const;
    const double* data() const { return data_->data(); }
    std::shared_ptr<const std::vector<double>> shared_values() const { return data_; }
    double value_at(int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }
    double scalar_value() const;

    bool defined() const { return static_cast<bool>(data_); }
    bool requires_grad() const { return node_ >= 0; }
    Graph* graph() const { return graph_; }
    int node() const { return node_; }

    // same values with graph tracking dropped
    Tensor detached() const;

private:
    friend class Graph;
    friend Tensor make_tracked(std::shared_ptr<const std::vector<double>> data, Shape shape,
                               Graph* g, int node);

    std::shared_ptr<const std::vector<double>> data_;
    Shape shape_;
    Graph* graph_ = nullptr;
    int node_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order (which is a
// topological order since tensors are immutable); backward() sweeps the tape
// in reverse and accumulates gradients per node.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // tracked input tensor (parameter or differentiable input)
    Tensor leaf(std::vector<double> data, Shape shape);

    // loss must be a scalar tensor recorded on this graph
    void backward(const Tensor& loss);

    // gradient of the last backward() w.r.t. a tracked tensor; a zero buffer
    // of the tensor's size if the sweep never reached it
    std::span<const double> grad(const Tensor& t);

    size_t num_nodes() const { return nodes_.size(); }
    bool backward_ran() const { return ran_; }

    // --- used by the op layer ---
    using BackFn = std::function<void(Graph&, int)>;  // second arg: own node id
    int add_node(int64_t out_numel, std::string op, BackFn back);
    std::vector<double>& grad_buffer(int node);
    const std::vector<double>& grad_of(int node);
    bool node_reached(int node) const;

private:
    struct Node {
        int64_t numel;
        std::string op;
        BackFn back;
    };
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    std::vector<char> reached_;
    bool ran_ = false;
};

// ---- operations -----------------------------------------------------------

enum class EwOp { add, sub, mul, div, pow };

Tensor ew(EwOp op, const Tensor& a, const Tensor& b);
Tensor ew(EwOp op, const Tensor& a, double b);
Tensor ew(EwOp op, double a, const Tensor& b);

inline Tensor add(const Tensor& a, const Tensor& b) { return ew(EwOp::add, a, b); }
inline Tensor add(const Tensor& a, double b) { return ew(EwOp::add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return ew(EwOp::sub, a, b); }
inline Tensor sub(double a, const Tensor& b) { return ew(EwOp::sub, a, b); }
inline Tensor sub(const Tensor& a, double b) { return ew(EwOp::sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return ew(EwOp::mul, a, b); }
inline Tensor mul(const Tensor& a, double b) { return ew(EwOp::mul, a, b); }
inline Tensor div(const Tensor& a, const Tensor& b) { return ew(EwOp::div, a, b); }
inline Tensor div(const Tensor& a, double b) { return ew(EwOp::div, a, b); }
inline Tensor div(double a, const Tensor& b) { return ew(EwOp::div, a, b); }
inline Tensor pow(const Tensor& a, double b) { return ew(EwOp::pow, a, b); }

enum class ReduceOp { mean, sum, var, max };

// axes must be non-empty, unique, in range. max is not differentiable and
// always yields an untracked result.
Tensor reduce(ReduceOp op, const Tensor& x, std::vector<int> axes);
Tensor reduce_all(ReduceOp op, const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// insert a new axis of size n at position axis, repeating the input
Tensor expand(const Tensor& x, int axis, int64_t n);
// zero-pad along the last axis
Tensor pad_last(const Tensor& x, int64_t left, int64_t right);
Tensor reshape(const Tensor& x, Shape shape);

// mean cross-entropy of row-wise logits against integer labels
Tensor cross_entropy_mean(const Tensor& logits, std::span<const int> labels);

// x·W + b with b repeated across rows
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
// |x| built from relu(x) + relu(-x)
Tensor abs_val(const Tensor& x);
// columns of a followed by columns of b
Tensor concat_cols(const Tensor& a, const Tensor& b);

}  // namespace mmfuse
