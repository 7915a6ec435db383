#pragma once

#include <cstdint>

namespace mmfuse {

enum class ReduceKind { sum, mean, var, max };

// Dense kernels. Two implementations share this signature set:
//   kernels::        OpenMP-parallel, used by the tensor engine
//   kernels_serial:: plain loops, the reference the tests compare against
//
// Every parallel loop runs over independent output elements; accumulation
// inside one output element is always sequential in index order, so both
// implementations produce bit-identical results at any thread count.
//
// Reductions are described by two dimension tables: the kept axes (sizes and
// input strides, row-major order) address one output cell each, the reduced
// axes enumerate the cells folded into it.
#define MMFUSE_KERNEL_API(ns)                                                                 \
    namespace ns {                                                                            \
    void ew_add(const double* a, const double* b, double* out, int64_t n);                    \
    void ew_sub(const double* a, const double* b, double* out, int64_t n);                    \
    void ew_mul(const double* a, const double* b, double* out, int64_t n);                    \
    void ew_div(const double* a, const double* b, double* out, int64_t n);                    \
    void ew_pow(const double* a, const double* b, double* out, int64_t n);                    \
    void ew_add_scalar(const double* a, double s, double* out, int64_t n);                    \
    void ew_sub_scalar(const double* a, double s, double* out, int64_t n);                    \
    void ew_rsub_scalar(const double* a, double s, double* out, int64_t n);                   \
    void ew_mul_scalar(const double* a, double s, double* out, int64_t n);                    \
    void ew_div_scalar(const double* a, double s, double* out, int64_t n);                    \
    void ew_rdiv_scalar(const double* a, double s, double* out, int64_t n);                   \
    void ew_pow_scalar(const double* a, double s, double* out, int64_t n);                    \
    void ew_rpow_scalar(const double* a, double s, double* out, int64_t n);                   \
    void sigmoid(const double* x, double* out, int64_t n);                                    \
    void tanh_act(const double* x, double* out, int64_t n);                                   \
    void relu(const double* x, double* out, int64_t n);                                       \
    void softmax(const double* x, double* out, int64_t outer, int64_t len, int64_t inner);    \
    void matmul(const double* a, const double* b, double* out, int64_t m, int64_t k,          \
                int64_t n);                                                                   \
    void acc_matmul_nt(const double* g, const double* b, double* acc, int64_t m, int64_t n,   \
                       int64_t k);                                                            \
    void acc_matmul_tn(const double* a, const double* g, double* acc, int64_t m, int64_t k,   \
                       int64_t n);                                                            \
    void transpose(const double* x, double* out, int64_t m, int64_t n);                       \
    void acc_transpose(const double* g, double* acc, int64_t m, int64_t n);                   \
    void reduce(ReduceKind kind, const double* x, double* out, double* var_means,             \
                const int64_t* kept_sizes, const int64_t* kept_strides, int n_kept,           \
                const int64_t* red_sizes, const int64_t* red_strides, int n_red,              \
                int64_t out_numel, int64_t red_numel);                                        \
    void reduce_meansum_backward(const double* g, double* dx, double scale,                   \
                                 const int64_t* kept_sizes, const int64_t* kept_strides,      \
                                 int n_kept, const int64_t* red_sizes,                        \
                                 const int64_t* red_strides, int n_red, int64_t out_numel,    \
                                 int64_t red_numel);                                          \
    void reduce_var_backward(const double* g, const double* x, const double* means,           \
                             double* dx, const int64_t* kept_sizes,                           \
                             const int64_t* kept_strides, int n_kept,                         \
                             const int64_t* red_sizes, const int64_t* red_strides, int n_red, \
                             int64_t out_numel, int64_t red_numel);                           \
    void expand_fwd(const double* x, double* out, int64_t outer, int64_t rep, int64_t inner); \
    void expand_bwd(const double* g, double* dx, int64_t outer, int64_t rep, int64_t inner);  \
    void pad_last_fwd(const double* x, double* out, int64_t rows, int64_t c, int64_t left,    \
                      int64_t right);                                                         \
    void pad_last_bwd(const double* g, double* dx, int64_t rows, int64_t c, int64_t left,     \
                      int64_t right);                                                         \
    double cross_entropy_fwd(const double* logits, int64_t rows, int64_t cols,                \
                             const int* labels, double* probs);                               \
    void cross_entropy_bwd(const double* probs, const int* labels, double gscale,             \
                           double* dlogits, int64_t rows, int64_t cols);                      \
    void axpy(const double* a, double alpha, double* acc, int64_t n);                         \
    void acc_mul(const double* a, const double* b, double* acc, int64_t n);                   \
    void acc_sigmoid_bwd(const double* g, const double* y, double* dx, int64_t n);            \
    void acc_tanh_bwd(const double* g, const double* y, double* dx, int64_t n);               \
    void acc_relu_bwd(const double* g, const double* x, double* dx, int64_t n);               \
    void acc_softmax_bwd(const double* g, const double* y, double* dx, int64_t outer,         \
                         int64_t len, int64_t inner);                                         \
    bool all_finite(const double* x, int64_t n);                                              \
    }

MMFUSE_KERNEL_API(kernels)
MMFUSE_KERNEL_API(kernels_serial)

#undef MMFUSE_KERNEL_API

}  // namespace mmfuse
