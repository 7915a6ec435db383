#include "mmfuse/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

// OpenMP implementations. Parallelism is only ever across output elements;
// the work for one output element stays sequential, so results are
// bit-identical to kernels_serial at any thread count.

namespace mmfuse::kernels {

namespace {
constexpr int64_t kEwGrain = 16384;      // elementwise ops below this run serial
constexpr int64_t kRowGrain = 64;        // row/group counts below this run serial
constexpr int64_t kMatGrain = 16 * 1024; // matmul output cells
}  // namespace

void ew_add(const double* a, const double* b, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void ew_sub(const double* a, const double* b, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void ew_mul(const double* a, const double* b, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void ew_div(const double* a, const double* b, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}

void ew_pow(const double* a, const double* b, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = std::pow(a[i], b[i]);
}

void ew_add_scalar(const double* a, double s, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] + s;
}

void ew_sub_scalar(const double* a, double s, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] - s;
}

void ew_rsub_scalar(const double* a, double s, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = s - a[i];
}

void ew_mul_scalar(const double* a, double s, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void ew_div_scalar(const double* a, double s, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] / s;
}

void ew_rdiv_scalar(const double* a, double s, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = s / a[i];
}

void ew_pow_scalar(const double* a, double s, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = std::pow(a[i], s);
}

void ew_rpow_scalar(const double* a, double s, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = std::pow(s, a[i]);
}

void sigmoid(const double* x, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) {
        double v = x[i];
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
}

void tanh_act(const double* x, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

void relu(const double* x, double* out, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void softmax(const double* x, double* out, int64_t outer, int64_t len, int64_t inner) {
    const int64_t slices = outer * inner;
#pragma omp parallel for schedule(static) if (slices >= kRowGrain)
    for (int64_t s = 0; s < slices; ++s) {
        const int64_t o = s / inner;
        const int64_t in = s % inner;
        const double* xs = x + o * len * inner + in;
        double* os = out + o * len * inner + in;
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < len; ++j) mx = std::max(mx, xs[j * inner]);
        double denom = 0.0;
        for (int64_t j = 0; j < len; ++j) {
            double e = std::exp(xs[j * inner] - mx);
            os[j * inner] = e;
            denom += e;
        }
        for (int64_t j = 0; j < len; ++j) os[j * inner] /= denom;
    }
}

void matmul(const double* a, const double* b, double* out, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static) if (m* n >= kMatGrain)
    for (int64_t i = 0; i < m; ++i) {
        double* orow = out + i * n;
        for (int64_t j = 0; j < n; ++j) orow[j] = 0.0;
        const double* arow = a + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

void acc_matmul_nt(const double* g, const double* b, double* acc, int64_t m, int64_t n,
                   int64_t k) {
#pragma omp parallel for schedule(static) if (m* k >= kMatGrain)
    for (int64_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        double* arow = acc + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const double* brow = b + p * n;
            double sum = 0.0;
            for (int64_t j = 0; j < n; ++j) sum += grow[j] * brow[j];
            arow[p] += sum;
        }
    }
}

void acc_matmul_tn(const double* a, const double* g, double* acc, int64_t m, int64_t k,
                   int64_t n) {
#pragma omp parallel for schedule(static) if (k* n >= kMatGrain)
    for (int64_t p = 0; p < k; ++p) {
        double* arow = acc + p * n;
        for (int64_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (int64_t i = 0; i < m; ++i) sum += a[i * k + p] * g[i * n + j];
            arow[j] += sum;
        }
    }
}

void transpose(const double* x, double* out, int64_t m, int64_t n) {
#pragma omp parallel for schedule(static) if (m* n >= kEwGrain)
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
}

void acc_transpose(const double* g, double* acc, int64_t m, int64_t n) {
#pragma omp parallel for schedule(static) if (m* n >= kEwGrain)
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) acc[i * n + j] += g[j * m + i];
}

namespace {

inline int64_t table_offset(int64_t cell, const int64_t* sizes, const int64_t* strides,
                            int ndim) {
    int64_t off = 0;
    for (int d = ndim - 1; d >= 0; --d) {
        off += (cell % sizes[d]) * strides[d];
        cell /= sizes[d];
    }
    return off;
}

}  // namespace

void reduce(ReduceKind kind, const double* x, double* out, double* var_means,
            const int64_t* kept_sizes, const int64_t* kept_strides, int n_kept,
            const int64_t* red_sizes, const int64_t* red_strides, int n_red,
            int64_t out_numel, int64_t red_numel) {
#pragma omp parallel for schedule(static) if (out_numel >= kRowGrain)
    for (int64_t c = 0; c < out_numel; ++c) {
        const int64_t base = table_offset(c, kept_sizes, kept_strides, n_kept);
        if (kind == ReduceKind::max) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int64_t r = 0; r < red_numel; ++r)
                mx = std::max(mx, x[base + table_offset(r, red_sizes, red_strides, n_red)]);
            out[c] = mx;
            continue;
        }
        double sum = 0.0;
        for (int64_t r = 0; r < red_numel; ++r)
            sum += x[base + table_offset(r, red_sizes, red_strides, n_red)];
        if (kind == ReduceKind::sum) {
            out[c] = sum;
        } else if (kind == ReduceKind::mean) {
            out[c] = sum / static_cast<double>(red_numel);
        } else {  // var, population denominator
            const double mean = sum / static_cast<double>(red_numel);
            double ss = 0.0;
            for (int64_t r = 0; r < red_numel; ++r) {
                const double d =
                    x[base + table_offset(r, red_sizes, red_strides, n_red)] - mean;
                ss += d * d;
            }
            out[c] = ss / static_cast<double>(red_numel);
            if (var_means) var_means[c] = mean;
        }
    }
}

void reduce_meansum_backward(const double* g, double* dx, double scale,
                             const int64_t* kept_sizes, const int64_t* kept_strides,
                             int n_kept, const int64_t* red_sizes, const int64_t* red_strides,
                             int n_red, int64_t out_numel, int64_t red_numel) {
#pragma omp parallel for schedule(static) if (out_numel >= kRowGrain)
    for (int64_t c = 0; c < out_numel; ++c) {
        const int64_t base = table_offset(c, kept_sizes, kept_strides, n_kept);
        const double gv = g[c] * scale;
        for (int64_t r = 0; r < red_numel; ++r)
            dx[base + table_offset(r, red_sizes, red_strides, n_red)] += gv;
    }
}

void reduce_var_backward(const double* g, const double* x, const double* means, double* dx,
                         const int64_t* kept_sizes, const int64_t* kept_strides, int n_kept,
                         const int64_t* red_sizes, const int64_t* red_strides, int n_red,
                         int64_t out_numel, int64_t red_numel) {
    const double inv_n = 2.0 / static_cast<double>(red_numel);
#pragma omp parallel for schedule(static) if (out_numel >= kRowGrain)
    for (int64_t c = 0; c < out_numel; ++c) {
        const int64_t base = table_offset(c, kept_sizes, kept_strides, n_kept);
        const double gv = g[c] * inv_n;
        const double mean = means[c];
        for (int64_t r = 0; r < red_numel; ++r) {
            const int64_t idx = base + table_offset(r, red_sizes, red_strides, n_red);
            dx[idx] += gv * (x[idx] - mean);
        }
    }
}

void expand_fwd(const double* x, double* out, int64_t outer, int64_t rep, int64_t inner) {
    const int64_t cells = outer * rep;
#pragma omp parallel for schedule(static) if (cells* inner >= kEwGrain)
    for (int64_t c = 0; c < cells; ++c) {
        const int64_t o = c / rep;
        const double* src = x + o * inner;
        double* dst = out + c * inner;
        for (int64_t i = 0; i < inner; ++i) dst[i] = src[i];
    }
}

void expand_bwd(const double* g, double* dx, int64_t outer, int64_t rep, int64_t inner) {
#pragma omp parallel for schedule(static) if (outer* inner >= kRowGrain)
    for (int64_t c = 0; c < outer * inner; ++c) {
        const int64_t o = c / inner;
        const int64_t i = c % inner;
        double sum = 0.0;
        for (int64_t r = 0; r < rep; ++r) sum += g[(o * rep + r) * inner + i];
        dx[c] += sum;
    }
}

void pad_last_fwd(const double* x, double* out, int64_t rows, int64_t c, int64_t left,
                  int64_t right) {
    const int64_t width = left + c + right;
#pragma omp parallel for schedule(static) if (rows* width >= kEwGrain)
    for (int64_t r = 0; r < rows; ++r) {
        double* dst = out + r * width;
        const double* src = x + r * c;
        for (int64_t j = 0; j < left; ++j) dst[j] = 0.0;
        for (int64_t j = 0; j < c; ++j) dst[left + j] = src[j];
        for (int64_t j = 0; j < right; ++j) dst[left + c + j] = 0.0;
    }
}

void pad_last_bwd(const double* g, double* dx, int64_t rows, int64_t c, int64_t left,
                  int64_t right) {
    const int64_t width = left + c + right;
#pragma omp parallel for schedule(static) if (rows* c >= kEwGrain)
    for (int64_t r = 0; r < rows; ++r) {
        const double* src = g + r * width + left;
        double* dst = dx + r * c;
        for (int64_t j = 0; j < c; ++j) dst[j] += src[j];
    }
}

double cross_entropy_fwd(const double* logits, int64_t rows, int64_t cols, const int* labels,
                         double* probs) {
    // per-row log-sum-exp into probs, sequential loss accumulation over rows
    softmax(logits, probs, rows, cols, 1);
    double loss = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
        const double* lrow = logits + r * cols;
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < cols; ++j) mx = std::max(mx, lrow[j]);
        double denom = 0.0;
        for (int64_t j = 0; j < cols; ++j) denom += std::exp(lrow[j] - mx);
        loss += (mx + std::log(denom)) - lrow[labels[r]];
    }
    return loss / static_cast<double>(rows);
}

void cross_entropy_bwd(const double* probs, const int* labels, double gscale, double* dlogits,
                       int64_t rows, int64_t cols) {
    const double inv = gscale / static_cast<double>(rows);
#pragma omp parallel for schedule(static) if (rows >= kRowGrain)
    for (int64_t r = 0; r < rows; ++r) {
        const double* prow = probs + r * cols;
        double* drow = dlogits + r * cols;
        for (int64_t j = 0; j < cols; ++j) drow[j] += inv * prow[j];
        drow[labels[r]] -= inv;
    }
}

void axpy(const double* a, double alpha, double* acc, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) acc[i] += alpha * a[i];
}

void acc_mul(const double* a, const double* b, double* acc, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) acc[i] += a[i] * b[i];
}

void acc_sigmoid_bwd(const double* g, const double* y, double* dx, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
}

void acc_tanh_bwd(const double* g, const double* y, double* dx, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
}

void acc_relu_bwd(const double* g, const double* x, double* dx, int64_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) dx[i] += x[i] > 0.0 ? g[i] : 0.0;
}

void acc_softmax_bwd(const double* g, const double* y, double* dx, int64_t outer, int64_t len,
                     int64_t inner) {
    const int64_t slices = outer * inner;
#pragma omp parallel for schedule(static) if (slices >= kRowGrain)
    for (int64_t s = 0; s < slices; ++s) {
        const int64_t o = s / inner;
        const int64_t in = s % inner;
        const double* gs = g + o * len * inner + in;
        const double* ys = y + o * len * inner + in;
        double* ds = dx + o * len * inner + in;
        double dot = 0.0;
        for (int64_t j = 0; j < len; ++j) dot += gs[j * inner] * ys[j * inner];
        for (int64_t j = 0; j < len; ++j)
            ds[j * inner] += ys[j * inner] * (gs[j * inner] - dot);
    }
}

bool all_finite(const double* x, int64_t n) {
    bool ok = true;
#pragma omp parallel for schedule(static) reduction(&& : ok) if (n >= kEwGrain)
    for (int64_t i = 0; i < n; ++i) ok = ok && std::isfinite(x[i]);
    return ok;
}

}  // namespace mmfuse::kernels
