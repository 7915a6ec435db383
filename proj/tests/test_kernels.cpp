#include <doctest.h>
#include <omp.h>

#include <vector>

#include "mmfuse/kernels.hpp"
#include "mmfuse/rng.hpp"

// The OpenMP kernels must be bit-identical to the serial reference at any
// thread count: parallelism is only across output elements.

namespace ko = mmfuse::kernels;
namespace ks = mmfuse::kernels_serial;
using mmfuse::CounterRng;
using mmfuse::ReduceKind;

namespace {

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("elementwise and activations match the serial reference bitwise") {
    CounterRng rng(7);
    for (int64_t n : {1, 7, 513, 100003}) {
        std::vector<double> a = rng.gaussian_vec(static_cast<size_t>(n));
        std::vector<double> b = rng.uniform_vec(static_cast<size_t>(n), 0.5, 2.5);
        std::vector<double> o1(static_cast<size_t>(n)), o2(static_cast<size_t>(n));

        ko::ew_add(a.data(), b.data(), o1.data(), n);
        ks::ew_add(a.data(), b.data(), o2.data(), n);
        CHECK(bits_equal(o1, o2));
        ko::ew_div(a.data(), b.data(), o1.data(), n);
        ks::ew_div(a.data(), b.data(), o2.data(), n);
        CHECK(bits_equal(o1, o2));
        ko::ew_pow(b.data(), a.data(), o1.data(), n);
        ks::ew_pow(b.data(), a.data(), o2.data(), n);
        CHECK(bits_equal(o1, o2));
        ko::ew_rsub_scalar(a.data(), 1.5, o1.data(), n);
        ks::ew_rsub_scalar(a.data(), 1.5, o2.data(), n);
        CHECK(bits_equal(o1, o2));
        ko::sigmoid(a.data(), o1.data(), n);
        ks::sigmoid(a.data(), o2.data(), n);
        CHECK(bits_equal(o1, o2));
        ko::tanh_act(a.data(), o1.data(), n);
        ks::tanh_act(a.data(), o2.data(), n);
        CHECK(bits_equal(o1, o2));
        ko::relu(a.data(), o1.data(), n);
        ks::relu(a.data(), o2.data(), n);
        CHECK(bits_equal(o1, o2));
    }
}

TEST_CASE("matmul family matches bitwise") {
    CounterRng rng(11);
    const int64_t m = 37, k = 53, n = 29;
    std::vector<double> a = rng.gaussian_vec(static_cast<size_t>(m * k));
    std::vector<double> b = rng.gaussian_vec(static_cast<size_t>(k * n));
    std::vector<double> o1(static_cast<size_t>(m * n)), o2(static_cast<size_t>(m * n));
    ko::matmul(a.data(), b.data(), o1.data(), m, k, n);
    ks::matmul(a.data(), b.data(), o2.data(), m, k, n);
    CHECK(bits_equal(o1, o2));

    std::vector<double> acc1(static_cast<size_t>(m * k), 0.25), acc2 = acc1;
    ko::acc_matmul_nt(o1.data(), b.data(), acc1.data(), m, n, k);
    ks::acc_matmul_nt(o2.data(), b.data(), acc2.data(), m, n, k);
    CHECK(bits_equal(acc1, acc2));

    std::vector<double> bcc1(static_cast<size_t>(k * n), -1.0), bcc2 = bcc1;
    ko::acc_matmul_tn(a.data(), o1.data(), bcc1.data(), m, k, n);
    ks::acc_matmul_tn(a.data(), o2.data(), bcc2.data(), m, k, n);
    CHECK(bits_equal(bcc1, bcc2));

    std::vector<double> t1(static_cast<size_t>(m * k)), t2(static_cast<size_t>(m * k));
    ko::transpose(a.data(), t1.data(), m, k);
    ks::transpose(a.data(), t2.data(), m, k);
    CHECK(bits_equal(t1, t2));
}

TEST_CASE("strided reductions match bitwise, all kinds") {
    CounterRng rng(13);
    // shape (6, 35, 11), reduce the middle axis
    const int64_t d0 = 6, d1 = 35, d2 = 11;
    std::vector<double> x = rng.gaussian_vec(static_cast<size_t>(d0 * d1 * d2));
    const int64_t kept_sizes[] = {d0, d2};
    const int64_t kept_strides[] = {d1 * d2, 1};
    const int64_t red_sizes[] = {d1};
    const int64_t red_strides[] = {d2};
    const int64_t out_n = d0 * d2;
    for (ReduceKind kind :
         {ReduceKind::sum, ReduceKind::mean, ReduceKind::var, ReduceKind::max}) {
        std::vector<double> o1(static_cast<size_t>(out_n)), o2(static_cast<size_t>(out_n));
        std::vector<double> m1(static_cast<size_t>(out_n)), m2(static_cast<size_t>(out_n));
        ko::reduce(kind, x.data(), o1.data(), m1.data(), kept_sizes, kept_strides, 2, red_sizes,
                   red_strides, 1, out_n, d1);
        ks::reduce(kind, x.data(), o2.data(), m2.data(), kept_sizes, kept_strides, 2, red_sizes,
                   red_strides, 1, out_n, d1);
        CHECK(bits_equal(o1, o2));
        if (kind == ReduceKind::var) CHECK(bits_equal(m1, m2));
    }

    std::vector<double> g = rng.gaussian_vec(static_cast<size_t>(out_n));
    std::vector<double> dx1(x.size(), 0.125), dx2 = dx1;
    ko::reduce_meansum_backward(g.data(), dx1.data(), 0.5, kept_sizes, kept_strides, 2,
                                red_sizes, red_strides, 1, out_n, d1);
    ks::reduce_meansum_backward(g.data(), dx2.data(), 0.5, kept_sizes, kept_strides, 2,
                                red_sizes, red_strides, 1, out_n, d1);
    CHECK(bits_equal(dx1, dx2));
}

TEST_CASE("softmax, expand, pad, cross-entropy match bitwise") {
    CounterRng rng(17);
    const int64_t outer = 9, len = 21, inner = 5;
    std::vector<double> x = rng.gaussian_vec(static_cast<size_t>(outer * len * inner));
    std::vector<double> o1(x.size()), o2(x.size());
    ko::softmax(x.data(), o1.data(), outer, len, inner);
    ks::softmax(x.data(), o2.data(), outer, len, inner);
    CHECK(bits_equal(o1, o2));

    std::vector<double> e1(static_cast<size_t>(outer * 4 * len * inner)), e2(e1.size());
    ko::expand_fwd(x.data(), e1.data(), outer, 4, len * inner);
    ks::expand_fwd(x.data(), e2.data(), outer, 4, len * inner);
    CHECK(bits_equal(e1, e2));

    const int64_t rows = 33, cols = 6;
    std::vector<double> logits = rng.gaussian_vec(static_cast<size_t>(rows * cols));
    std::vector<int> labels(static_cast<size_t>(rows));
    for (auto& y : labels) y = static_cast<int>(rng.next_below(cols));
    std::vector<double> p1(logits.size()), p2(logits.size());
    const double l1 = ko::cross_entropy_fwd(logits.data(), rows, cols, labels.data(), p1.data());
    const double l2 = ks::cross_entropy_fwd(logits.data(), rows, cols, labels.data(), p2.data());
    CHECK(l1 == l2);
    CHECK(bits_equal(p1, p2));

    std::vector<double> pd1(static_cast<size_t>(rows * (cols + 5))), pd2(pd1.size());
    ko::pad_last_fwd(logits.data(), pd1.data(), rows, cols, 2, 3);
    ks::pad_last_fwd(logits.data(), pd2.data(), rows, cols, 2, 3);
    CHECK(bits_equal(pd1, pd2));
}

TEST_CASE("results are identical across thread counts") {
    CounterRng rng(23);
    const int64_t n = 200001;
    std::vector<double> a = rng.gaussian_vec(static_cast<size_t>(n));
    std::vector<double> b = rng.gaussian_vec(static_cast<size_t>(n));
    std::vector<double> o1(static_cast<size_t>(n)), o2(static_cast<size_t>(n));
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    ko::ew_mul(a.data(), b.data(), o1.data(), n);
    omp_set_num_threads(saved > 1 ? saved : 2);
    ko::ew_mul(a.data(), b.data(), o2.data(), n);
    omp_set_num_threads(saved);
    CHECK(bits_equal(o1, o2));
}

}  // TEST_SUITE
