#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <omp.h>

#include "mmfuse/kernels.hpp"
#include "mmfuse/rng.hpp"

// Times each kernel against its serial reference. The parallel kernels are
// bit-identical to the serial ones by construction, so this only reports
// wall-clock differences.

namespace {

using mmfuse::CounterRng;
namespace ko = mmfuse::kernels;
namespace ks = mmfuse::kernels_serial;

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warmup
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const std::string& name, double serial_ms, double omp_ms) {
    std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %.2fx\n", name.c_str(),
                serial_ms, omp_ms, serial_ms / omp_ms);
}

}  // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());
    CounterRng rng(42);

    {
        const int64_t n = 1 << 22;
        std::vector<double> a = rng.gaussian_vec(n), b = rng.gaussian_vec(n), out(n);
        report("ew_mul 4M",
               time_ms([&] { ks::ew_mul(a.data(), b.data(), out.data(), n); }, 20),
               time_ms([&] { ko::ew_mul(a.data(), b.data(), out.data(), n); }, 20));
        report("sigmoid 4M",
               time_ms([&] { ks::sigmoid(a.data(), out.data(), n); }, 10),
               time_ms([&] { ko::sigmoid(a.data(), out.data(), n); }, 10));
    }
    {
        const int64_t m = 384, k = 384, n = 384;
        std::vector<double> a = rng.gaussian_vec(m * k), b = rng.gaussian_vec(k * n),
                            out(m * n);
        report("matmul 384^3",
               time_ms([&] { ks::matmul(a.data(), b.data(), out.data(), m, k, n); }, 5),
               time_ms([&] { ko::matmul(a.data(), b.data(), out.data(), m, k, n); }, 5));
        std::vector<double> acc(m * k, 0.0);
        report("acc_matmul_nt 384^3",
               time_ms([&] { ks::acc_matmul_nt(out.data(), b.data(), acc.data(), m, n, k); }, 5),
               time_ms([&] { ko::acc_matmul_nt(out.data(), b.data(), acc.data(), m, n, k); }, 5));
    }
    {
        // grouped mean over the last axis, the energy-map hot path
        const int64_t groups = 1 << 15, width = 128;
        std::vector<double> x = rng.gaussian_vec(groups * width), out(groups);
        const int64_t kept_sizes[] = {groups};
        const int64_t kept_strides[] = {width};
        const int64_t red_sizes[] = {width};
        const int64_t red_strides[] = {1};
        auto run = [&](auto reduce_fn) {
            reduce_fn(mmfuse::ReduceKind::var, x.data(), out.data(), nullptr, kept_sizes,
                      kept_strides, 1, red_sizes, red_strides, 1, groups, width);
        };
        report("reduce_var 32k x 128",
               time_ms([&] { run(ks::reduce); }, 10), time_ms([&] { run(ko::reduce); }, 10));
    }
    {
        const int64_t outer = 1 << 15, rep = 128;
        std::vector<double> x = rng.gaussian_vec(outer), out(outer * rep);
        report("expand 32k x 128",
               time_ms([&] { ks::expand_fwd(x.data(), out.data(), outer, rep, 1); }, 10),
               time_ms([&] { ko::expand_fwd(x.data(), out.data(), outer, rep, 1); }, 10));
    }
    {
        const int64_t rows = 1 << 14, cols = 309;
        std::vector<double> x = rng.gaussian_vec(rows * cols), out(rows * cols);
        report("softmax 16k x 309",
               time_ms([&] { ks::softmax(x.data(), out.data(), rows, cols, 1); }, 10),
               time_ms([&] { ko::softmax(x.data(), out.data(), rows, cols, 1); }, 10));
    }
    return 0;
}
