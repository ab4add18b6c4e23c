// Throughput comparison of the OpenMP kernels against the serial
// reference, plus a bitwise equality check at each size. Not part of the
// test suite; build target varlab_bench.

#include <omp.h>

#include <chrono>
#include <tuple>
#include <cstdio>
#include <cstring>

#include "varlab/kernels.hpp"
#include "varlab/rng.hpp"

using namespace varlab;

namespace {

Tensor random_tensor(const std::vector<int>& shape, RngStream& s) {
    Tensor t(shape);
    for (float& v : t.data) v = gaussian(s);
    return t;
}

template <typename F>
double time_ms(F&& fn, int reps) {
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto end = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(end - start).count() / reps;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape &&
           std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

int main() {
    RngStream s{1};
    std::printf("threads available: %d\n\n", omp_get_max_threads());

    std::printf("%-28s %10s %10s %8s %8s\n", "kernel", "serial ms", "omp ms", "speedup",
                "bitwise");
    for (const auto& dims :
         {std::tuple{64, 256, 256, 50}, {256, 256, 256, 20}, {512, 512, 512, 5}}) {
        const int m = std::get<0>(dims), k = std::get<1>(dims), n = std::get<2>(dims);
        const int reps = std::get<3>(dims);
        const Tensor a = random_tensor({m, k}, s);
        const Tensor b = random_tensor({n, k}, s);
        Tensor out_serial, out_parallel;
        const double serial =
            time_ms([&] { out_serial = kernels::ref::matmul_nt(a, b); }, reps);
        const double parallel = time_ms([&] { out_parallel = kernels::matmul_nt(a, b); }, reps);
        char name[64];
        std::snprintf(name, sizeof name, "matmul_nt %dx%dx%d", m, k, n);
        std::printf("%-28s %10.3f %10.3f %7.2fx %8s\n", name, serial, parallel,
                    serial / parallel, bitwise_equal(out_serial, out_parallel) ? "ok" : "FAIL");
    }

    {
        const int batch = 16, c = 8, hw = 16, oc = 16, reps = 20;
        const Tensor in = random_tensor({batch, c, hw, hw}, s);
        const Tensor w = random_tensor({oc, c, 3, 3}, s);
        const Tensor bias = random_tensor({oc}, s);
        Tensor out_serial, out_parallel;
        const double serial =
            time_ms([&] { out_serial = kernels::ref::conv2d_forward(in, w, bias, 1); }, reps);
        const double parallel =
            time_ms([&] { out_parallel = kernels::conv2d_forward(in, w, bias, 1); }, reps);
        char name[64];
        std::snprintf(name, sizeof name, "conv2d %dx%dx%dx%d oc%d", batch, c, hw, hw, oc);
        std::printf("%-28s %10.3f %10.3f %7.2fx %8s\n", name, serial, parallel,
                    serial / parallel, bitwise_equal(out_serial, out_parallel) ? "ok" : "FAIL");

        const Tensor gout = random_tensor({batch, oc, hw, hw}, s);
        kernels::Conv2dGrads gs, gp;
        const double bserial =
            time_ms([&] { gs = kernels::ref::conv2d_backward(in, w, gout, 1); }, reps);
        const double bparallel =
            time_ms([&] { gp = kernels::conv2d_backward(in, w, gout, 1); }, reps);
        std::snprintf(name, sizeof name, "conv2d_backward");
        const bool same = bitwise_equal(gs.input, gp.input) &&
                          bitwise_equal(gs.weight, gp.weight) && bitwise_equal(gs.bias, gp.bias);
        std::printf("%-28s %10.3f %10.3f %7.2fx %8s\n", name, bserial, bparallel,
                    bserial / bparallel, same ? "ok" : "FAIL");
    }
    return 0;
}
