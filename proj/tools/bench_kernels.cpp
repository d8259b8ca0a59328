// Compares the OpenMP kernels against the serial reference implementations
// on the matrix shapes the network actually runs: the five conv-block GEMMs
// on a 1x128x128 input, the im2col/col2im pair, and the dense matvecs.
// Reports time, GFLOP/s, speedup, and the max |parallel - serial| gap.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cacnet/kernels.hpp"
#include "cacnet/rng.hpp"

using namespace cacnet;

namespace {

using Clock = std::chrono::steady_clock;

TensorF random_tensor(const std::vector<std::size_t>& shape, Rng& rng) {
    TensorF t(shape);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

double seconds_per_call(const std::function<TensorF()>& fn, double budget_s, TensorF* last = nullptr) {
    // One warm-up call, then as many timed reps as fit the budget.
    TensorF out = fn();
    std::size_t reps = 0;
    const auto start = Clock::now();
    double elapsed = 0.0;
    do {
        out = fn();
        ++reps;
        elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    } while (elapsed < budget_s);
    if (last) *last = std::move(out);
    return elapsed / static_cast<double>(reps);
}

float max_abs_diff(const TensorF& a, const TensorF& b) {
    float worst = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

struct Row {
    std::string name;
    double flops = 0.0;
    double par_s = 0.0;
    double ref_s = 0.0;
    float gap = 0.0f;
};

void report(const std::vector<Row>& rows) {
    std::printf("\n%-26s %12s %12s %10s %9s %10s\n", "kernel", "parallel", "serial", "GFLOP/s", "speedup",
                "max diff");
    for (const Row& r : rows) {
        const double gflops = r.flops > 0.0 ? r.flops / r.par_s / 1e9 : 0.0;
        std::printf("%-26s %10.3f ms %10.3f ms %10.2f %8.2fx %10.2e\n", r.name.c_str(), r.par_s * 1e3,
                    r.ref_s * 1e3, gflops, r.ref_s / r.par_s, static_cast<double>(r.gap));
    }
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled; parallel kernels run serially\n");
#endif

    Rng rng = make_rng(42);
    std::vector<Row> rows;
    const double budget = 0.5;

    // Conv-block GEMMs: filters x (channels*9) times (channels*9) x (h*w).
    const std::size_t filters[5] = {32, 64, 128, 256, 512};
    std::size_t ch = 1, hw = 128 * 128;
    for (int blk = 0; blk < 5; ++blk) {
        const std::size_t m = filters[blk], k = ch * 9, n = hw;
        TensorF a = random_tensor({m, k}, rng);
        TensorF b = random_tensor({k, n}, rng);
        Row row;
        row.name = "conv" + std::to_string(blk + 1) + " gemm " + std::to_string(m) + "x" + std::to_string(k) +
                   "x" + std::to_string(n);
        row.flops = 2.0 * static_cast<double>(m) * static_cast<double>(k) * static_cast<double>(n);
        TensorF par_out, ref_out;
        row.par_s = seconds_per_call([&] { return matmul(a, b); }, budget, &par_out);
        row.ref_s = seconds_per_call([&] { return ref::matmul(a, b); }, budget, &ref_out);
        row.gap = max_abs_diff(par_out, ref_out);
        rows.push_back(row);
        ch = filters[blk];
        hw /= 4;
    }

    // im2col / col2im on the second block's geometry (32 channels, 64x64).
    {
        ConvGeometry g;
        g.channels = 32;
        g.height = g.width = 64;
        g.kernel_h = g.kernel_w = 3;
        g.stride_h = g.stride_w = 1;
        g.pad_h = g.pad_w = 1;
        TensorF img = random_tensor({g.channels, g.height, g.width}, rng);
        TensorF cols = im2col(img, g);
        Row ri;
        ri.name = "im2col 32x64x64";
        TensorF par_out, ref_out;
        ri.par_s = seconds_per_call([&] { return im2col(img, g); }, budget, &par_out);
        ri.ref_s = seconds_per_call([&] { return ref::im2col(img, g); }, budget, &ref_out);
        ri.gap = max_abs_diff(par_out, ref_out);
        rows.push_back(ri);
        Row rc;
        rc.name = "col2im 32x64x64";
        rc.par_s = seconds_per_call([&] { return col2im(cols, g); }, budget, &par_out);
        rc.ref_s = seconds_per_call([&] { return ref::col2im(cols, g); }, budget, &ref_out);
        rc.gap = max_abs_diff(par_out, ref_out);
        rows.push_back(rc);
    }

    // Dense layer matvec and its transpose (8192 -> 512).
    {
        TensorF w = random_tensor({512, 8192}, rng);
        TensorF x = random_tensor({8192}, rng);
        TensorF y = random_tensor({512}, rng);
        Row rv;
        rv.name = "dense matvec 512x8192";
        rv.flops = 2.0 * 512 * 8192;
        TensorF par_out, ref_out;
        rv.par_s = seconds_per_call([&] { return matvec(w, x); }, budget, &par_out);
        rv.ref_s = seconds_per_call([&] { return ref::matvec(w, x); }, budget, &ref_out);
        rv.gap = max_abs_diff(par_out, ref_out);
        rows.push_back(rv);
        Row rt;
        rt.name = "dense matvec_t 512x8192";
        rt.flops = 2.0 * 512 * 8192;
        rt.par_s = seconds_per_call([&] { return matvec_t(w, y); }, budget, &par_out);
        rt.ref_s = seconds_per_call([&] { return ref::matvec_t(w, y); }, budget, &ref_out);
        rt.gap = max_abs_diff(par_out, ref_out);
        rows.push_back(rt);
    }

    report(rows);
    return 0;
}
