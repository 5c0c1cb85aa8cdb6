// Compares the serial reference kernels against the OpenMP variants on the
// shapes the pipeline actually runs: GRU-sized matvecs, outer-product
// accumulation, batched window DFTs and the 200-lag ACF.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "steerid/dft.hpp"
#include "steerid/kernels.hpp"
#include "steerid/rng.hpp"
#include "steerid/stationarity.hpp"

using namespace steerid;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_per_call(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto start = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const std::chrono::duration<double> elapsed = Clock::now() - start;
    return elapsed.count() / reps;
}

void report_row(const std::string& name, double serial_s, double parallel_s) {
    std::printf("%-28s %10.3f us %10.3f us %8.2fx\n", name.c_str(), serial_s * 1e6, parallel_s * 1e6,
                serial_s / parallel_s);
}

}  // namespace

int main(int argc, char** argv) {
    const int threads = argc > 1 ? std::atoi(argv[1]) : 4;
    Rng rng(42);

    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "omp", "speedup");

    {
        const std::size_t n = 512;
        Matrix a(n, n);
        for (double& v : a.data) v = rng.uniform(-1, 1);
        std::vector<double> x(n), y(n);
        for (double& v : x) v = rng.uniform(-1, 1);

        kernels::set_max_threads(threads);
        const double ser = seconds_per_call([&] { kernels::serial::matvec(a, x, y); }, 2000);
        const double par = seconds_per_call([&] { kernels::par::matvec(a, x, y); }, 2000);
        report_row("matvec 512x512", ser, par);

        const double ser_t = seconds_per_call([&] { kernels::serial::matvec_t(a, x, y); }, 2000);
        const double par_t = seconds_per_call([&] { kernels::par::matvec_t(a, x, y); }, 2000);
        report_row("matvec_t 512x512", ser_t, par_t);

        const double ser_o = seconds_per_call([&] { kernels::serial::add_outer(a, x, x); }, 2000);
        const double par_o = seconds_per_call([&] { kernels::par::add_outer(a, x, x); }, 2000);
        report_row("add_outer 512x512", ser_o, par_o);
    }

    {
        // one 15-minute segment of 3.5 s windows
        const std::size_t w = 35, n_windows = 252;
        DftPlan plan(w);
        std::vector<double> window(w), mags(w);
        for (double& v : window) v = rng.uniform(-30, 30);

        auto batch = [&](bool parallel) {
            kernels::set_max_threads(parallel ? threads : 1);
            const auto count = static_cast<std::int64_t>(n_windows);
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
            for (std::int64_t i = 0; i < count; ++i) {
                std::vector<double> out(w);
                plan.magnitude(window, out);
            }
        };
        const double ser = seconds_per_call([&] { batch(false); }, 200);
        const double par = seconds_per_call([&] { batch(true); }, 200);
        report_row("dft batch 252x35", ser, par);
    }

    {
        std::vector<double> series(18000);
        double prev = 0.0;
        for (double& v : series) {
            prev = 0.9 * prev + rng.normal();
            v = prev;
        }
        kernels::set_max_threads(1);
        const double ser = seconds_per_call([&] { acf(series, kAcfMaxLag); }, 20);
        kernels::set_max_threads(threads);
        const double par = seconds_per_call([&] { acf(series, kAcfMaxLag); }, 20);
        report_row("acf 18000x200", ser, par);
    }

    return 0;
}
