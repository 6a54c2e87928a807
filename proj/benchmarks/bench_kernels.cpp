// Times the OpenMP batch kernels against the serial reference and checks
// that the two agree bitwise, then times a full adaptation step at a few
// batch sizes. Usage: reliatta_bench [repeats]

#include <chrono>
#include <cstdio>
#include <cstring>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "reliatta/harness.hpp"
#include "reliatta/kernels.hpp"
#include "reliatta/rng.hpp"

using namespace reliatta;

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::vector<Vec> random_batch(int n, int dim, Pcg32& rng) {
    std::vector<Vec> out(n);
    for (Vec& v : out) {
        v.resize(dim);
        for (double& x : v) x = rng.next_normal();
    }
    return out;
}

bool bitwise_equal(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        if (std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

template <typename F>
double time_best_of(int repeats, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const double t0 = now_seconds();
        fn();
        best = std::min(best, now_seconds() - t0);
    }
    return best;
}

void bench_matvec(int repeats) {
    std::printf("\nbatch_matvec (rows x cols, batch)  serial      openmp      speedup  match\n");
    for (const auto& [rows, cols, batch] : {std::tuple{32, 256, 64},
                                            std::tuple{128, 1024, 256},
                                            std::tuple{256, 4096, 512}}) {
        Pcg32 rng = make_stream(7, Purpose::Test, rows, batch);
        Mat m(rows, cols);
        for (double& x : m.data) x = rng.next_normal();
        const std::vector<Vec> xs = random_batch(batch, cols, rng);
        std::vector<Vec> ys_serial, ys_omp;
        const double t_serial =
            time_best_of(repeats, [&] { serial::batch_matvec(m, xs, ys_serial); });
        const double t_omp =
            time_best_of(repeats, [&] { kernels::batch_matvec(m, xs, ys_omp); });
        std::printf("  %4dx%-5d b=%-4d             %9.3fms %9.3fms %7.2fx  %s\n", rows,
                    cols, batch, 1e3 * t_serial, 1e3 * t_omp, t_serial / t_omp,
                    bitwise_equal(ys_serial, ys_omp) ? "yes" : "NO");
    }
}

void bench_outer(int repeats) {
    std::printf("\naccumulate_outer (dim, batch)      serial      openmp      speedup  match\n");
    for (const auto& [dim, batch] : {std::pair{32, 64}, std::pair{128, 512},
                                     std::pair{256, 1024}}) {
        Pcg32 rng = make_stream(11, Purpose::Test, dim, batch);
        const std::vector<Vec> gs = random_batch(batch, dim, rng);
        const std::vector<Vec> hs = random_batch(batch, dim, rng);
        Mat acc_serial(dim, dim), acc_omp(dim, dim);
        const double t_serial = time_best_of(repeats, [&] {
            std::fill(acc_serial.data.begin(), acc_serial.data.end(), 0.0);
            serial::accumulate_outer(gs, hs, acc_serial);
        });
        const double t_omp = time_best_of(repeats, [&] {
            std::fill(acc_omp.data.begin(), acc_omp.data.end(), 0.0);
            kernels::accumulate_outer(gs, hs, acc_omp);
        });
        const bool match = std::memcmp(acc_serial.data.data(), acc_omp.data.data(),
                                       acc_serial.data.size() * sizeof(double)) == 0;
        std::printf("  d=%-4d b=%-5d                  %9.3fms %9.3fms %7.2fx  %s\n", dim,
                    batch, 1e3 * t_serial, 1e3 * t_omp, t_serial / t_omp,
                    match ? "yes" : "NO");
    }
}

void bench_adapt_step(int repeats) {
    std::printf("\nadapt_step end to end (K=10, D=32, 16x16 inputs)\n");
    for (int batch_size : {64, 256}) {
        ScenarioSpec spec;
        spec.num_classes = 10;
        spec.dim = 32;
        spec.seed = 21;
        spec.batch_size = batch_size;
        Phase phase;
        phase.corrupted = Modality::Touch;
        phase.kind = CorruptionKind::GaussianNoise;
        phase.severity = 3;
        phase.batches = 4;
        spec.phases = {phase};
        ScenarioStream stream(spec);

        HyperParams hp;
        hp.lr = 1e-4;
        hp.batch_size = batch_size;
        AdaptationState state(stream.prototypes().labels, spec.dim, hp, 99);

        auto batch = stream.make_batch(0);
        EncodedBatch encoded = stream.encode(*batch);
        const double t_gen = time_best_of(repeats, [&] {
            auto b = stream.make_batch(1);
            encoded = stream.encode(*b);
        });
        const double t_step =
            time_best_of(repeats, [&] { adapt_step(state, encoded); });
        std::printf("  B=%-4d generate+encode %8.3fms   adapt_step %8.3fms\n", batch_size,
                    1e3 * t_gen, 1e3 * t_step);
    }
}

}  // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
#if defined(_OPENMP)
    std::printf("openmp: %d threads\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled at build time\n");
#endif
    bench_matvec(repeats);
    bench_outer(repeats);
    bench_adapt_step(repeats);
    return 0;
}
