#include "reliatta/kernels.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace reliatta::kernels {

namespace {
// Parallelizing tiny batches costs more than it saves.
constexpr long kParallelThreshold = 1 << 12;
}  // namespace

void batch_matvec(const Mat& m, const std::vector<Vec>& xs, std::vector<Vec>& ys) {
    const int n = static_cast<int>(xs.size());
    const int rows = m.rows;
    const int cols = m.cols;
    for (const Vec& x : xs) {
        if (static_cast<int>(x.size()) != cols) {
            throw DimensionError("batch_matvec: input length mismatch");
        }
    }
    ys.resize(n);
    const long work = static_cast<long>(n) * rows * cols;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
    for (int i = 0; i < n; ++i) {
        Vec& y = ys[i];
        y.assign(rows, 0.0);
        const double* x = xs[i].data();
        for (int r = 0; r < rows; ++r) {
            const double* mr = m.data.data() + static_cast<std::size_t>(r) * cols;
            double s = 0.0;
            for (int c = 0; c < cols; ++c) s += mr[c] * x[c];
            y[r] = s;
        }
    }
}

void batch_affine(const Mat& a, const Vec& b, const std::vector<Vec>& hs,
                  std::vector<Vec>& es) {
    if (static_cast<int>(b.size()) != a.rows) {
        throw DimensionError("batch_affine: bias length mismatch");
    }
    batch_matvec(a, hs, es);
    const int n = static_cast<int>(es.size());
    const long work = static_cast<long>(n) * a.rows;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < a.rows; ++r) es[i][r] += b[r];
    }
}

void accumulate_outer(const std::vector<Vec>& gs, const std::vector<Vec>& hs, Mat& acc) {
    const int n = static_cast<int>(gs.size());
    if (hs.size() != gs.size()) {
        throw DimensionError("accumulate_outer: batch size mismatch");
    }
    const int rows = acc.rows;
    const int cols = acc.cols;
    const long work = static_cast<long>(n) * rows * cols;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
    for (int r = 0; r < rows; ++r) {
        double* out = acc.data.data() + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += gs[i][r] * hs[i][c];
            out[c] += s;
        }
    }
}

void accumulate_sum(const std::vector<Vec>& gs, Vec& acc) {
    const int n = static_cast<int>(gs.size());
    const int rows = static_cast<int>(acc.size());
    const long work = static_cast<long>(n) * rows;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
    for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += gs[i][r];
        acc[r] += s;
    }
}

void for_each_sample(int n, const std::function<void(int)>& fn) {
#pragma omp parallel for schedule(static) if (n > 1)
    for (int i = 0; i < n; ++i) fn(i);
}

}  // namespace reliatta::kernels
