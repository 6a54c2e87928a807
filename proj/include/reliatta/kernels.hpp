#pragma once
// Batch kernels for the per-sample hot loops. `kernels::` is the OpenMP
// path used by the pipeline; `serial::` is a plain-loop reference kept for
// testing and benchmarking. Both sum in the same index order, so outputs are
// bitwise identical regardless of thread count: parallelism is only ever
// over independent output slots, never over a reduction.

#include <vector>

#include "reliatta/core.hpp"

namespace reliatta::kernels {

// ys[i] = m * xs[i] for every sample. xs entries must have length m.cols.
void batch_matvec(const Mat& m, const std::vector<Vec>& xs, std::vector<Vec>& ys);

// es[i] = a * hs[i] + b.
void batch_affine(const Mat& a, const Vec& b, const std::vector<Vec>& hs,
                  std::vector<Vec>& es);

// acc(r,c) += sum_i gs[i][r] * hs[i][c]. The sample sum runs serially inside
// each output entry.
void accumulate_outer(const std::vector<Vec>& gs, const std::vector<Vec>& hs, Mat& acc);

// acc[r] += sum_i gs[i][r].
void accumulate_sum(const std::vector<Vec>& gs, Vec& acc);

// Runs fn(i) for i in [0, n). fn must write only to sample-i slots.
void for_each_sample(int n, const std::function<void(int)>& fn);

}  // namespace reliatta::kernels

namespace reliatta::serial {

void batch_matvec(const Mat& m, const std::vector<Vec>& xs, std::vector<Vec>& ys);
void batch_affine(const Mat& a, const Vec& b, const std::vector<Vec>& hs,
                  std::vector<Vec>& es);
void accumulate_outer(const std::vector<Vec>& gs, const std::vector<Vec>& hs, Mat& acc);
void accumulate_sum(const std::vector<Vec>& gs, Vec& acc);
void for_each_sample(int n, const std::function<void(int)>& fn);

}  // namespace reliatta::serial
