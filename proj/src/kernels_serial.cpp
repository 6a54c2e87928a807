// Plain-loop reference implementations of the batch kernels. Kept separate
// from the OpenMP path so tests can compare the two bitwise and the
// benchmark target can time them against each other.

#include "reliatta/kernels.hpp"

namespace reliatta::serial {

void batch_matvec(const Mat& m, const std::vector<Vec>& xs, std::vector<Vec>& ys) {
    const int n = static_cast<int>(xs.size());
    ys.resize(n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(xs[i].size()) != m.cols) {
            throw DimensionError("batch_matvec: input length mismatch");
        }
        Vec& y = ys[i];
        y.assign(m.rows, 0.0);
        for (int r = 0; r < m.rows; ++r) {
            double s = 0.0;
            for (int c = 0; c < m.cols; ++c) s += m.at(r, c) * xs[i][c];
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
    for (Vec& e : es) {
        for (int r = 0; r < a.rows; ++r) e[r] += b[r];
    }
}

void accumulate_outer(const std::vector<Vec>& gs, const std::vector<Vec>& hs, Mat& acc) {
    if (hs.size() != gs.size()) {
        throw DimensionError("accumulate_outer: batch size mismatch");
    }
    const int n = static_cast<int>(gs.size());
    for (int r = 0; r < acc.rows; ++r) {
        for (int c = 0; c < acc.cols; ++c) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += gs[i][r] * hs[i][c];
            acc.at(r, c) += s;
        }
    }
}

void accumulate_sum(const std::vector<Vec>& gs, Vec& acc) {
    const int n = static_cast<int>(gs.size());
    for (int r = 0; r < static_cast<int>(acc.size()); ++r) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += gs[i][r];
        acc[r] += s;
    }
}

void for_each_sample(int n, const std::function<void(int)>& fn) {
    for (int i = 0; i < n; ++i) fn(i);
}

}  // namespace reliatta::serial
