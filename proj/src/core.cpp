#include "reliatta/core.hpp"

#include <algorithm>
#include <cmath>

namespace reliatta {

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void ensure_finite(std::span<const double> v, const char* what) {
    if (!all_finite(v)) {
        throw NumericError(std::string("non-finite values in ") + what);
    }
}

void ensure_finite(double x, const char* what) {
    if (!std::isfinite(x)) {
        throw NumericError(std::string("non-finite value in ") + what);
    }
}

Vec softmax(std::span<const double> v) {
    if (v.empty()) throw DimensionError("softmax: empty input");
    ensure_finite(v, "softmax input");
    const double m = *std::max_element(v.begin(), v.end());
    Vec out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

Vec l2_normalize(std::span<const double> v) {
    ensure_finite(v, "l2_normalize input");
    const double n = l2_norm(v);
    if (n <= kNormEpsilon) {
        throw DegenerateEmbeddingError("l2_normalize: norm below 1e-12");
    }
    Vec out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

int argmax(std::span<const double> v) {
    if (v.empty()) throw DimensionError("argmax: empty input");
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

double check_gradient(const std::function<double()>& loss,
                      std::span<ParameterBlock* const> blocks,
                      double eps) {
    if (eps < 1e-7 || eps > 1e-4) {
        throw std::invalid_argument("check_gradient: eps must be in [1e-7, 1e-4]");
    }
    double max_rel = 0.0;
    for (ParameterBlock* block : blocks) {
        if (!block->trainable) continue;
        for (std::size_t i = 0; i < block->size(); ++i) {
            const double saved = block->value[i];
            block->value[i] = saved + eps;
            const double f_plus = loss();
            block->value[i] = saved - eps;
            const double f_minus = loss();
            block->value[i] = saved;
            ensure_finite(f_plus, "check_gradient loss");
            ensure_finite(f_minus, "check_gradient loss");
            const double g_central = (f_plus - f_minus) / (2.0 * eps);
            const double g_analytic = block->grad[i];
            const double rel =
                std::abs(g_analytic - g_central) / std::max(1.0, std::abs(g_central));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace reliatta
