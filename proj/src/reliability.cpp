#include "reliatta/reliability.hpp"

#include <cmath>

namespace reliatta {

double AffinityHead::temperature() const {
    const double t = std::exp(log_temp.value[0]);
    ensure_finite(t, "affinity temperature");
    return t;
}

Vec affinity_vector(std::span<const double> e, const AffinityHead& head,
                    bool normalize_labels) {
    if (static_cast<int>(e.size()) != head.dim()) {
        throw DimensionError("affinity_vector: embedding dimension != label columns");
    }
    const double scale = head.temperature();
    const int k = head.num_classes();
    Vec a(k, 0.0);
    for (int j = 0; j < k; ++j) {
        auto row = head.labels.row(j);
        double d;
        if (normalize_labels) {
            const Vec unit = l2_normalize(row);
            d = dot(unit, e);
        } else {
            d = dot(row, e);
        }
        a[j] = scale * d;
    }
    ensure_finite(a, "affinity vector");
    return a;
}

double confidence(std::span<const double> a) {
    const Vec p = softmax(a);
    double best = p[0];
    for (double x : p) {
        if (x > best) best = x;
    }
    return best;
}

double prediction_uncertainty(std::span<const double> a) {
    if (a.size() < 2) throw DimensionError("prediction_uncertainty: need K >= 2");
    const Vec p = softmax(a);
    double h = 0.0;
    for (double x : p) {
        if (x > 0.0) h -= x * std::log(x);  // x log x -> 0 as x -> 0
    }
    // Clamp the tiny negative values rounding can produce near one-hot.
    return h < 0.0 ? 0.0 : h;
}

double confidence_variation(std::span<const double> a, std::span<const double> a_pert) {
    if (a.size() != a_pert.size()) {
        throw DimensionError("confidence_variation: length mismatch");
    }
    return confidence(a) - confidence(a_pert);
}

ThresholdPair dynamic_thresholds(std::span<const double> u, std::span<const double> v,
                                 double alpha) {
    if (u.empty() || u.size() != v.size()) {
        throw DimensionError("dynamic_thresholds: empty batch or length mismatch");
    }
    if (alpha < 0.0) throw std::invalid_argument("dynamic_thresholds: alpha must be >= 0");
    const double n = static_cast<double>(u.size());
    ThresholdPair t;
    for (double x : u) t.mu_u += x;
    for (double x : v) t.mu_v += x;
    t.mu_u /= n;
    t.mu_v /= n;
    double su = 0.0, sv = 0.0;
    for (double x : u) su += (x - t.mu_u) * (x - t.mu_u);
    for (double x : v) sv += (x - t.mu_v) * (x - t.mu_v);
    // Population standard deviation: these are batch statistics, not an
    // estimator, and n = 1 must give sigma = 0.
    t.sigma_u = std::sqrt(su / n);
    t.sigma_v = std::sqrt(sv / n);
    t.zeta_u = t.mu_u + alpha * t.sigma_u;
    t.zeta_v = t.mu_v - alpha * t.sigma_v;
    return t;
}

MaskResult reliability_masks(std::span<const double> u_v, std::span<const double> v_v,
                             std::span<const double> u_t, std::span<const double> v_t,
                             const ThresholdPair& vision, const ThresholdPair& touch) {
    const std::size_t n = u_v.size();
    if (v_v.size() != n || u_t.size() != n || v_t.size() != n) {
        throw DimensionError("reliability_masks: indicator list length mismatch");
    }
    MaskResult out;
    out.masks.resize(n);
    int nv = 0, nt = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ReliabilityMask& m = out.masks[i];
        m.vision = (u_v[i] < vision.zeta_u && v_v[i] > vision.zeta_v) ? 1 : 0;
        m.touch = (u_t[i] < touch.zeta_u && v_t[i] > touch.zeta_v) ? 1 : 0;
        m.global = static_cast<std::uint8_t>(m.vision * m.touch);
        nv += m.vision;
        nt += m.touch;
        if (m.global) out.reliable.push_back(static_cast<int>(i));
    }
    out.rate_vision = n ? static_cast<double>(nv) / static_cast<double>(n) : 0.0;
    out.rate_touch = n ? static_cast<double>(nt) / static_cast<double>(n) : 0.0;
    return out;
}

RobustnessVector robustness_vector(double v_t, double u_t, double v_v, double u_v) {
    RobustnessVector rv;
    rv.r = {v_t, u_t, v_v, u_v};
    ensure_finite(rv.r, "robustness vector");
    return rv;
}

}  // namespace reliatta
