#include "reliatta/losses.hpp"

#include <cmath>

namespace reliatta {

namespace {

void require_reliable(const std::vector<int>& reliable, const std::vector<Vec>& aff,
                      const char* what) {
    if (reliable.empty()) {
        throw EmptyReliableSetError(std::string(what) + ": empty reliable set");
    }
    for (int i : reliable) {
        if (i < 0 || i >= static_cast<int>(aff.size())) {
            throw DimensionError(std::string(what) + ": reliable index out of range");
        }
    }
}

int max_index(const Vec& p) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(p.size()); ++j) {
        if (p[j] > p[best]) best = j;
    }
    return best;
}

}  // namespace

double loss_confidence_regularized(const std::vector<Vec>& affinities,
                                   const std::vector<int>& reliable, double gamma,
                                   std::vector<Vec>* grad_aff, double weight) {
    require_reliable(reliable, affinities, "loss_confidence_regularized");
    const double inv_s = 1.0 / static_cast<double>(reliable.size());
    double total = 0.0;
    for (int i : reliable) {
        const Vec p = softmax(affinities[i]);
        const int star = max_index(p);
        const double c = p[star];
        total += c * (gamma - std::log(c));
        if (grad_aff) {
            // d/dc of c*(gamma - ln c) is gamma - ln c - 1; chain through the
            // softmax row of the maximal class.
            const double g_c = weight * inv_s * (gamma - std::log(c) - 1.0);
            Vec& g = (*grad_aff)[i];
            for (int j = 0; j < static_cast<int>(p.size()); ++j) {
                const double dc_da = c * ((j == star ? 1.0 : 0.0) - p[j]);
                g[j] += g_c * dc_da;
            }
        }
    }
    const double value = total * inv_s;
    ensure_finite(value, "loss_confidence_regularized");
    return value;
}

double loss_class_balanced(const std::vector<Vec>& affinities,
                           const std::vector<int>& reliable,
                           std::vector<Vec>* grad_aff, double weight) {
    require_reliable(reliable, affinities, "loss_class_balanced");
    const int k = static_cast<int>(affinities[reliable.front()].size());

    std::vector<Vec> probs;
    probs.reserve(reliable.size());
    Vec summed(k, 0.0);
    for (int i : reliable) {
        if (static_cast<int>(affinities[i].size()) != k) {
            throw DimensionError("loss_class_balanced: affinity length mismatch");
        }
        probs.push_back(softmax(affinities[i]));
        for (int j = 0; j < k; ++j) summed[j] += probs.back()[j];
    }
    const Vec p_hat = softmax(summed);
    double value = 0.0;
    for (double x : p_hat) {
        if (x > 0.0) value += x * std::log(x);
    }
    ensure_finite(value, "loss_class_balanced");

    if (grad_aff) {
        // dL/ds_j through the outer softmax, then each sample's inner softmax.
        Vec g_s(k, 0.0);
        for (int j = 0; j < k; ++j) {
            g_s[j] = p_hat[j] > 0.0 ? p_hat[j] * (std::log(p_hat[j]) - value) : 0.0;
        }
        for (std::size_t idx = 0; idx < reliable.size(); ++idx) {
            const Vec& q = probs[idx];
            double mix = 0.0;
            for (int j = 0; j < k; ++j) mix += g_s[j] * q[j];
            Vec& g = (*grad_aff)[reliable[idx]];
            for (int l = 0; l < k; ++l) g[l] += weight * q[l] * (g_s[l] - mix);
        }
    }
    return value;
}

double loss_modal(const std::vector<Vec>& aff_vision, const std::vector<Vec>& aff_touch,
                  const std::vector<int>& reliable, double lambda, double gamma,
                  std::vector<Vec>* grad_vision, std::vector<Vec>* grad_touch) {
    if (aff_vision.size() != aff_touch.size()) {
        throw DimensionError("loss_modal: modality batch size mismatch");
    }
    double value = 0.0;
    value += loss_confidence_regularized(aff_vision, reliable, gamma, grad_vision);
    value += lambda * loss_class_balanced(aff_vision, reliable, grad_vision, lambda);
    value += loss_confidence_regularized(aff_touch, reliable, gamma, grad_touch);
    value += lambda * loss_class_balanced(aff_touch, reliable, grad_touch, lambda);
    return value;
}

double loss_fused(const std::vector<Vec>& fused, const std::vector<int>& reliable,
                  double lambda, double gamma, std::vector<Vec>* grad_fused) {
    double value = 0.0;
    value += loss_confidence_regularized(fused, reliable, gamma, grad_fused);
    value += lambda * loss_class_balanced(fused, reliable, grad_fused, lambda);
    return value;
}

}  // namespace reliatta
