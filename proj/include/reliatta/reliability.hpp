#pragma once
// Per-sample reliability estimation: temperature-scaled affinities against
// the label embeddings, prediction uncertainty (entropy), confidence
// variation under perturbation, batch-adaptive thresholds, and the
// per-modality / global reliability masks.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "reliatta/core.hpp"
#include "reliatta/perturb.hpp"

namespace reliatta {

// Learnable log-temperature plus the frozen label-embedding rows.
struct AffinityHead {
    ParameterBlock log_temp;  // scalar tau; effective scale is exp(tau)
    Mat labels;               // K x D

    AffinityHead() : log_temp("tau_aff", 1, 1) {}
    AffinityHead(double tau_init, Mat label_rows) : log_temp("tau_aff", 1, 1), labels(std::move(label_rows)) {
        log_temp.value[0] = tau_init;
        if (labels.rows < 2) throw DimensionError("AffinityHead: need at least 2 label rows");
        ensure_finite(labels.data, "label matrix");
    }

    int num_classes() const { return labels.rows; }
    int dim() const { return labels.cols; }
    double tau() const { return log_temp.value[0]; }
    double temperature() const;
};

// a[j] = exp(tau) * <e, l_j>. Label rows are l2-normalized first when
// `normalize_labels` is set (the fused-logits path); the per-modality path
// uses them as stored, which keeps embedding magnitude in the signal.
Vec affinity_vector(std::span<const double> e, const AffinityHead& head,
                    bool normalize_labels);

// max(softmax(a)).
double confidence(std::span<const double> a);

// Shannon entropy of softmax(a) in nats; lies in [0, ln K].
double prediction_uncertainty(std::span<const double> a);

// c(a) - c(a_pert). The perturbed path is plain arithmetic on values; it
// cannot write gradients anywhere.
double confidence_variation(std::span<const double> a, std::span<const double> a_pert);

struct ThresholdPair {
    double zeta_u = 0.0;   // mu_u + alpha * sigma_u
    double zeta_v = 0.0;   // mu_v - alpha * sigma_v
    double mu_u = 0.0, sigma_u = 0.0;
    double mu_v = 0.0, sigma_v = 0.0;
};

// Batch mean and population standard deviation (divide by n) of the two
// indicators for one modality. Throws on an empty batch.
ThresholdPair dynamic_thresholds(std::span<const double> u, std::span<const double> v,
                                 double alpha);

struct ReliabilityMask {
    std::uint8_t vision = 0;
    std::uint8_t touch = 0;
    std::uint8_t global = 0;  // vision AND touch
};

struct MaskResult {
    std::vector<ReliabilityMask> masks;
    std::vector<int> reliable;  // indices with global mask 1, ascending
    double rate_vision = 0.0;
    double rate_touch = 0.0;
};

// M_m^i = 1 iff U^i < zeta_u AND V^i > zeta_v, strict on both sides; the
// global bit is the product over modalities.
MaskResult reliability_masks(std::span<const double> u_v, std::span<const double> v_v,
                             std::span<const double> u_t, std::span<const double> v_t,
                             const ThresholdPair& vision, const ThresholdPair& touch);

// Fixed-order input to the fusion network: [V_t, U_t, V_v, U_v].
struct RobustnessVector {
    std::array<double, 4> r{};

    double v_touch() const { return r[0]; }
    double u_touch() const { return r[1]; }
    double v_vision() const { return r[2]; }
    double u_vision() const { return r[3]; }
};

RobustnessVector robustness_vector(double v_t, double u_t, double v_v, double u_v);

}  // namespace reliatta
