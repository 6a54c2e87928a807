#pragma once
// Sample-specific modality fusion: a small MLP maps the robustness vector to
// a convex weight pair, the weights combine the l2-normalized modality
// embeddings, and the fused embedding is scored against normalized label
// rows.

#include <array>
#include <cstdint>

#include "reliatta/core.hpp"
#include "reliatta/reliability.hpp"
#include "reliatta/rng.hpp"

namespace reliatta {

struct FusionWeights {
    double w_v = 0.5;
    double w_t = 0.5;
};

// 4 -> hidden (tanh) -> 2, softmax over the two raw outputs. The softmax
// makes the convex-combination property an enforced invariant rather than a
// hope about what the net learned.
struct FusionNet {
    ParameterBlock w1;  // hidden x 4
    ParameterBlock b1;  // hidden
    ParameterBlock w2;  // 2 x hidden
    ParameterBlock b2;  // 2
    int hidden = 0;

    // Weights from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, so the
    // initial output is exactly (0.5, 0.5): the static-average baseline.
    static FusionNet init(int hidden_width, std::uint64_t seed);

    std::array<ParameterBlock*, 4> blocks() { return {&w1, &b1, &w2, &b2}; }
    std::array<const ParameterBlock*, 4> blocks() const { return {&w1, &b1, &w2, &b2}; }
};

// Forward-pass record kept for the backward pass.
struct FusionForward {
    std::array<double, 4> input{};
    Vec hidden;      // tanh activations
    std::array<double, 2> raw{};
    FusionWeights w;
};

FusionForward fusion_weights(const RobustnessVector& r, const FusionNet& net);

// Accumulates d(loss)/d(net parameters) into the net's grad fields given
// d(loss)/d(w_v, w_t) at a saved forward pass.
void fusion_weights_backward(const FusionForward& fwd, FusionNet& net, double g_wv,
                             double g_wt);

// e_fus = w_v * e_v/||e_v|| + w_t * e_t/||e_t||. Throws
// DegenerateEmbeddingError when either norm is at or below 1e-12.
Vec fuse(std::span<const double> e_v, std::span<const double> e_t, FusionWeights w);

// Affinities of the fused embedding against l2-normalized label rows.
Vec fused_logits(std::span<const double> e_fus, const AffinityHead& head);

}  // namespace reliatta
