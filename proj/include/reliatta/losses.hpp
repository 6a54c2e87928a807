#pragma once
// Reliability-aware losses over the reliable index set S, with hand-derived
// gradients with respect to the per-sample affinity vectors. S is frozen by
// the caller before any loss is evaluated: the masks are binary gates, not
// differentiable quantities.

#include <vector>

#include "reliatta/core.hpp"

namespace reliatta {

// (1/|S|) * sum_{i in S} c_i * (gamma - ln c_i) with c_i = max softmax(a_i).
// At a confidence tie the gradient routes to the lowest-index maximal class.
// When grad_aff is non-null, d(loss)/d(a_i) scaled by `weight` is added into
// (*grad_aff)[i] for i in S (other rows untouched).
double loss_confidence_regularized(const std::vector<Vec>& affinities,
                                   const std::vector<int>& reliable, double gamma,
                                   std::vector<Vec>* grad_aff = nullptr,
                                   double weight = 1.0);

// p_hat = softmax(sum_{i in S} softmax(a_i)); returns sum_k p_hat_k ln p_hat_k,
// the negative entropy of the batch-level class distribution (in [-ln K, 0]).
double loss_class_balanced(const std::vector<Vec>& affinities,
                           const std::vector<int>& reliable,
                           std::vector<Vec>* grad_aff = nullptr, double weight = 1.0);

// Sum over both modalities of CR + lambda * CB on the clean affinities.
double loss_modal(const std::vector<Vec>& aff_vision, const std::vector<Vec>& aff_touch,
                  const std::vector<int>& reliable, double lambda, double gamma,
                  std::vector<Vec>* grad_vision = nullptr,
                  std::vector<Vec>* grad_touch = nullptr);

// CR + lambda * CB on the fused logits.
double loss_fused(const std::vector<Vec>& fused, const std::vector<int>& reliable,
                  double lambda, double gamma, std::vector<Vec>* grad_fused = nullptr);

}  // namespace reliatta
