#pragma once
// Online adaptation state and the per-batch step: encode-side forward,
// reliability filtering, fusion, reliability-aware losses, and the dual
// AdamW schedule (per-batch updates for the modality branches and the
// log-temperature; delayed, accumulated updates for the fusion net).

#include <cstdint>
#include <string>
#include <vector>

#include "reliatta/core.hpp"
#include "reliatta/fusion.hpp"
#include "reliatta/losses.hpp"
#include "reliatta/optim.hpp"
#include "reliatta/reliability.hpp"

namespace reliatta {

struct HyperParams {
    double alpha = 1.0;    // filtration strength
    double lambda = 0.5;   // class-balance weight
    double gamma = 0.36787944117144233;  // confidence-regulating constant, e^-1
    double lr = 1e-6;
    double fusion_lr = -1.0;  // < 0: use lr
    int accum_period = 5;     // fusion updates every N batches
    int batch_size = 64;
    int patch_grid = 2;
    int fusion_hidden = 16;
    double tau_init = 1.4;  // exp(tau) ~ 4: mid-confidence logits at unit norms
    bool fusion_accum_mean = false;  // average instead of summing accumulated grads
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;

    double effective_fusion_lr() const { return fusion_lr < 0.0 ? lr : fusion_lr; }
    AdamWConfig modal_optimizer() const { return {lr, beta1, beta2, adam_eps, weight_decay}; }
    AdamWConfig fusion_optimizer() const {
        return {effective_fusion_lr(), beta1, beta2, adam_eps, weight_decay};
    }
    void validate() const;
};

// Per-sample frozen-encoder outputs for both modalities, clean and
// perturbed. Carries no labels: adaptation is unsupervised by construction
// and scoring happens in the harness's evaluation view.
struct EncodedBatch {
    std::vector<Vec> clean_v;
    std::vector<Vec> clean_t;
    std::vector<Vec> pert_v;
    std::vector<Vec> pert_t;
    std::string phase;

    int size() const { return static_cast<int>(clean_v.size()); }
    void validate() const;
};

// All trainable parameters plus the two optimizer states. Adapters start at
// identity, so the initial model is the frozen encoder itself.
class AdaptationState {
public:
    AdaptationState(Mat labels, int dim, const HyperParams& hp, std::uint64_t seed);

    AdaptationState(const AdaptationState&) = delete;
    AdaptationState& operator=(const AdaptationState&) = delete;

    ParameterBlock adapter_v;       // D x D
    ParameterBlock adapter_bias_v;  // D
    ParameterBlock adapter_t;
    ParameterBlock adapter_bias_t;
    AffinityHead head;
    FusionNet fusion;
    HyperParams hp;

    Mat labels_unit;  // row-normalized label matrix for the fused path

    AdamW& modal_optimizer() { return modal_opt_; }
    AdamW& fusion_optimizer() { return fusion_opt_; }

    std::vector<ParameterBlock*> modal_blocks();
    std::vector<ParameterBlock*> fusion_blocks();
    std::vector<ParameterBlock*> all_blocks();

    std::int64_t batch_count = 0;       // 1-based after the first step
    std::int64_t fusion_accum_count = 0;  // batches contributing since last fusion step

private:
    AdamW modal_opt_;
    AdamW fusion_opt_;
};

enum class WeightPolicy { Network, Pinned };  // Pinned: w = (0.5, 0.5)

// Everything the step derives from one batch before any update.
struct ForwardResult {
    double tau_scale = 1.0;  // exp(tau) snapshot used throughout
    std::vector<Vec> emb_v, emb_t;    // adapted clean embeddings
    std::vector<Vec> unit_v, unit_t;  // l2-normalized (zeros when degenerate)
    std::vector<std::uint8_t> degenerate;
    std::vector<Vec> aff_v, aff_t;
    std::vector<double> u_v, v_v, u_t, v_t;
    ThresholdPair thr_v, thr_t;
    MaskResult masks;
    std::vector<RobustnessVector> robustness;
    std::vector<FusionForward> fusion_fwd;  // only under WeightPolicy::Network
    std::vector<FusionWeights> weights;
    std::vector<Vec> fused_emb;
    std::vector<Vec> fused_z;
    std::vector<int> predictions;
    double mean_w_v = 0.5, mean_w_t = 0.5;
};

ForwardResult forward_batch(const AdaptationState& state, const EncodedBatch& batch,
                            WeightPolicy policy);

// Backward stage of the step. Fills the modal blocks' grads with
// d(L_modal)/d{adapters, tau} and adds d(L_fus)/d{fusion net} into the
// fusion blocks' grads (the cross-batch accumulator). Requires a non-empty
// reliable set. The fused loss drives only the fusion net: its gradients are
// never routed into the branch parameters or tau, which belong to the
// modality optimizer.
struct BackwardResult {
    double loss_modal = 0.0;
    double loss_fused = 0.0;
};
BackwardResult adapt_backward(AdaptationState& state, const ForwardResult& fwd,
                              const EncodedBatch& batch);

struct BatchDiagnostics {
    int batch_index = 0;  // 0-based position in the stream
    int sample_count = 0;
    int reliable_count = 0;
    double mask_rate_v = 0.0;
    double mask_rate_t = 0.0;
    double loss_modal = 0.0;
    double loss_fused = 0.0;
    double mean_w_v = 0.5;
    double mean_w_t = 0.5;
    double tau = 0.0;
    bool update_skipped = false;  // empty reliable set or non-finite loss
    bool fusion_stepped = false;
    std::string flag;  // empty when the batch was unremarkable
};

struct StepResult {
    std::vector<int> predictions;
    BatchDiagnostics diag;
};

// One full online step: predictions for every sample (filtering never gates
// inference), then the masked dual-optimizer update. The fusion optimizer
// steps when the 1-based batch count is a multiple of hp.accum_period.
StepResult adapt_step(AdaptationState& state, const EncodedBatch& batch);

}  // namespace reliatta
