#include "reliatta/adapt.hpp"

#include <cmath>

#include "reliatta/kernels.hpp"

namespace reliatta {

void HyperParams::validate() const {
    // lr = 0 is legal: it turns every method into pure inference, which the
    // harness uses as a control.
    if (alpha < 0.0) throw ConfigError("hp.alpha must be >= 0");
    if (lambda < 0.0) throw ConfigError("hp.lambda must be >= 0");
    if (lr < 0.0) throw ConfigError("hp.lr must be >= 0");
    if (accum_period < 1) throw ConfigError("hp.accum_period must be >= 1");
    if (batch_size < 1) throw ConfigError("hp.batch_size must be >= 1");
    if (patch_grid < 1) throw ConfigError("hp.patch_grid must be >= 1");
    if (fusion_hidden < 1) throw ConfigError("hp.fusion_hidden must be >= 1");
}

void EncodedBatch::validate() const {
    const std::size_t n = clean_v.size();
    if (n == 0) throw DimensionError("EncodedBatch: empty batch");
    if (clean_t.size() != n || pert_v.size() != n || pert_t.size() != n) {
        throw DimensionError("EncodedBatch: modality stream lengths differ");
    }
}

AdaptationState::AdaptationState(Mat labels, int dim, const HyperParams& params,
                                 std::uint64_t seed)
    : adapter_v(ParameterBlock::from_matrix("adapter_v", Mat::identity(dim))),
      adapter_bias_v("adapter_bias_v", dim, 1),
      adapter_t(ParameterBlock::from_matrix("adapter_t", Mat::identity(dim))),
      adapter_bias_t("adapter_bias_t", dim, 1),
      head(params.tau_init, std::move(labels)),
      fusion(FusionNet::init(params.fusion_hidden, seed)),
      hp(params),
      modal_opt_({&adapter_v, &adapter_bias_v, &adapter_t, &adapter_bias_t,
                  &head.log_temp}),
      fusion_opt_({&fusion.w1, &fusion.b1, &fusion.w2, &fusion.b2}) {
    hp.validate();
    if (head.dim() != dim) {
        throw DimensionError("AdaptationState: label columns != embedding dimension");
    }
    labels_unit = Mat(head.num_classes(), dim);
    for (int r = 0; r < head.num_classes(); ++r) {
        const Vec unit = l2_normalize(head.labels.row(r));
        std::copy(unit.begin(), unit.end(), labels_unit.row(r).begin());
    }
}

std::vector<ParameterBlock*> AdaptationState::modal_blocks() {
    return {&adapter_v, &adapter_bias_v, &adapter_t, &adapter_bias_t, &head.log_temp};
}

std::vector<ParameterBlock*> AdaptationState::fusion_blocks() {
    return {&fusion.w1, &fusion.b1, &fusion.w2, &fusion.b2};
}

std::vector<ParameterBlock*> AdaptationState::all_blocks() {
    auto blocks = modal_blocks();
    for (ParameterBlock* b : fusion_blocks()) blocks.push_back(b);
    return blocks;
}

namespace {

// a[i] = tau_scale * labels * e[i]
void batch_affinities(const Mat& labels, double tau_scale, const std::vector<Vec>& embs,
                      std::vector<Vec>& out) {
    kernels::batch_matvec(labels, embs, out);
    kernels::for_each_sample(static_cast<int>(out.size()), [&](int i) {
        for (double& x : out[i]) x *= tau_scale;
    });
}

}  // namespace

ForwardResult forward_batch(const AdaptationState& state, const EncodedBatch& batch,
                            WeightPolicy policy) {
    batch.validate();
    const int n = batch.size();
    ForwardResult fwd;
    fwd.tau_scale = state.head.temperature();

    const Mat a_v = state.adapter_v.as_matrix();
    const Mat a_t = state.adapter_t.as_matrix();
    const Vec& b_v = state.adapter_bias_v.value;
    const Vec& b_t = state.adapter_bias_t.value;

    std::vector<Vec> emb_v_pert, emb_t_pert;
    kernels::batch_affine(a_v, b_v, batch.clean_v, fwd.emb_v);
    kernels::batch_affine(a_t, b_t, batch.clean_t, fwd.emb_t);
    // Perturbed-path embeddings are plain values; nothing downstream of them
    // can write a gradient.
    kernels::batch_affine(a_v, b_v, batch.pert_v, emb_v_pert);
    kernels::batch_affine(a_t, b_t, batch.pert_t, emb_t_pert);

    std::vector<Vec> aff_v_pert, aff_t_pert;
    batch_affinities(state.head.labels, fwd.tau_scale, fwd.emb_v, fwd.aff_v);
    batch_affinities(state.head.labels, fwd.tau_scale, fwd.emb_t, fwd.aff_t);
    batch_affinities(state.head.labels, fwd.tau_scale, emb_v_pert, aff_v_pert);
    batch_affinities(state.head.labels, fwd.tau_scale, emb_t_pert, aff_t_pert);

    fwd.u_v.resize(n);
    fwd.v_v.resize(n);
    fwd.u_t.resize(n);
    fwd.v_t.resize(n);
    fwd.unit_v.resize(n);
    fwd.unit_t.resize(n);
    fwd.degenerate.assign(n, 0);
    kernels::for_each_sample(n, [&](int i) {
        fwd.u_v[i] = prediction_uncertainty(fwd.aff_v[i]);
        fwd.v_v[i] = confidence_variation(fwd.aff_v[i], aff_v_pert[i]);
        fwd.u_t[i] = prediction_uncertainty(fwd.aff_t[i]);
        fwd.v_t[i] = confidence_variation(fwd.aff_t[i], aff_t_pert[i]);
        const double norm_v = l2_norm(fwd.emb_v[i]);
        const double norm_t = l2_norm(fwd.emb_t[i]);
        if (norm_v <= kNormEpsilon || norm_t <= kNormEpsilon) {
            fwd.degenerate[i] = 1;
            fwd.unit_v[i].assign(fwd.emb_v[i].size(), 0.0);
            fwd.unit_t[i].assign(fwd.emb_t[i].size(), 0.0);
            if (norm_v > kNormEpsilon) fwd.unit_v[i] = l2_normalize(fwd.emb_v[i]);
            if (norm_t > kNormEpsilon) fwd.unit_t[i] = l2_normalize(fwd.emb_t[i]);
        } else {
            fwd.unit_v[i] = l2_normalize(fwd.emb_v[i]);
            fwd.unit_t[i] = l2_normalize(fwd.emb_t[i]);
        }
    });

    fwd.thr_v = dynamic_thresholds(fwd.u_v, fwd.v_v, state.hp.alpha);
    fwd.thr_t = dynamic_thresholds(fwd.u_t, fwd.v_t, state.hp.alpha);
    fwd.masks = reliability_masks(fwd.u_v, fwd.v_v, fwd.u_t, fwd.v_t, fwd.thr_v, fwd.thr_t);

    // A sample whose embedding direction is meaningless cannot drive updates.
    bool any_degenerate = false;
    for (int i = 0; i < n; ++i) {
        if (fwd.degenerate[i]) {
            any_degenerate = true;
            fwd.masks.masks[i].vision = 0;
            fwd.masks.masks[i].touch = 0;
            fwd.masks.masks[i].global = 0;
        }
    }
    if (any_degenerate) {
        fwd.masks.reliable.clear();
        for (int i = 0; i < n; ++i) {
            if (fwd.masks.masks[i].global) fwd.masks.reliable.push_back(i);
        }
    }

    fwd.robustness.resize(n);
    fwd.weights.resize(n);
    fwd.fused_emb.resize(n);
    if (policy == WeightPolicy::Network) fwd.fusion_fwd.resize(n);
    kernels::for_each_sample(n, [&](int i) {
        fwd.robustness[i] =
            robustness_vector(fwd.v_t[i], fwd.u_t[i], fwd.v_v[i], fwd.u_v[i]);
        if (policy == WeightPolicy::Network) {
            fwd.fusion_fwd[i] = fusion_weights(fwd.robustness[i], state.fusion);
            fwd.weights[i] = fwd.fusion_fwd[i].w;
        } else {
            fwd.weights[i] = FusionWeights{0.5, 0.5};
        }
        if (fwd.degenerate[i]) {
            // Fall back to whichever direction survives.
            const bool has_v = l2_norm(fwd.unit_v[i]) > 0.5;
            const bool has_t = l2_norm(fwd.unit_t[i]) > 0.5;
            fwd.weights[i] = FusionWeights{has_v ? 1.0 : 0.0, has_t ? 1.0 : 0.0};
        }
        const std::size_t d = fwd.unit_v[i].size();
        Vec& fused = fwd.fused_emb[i];
        fused.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            fused[j] = fwd.weights[i].w_v * fwd.unit_v[i][j] +
                       fwd.weights[i].w_t * fwd.unit_t[i][j];
        }
    });

    batch_affinities(state.labels_unit, fwd.tau_scale, fwd.fused_emb, fwd.fused_z);
    fwd.predictions.resize(n);
    double sum_wv = 0.0, sum_wt = 0.0;
    for (int i = 0; i < n; ++i) {
        fwd.predictions[i] = argmax(fwd.fused_z[i]);
        sum_wv += fwd.weights[i].w_v;
        sum_wt += fwd.weights[i].w_t;
    }
    fwd.mean_w_v = sum_wv / n;
    fwd.mean_w_t = sum_wt / n;
    return fwd;
}

BackwardResult adapt_backward(AdaptationState& state, const ForwardResult& fwd,
                              const EncodedBatch& batch) {
    const std::vector<int>& reliable = fwd.masks.reliable;
    if (reliable.empty()) {
        throw EmptyReliableSetError("adapt_backward: empty reliable set");
    }
    const int n = batch.size();
    const int k = state.head.num_classes();
    BackwardResult out;

    // --- modality adaptation loss -> {adapters, tau} -------------------
    std::vector<Vec> g_aff_v(n, Vec(k, 0.0));
    std::vector<Vec> g_aff_t(n, Vec(k, 0.0));
    out.loss_modal = loss_modal(fwd.aff_v, fwd.aff_t, reliable, state.hp.lambda,
                                state.hp.gamma, &g_aff_v, &g_aff_t);

    // tau sees d(a_j)/d(tau) = a_j from both modalities.
    double g_tau = 0.0;
    for (int i : reliable) {
        g_tau += dot(g_aff_v[i], fwd.aff_v[i]);
        g_tau += dot(g_aff_t[i], fwd.aff_t[i]);
    }

    // Chain into embeddings: g_e = tau_scale * L^T g_a, reliable rows only.
    std::vector<Vec> g_emb(reliable.size(), Vec(state.head.dim(), 0.0));
    std::vector<Vec> h_sel(reliable.size());
    const Mat& labels = state.head.labels;
    const int d = state.head.dim();
    auto chain_modality = [&](const std::vector<Vec>& g_aff, const std::vector<Vec>& h,
                              ParameterBlock& adapter, ParameterBlock& bias) {
        kernels::for_each_sample(static_cast<int>(reliable.size()), [&](int s) {
            const int i = reliable[s];
            Vec& ge = g_emb[s];
            std::fill(ge.begin(), ge.end(), 0.0);
            for (int j = 0; j < k; ++j) {
                const double gj = g_aff[i][j] * fwd.tau_scale;
                if (gj == 0.0) continue;
                auto row = labels.row(j);
                for (int c = 0; c < d; ++c) ge[c] += gj * row[c];
            }
            h_sel[s] = h[i];
        });
        Mat g_adapter(d, d);
        g_adapter.data.assign(adapter.grad.begin(), adapter.grad.end());
        kernels::accumulate_outer(g_emb, h_sel, g_adapter);
        adapter.grad = g_adapter.data;
        kernels::accumulate_sum(g_emb, bias.grad);
    };
    chain_modality(g_aff_v, batch.clean_v, state.adapter_v, state.adapter_bias_v);
    chain_modality(g_aff_t, batch.clean_t, state.adapter_t, state.adapter_bias_t);
    state.head.log_temp.grad[0] += g_tau;

    // --- fused loss -> fusion net only ---------------------------------
    std::vector<Vec> g_z(n, Vec(k, 0.0));
    out.loss_fused =
        loss_fused(fwd.fused_z, reliable, state.hp.lambda, state.hp.gamma, &g_z);
    if (!fwd.fusion_fwd.empty()) {
        for (int i : reliable) {
            // g_efus = tau_scale * L_unit^T g_z
            Vec g_efus(d, 0.0);
            for (int j = 0; j < k; ++j) {
                const double gj = g_z[i][j] * fwd.tau_scale;
                if (gj == 0.0) continue;
                auto row = state.labels_unit.row(j);
                for (int c = 0; c < d; ++c) g_efus[c] += gj * row[c];
            }
            const double g_wv = dot(g_efus, fwd.unit_v[i]);
            const double g_wt = dot(g_efus, fwd.unit_t[i]);
            fusion_weights_backward(fwd.fusion_fwd[i], state.fusion, g_wv, g_wt);
        }
    }
    return out;
}

StepResult adapt_step(AdaptationState& state, const EncodedBatch& batch) {
    ForwardResult fwd = forward_batch(state, batch, WeightPolicy::Network);
    const int n = batch.size();

    StepResult result;
    result.predictions = fwd.predictions;
    BatchDiagnostics& diag = result.diag;
    diag.batch_index = static_cast<int>(state.batch_count);
    diag.sample_count = n;
    diag.reliable_count = static_cast<int>(fwd.masks.reliable.size());
    diag.mask_rate_v = fwd.masks.rate_vision;
    diag.mask_rate_t = fwd.masks.rate_touch;
    diag.mean_w_v = fwd.mean_w_v;
    diag.mean_w_t = fwd.mean_w_t;

    state.batch_count += 1;

    if (fwd.masks.reliable.empty()) {
        diag.update_skipped = true;
        diag.flag = "empty_reliable_set";
        diag.tau = state.head.tau();
        return result;
    }

    // The fusion blocks' grads hold contributions from earlier batches; keep
    // a copy so a bad batch can be rolled back without losing them.
    std::vector<Vec> fusion_grad_snapshot;
    for (ParameterBlock* b : state.fusion_blocks()) fusion_grad_snapshot.push_back(b->grad);

    BackwardResult losses;
    bool numeric_ok = true;
    try {
        losses = adapt_backward(state, fwd, batch);
    } catch (const NumericError&) {
        numeric_ok = false;
    }
    if (numeric_ok) {
        numeric_ok = std::isfinite(losses.loss_modal) && std::isfinite(losses.loss_fused);
        for (ParameterBlock* b : state.all_blocks()) {
            if (!all_finite(b->grad)) numeric_ok = false;
        }
    }
    if (!numeric_ok) {
        for (ParameterBlock* b : state.modal_blocks()) b->zero_grad();
        auto fusion = state.fusion_blocks();
        for (std::size_t i = 0; i < fusion.size(); ++i) {
            fusion[i]->grad = fusion_grad_snapshot[i];
        }
        diag.update_skipped = true;
        diag.flag = "non_finite_loss";
        diag.tau = state.head.tau();
        return result;
    }
    diag.loss_modal = losses.loss_modal;
    diag.loss_fused = losses.loss_fused;

    if (!state.modal_optimizer().step(state.hp.modal_optimizer())) {
        for (ParameterBlock* b : state.modal_blocks()) b->zero_grad();
        diag.update_skipped = true;
        diag.flag = "non_finite_gradient";
    }
    state.fusion_accum_count += 1;

    // Delayed fusion schedule: gradients pile up in the fusion blocks across
    // batches; one optimizer step fires when the 1-based batch count hits a
    // multiple of N, then the accumulator starts over.
    if (state.batch_count % state.hp.accum_period == 0) {
        if (state.hp.fusion_accum_mean && state.fusion_accum_count > 0) {
            const double scale = 1.0 / static_cast<double>(state.fusion_accum_count);
            for (ParameterBlock* b : state.fusion_blocks()) {
                for (double& g : b->grad) g *= scale;
            }
        }
        if (state.fusion_optimizer().step(state.hp.fusion_optimizer())) {
            diag.fusion_stepped = true;
        } else {
            for (ParameterBlock* b : state.fusion_blocks()) b->zero_grad();
            diag.flag = diag.flag.empty() ? "non_finite_fusion_gradient" : diag.flag;
        }
        state.fusion_accum_count = 0;
    }

    diag.tau = state.head.tau();
    return result;
}

}  // namespace reliatta
