#include "reliatta/fusion.hpp"

#include <cmath>

namespace reliatta {

FusionNet FusionNet::init(int hidden_width, std::uint64_t seed) {
    if (hidden_width < 1) throw ConfigError("FusionNet: hidden width must be >= 1");
    FusionNet net;
    net.hidden = hidden_width;
    net.w1 = ParameterBlock("fusion_w1", hidden_width, 4);
    net.b1 = ParameterBlock("fusion_b1", hidden_width, 1);
    net.w2 = ParameterBlock("fusion_w2", 2, hidden_width);
    net.b2 = ParameterBlock("fusion_b2", 2, 1);
    Pcg32 rng = make_stream(seed, Purpose::FusionInit);
    const double s1 = 1.0 / std::sqrt(4.0);
    for (double& x : net.w1.value) x = rng.next_uniform(-s1, s1);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_width));
    for (double& x : net.w2.value) x = rng.next_uniform(-s2, s2);
    return net;
}

FusionForward fusion_weights(const RobustnessVector& r, const FusionNet& net) {
    FusionForward fwd;
    fwd.input = r.r;
    fwd.hidden.resize(net.hidden);
    for (int j = 0; j < net.hidden; ++j) {
        double z = net.b1.value[j];
        for (int i = 0; i < 4; ++i) z += net.w1.v(j, i) * r.r[i];
        fwd.hidden[j] = std::tanh(z);
    }
    for (int o = 0; o < 2; ++o) {
        double z = net.b2.value[o];
        for (int j = 0; j < net.hidden; ++j) z += net.w2.v(o, j) * fwd.hidden[j];
        fwd.raw[o] = z;
    }
    ensure_finite(fwd.raw, "fusion raw outputs");
    const Vec p = softmax(fwd.raw);
    fwd.w.w_v = p[0];
    fwd.w.w_t = p[1];
    return fwd;
}

void fusion_weights_backward(const FusionForward& fwd, FusionNet& net, double g_wv,
                             double g_wt) {
    // Softmax over the two raw outputs.
    const double wv = fwd.w.w_v;
    const double wt = fwd.w.w_t;
    const double mix = g_wv * wv + g_wt * wt;
    const std::array<double, 2> g_raw = {wv * (g_wv - mix), wt * (g_wt - mix)};

    Vec g_hidden(net.hidden, 0.0);
    for (int o = 0; o < 2; ++o) {
        net.b2.grad[o] += g_raw[o];
        for (int j = 0; j < net.hidden; ++j) {
            net.w2.g(o, j) += g_raw[o] * fwd.hidden[j];
            g_hidden[j] += net.w2.v(o, j) * g_raw[o];
        }
    }
    for (int j = 0; j < net.hidden; ++j) {
        const double g_pre = g_hidden[j] * (1.0 - fwd.hidden[j] * fwd.hidden[j]);
        net.b1.grad[j] += g_pre;
        for (int i = 0; i < 4; ++i) net.w1.g(j, i) += g_pre * fwd.input[i];
    }
}

Vec fuse(std::span<const double> e_v, std::span<const double> e_t, FusionWeights w) {
    if (e_v.size() != e_t.size()) throw DimensionError("fuse: embedding dimension mismatch");
    const Vec uv = l2_normalize(e_v);
    const Vec ut = l2_normalize(e_t);
    Vec out(uv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = w.w_v * uv[i] + w.w_t * ut[i];
    return out;
}

Vec fused_logits(std::span<const double> e_fus, const AffinityHead& head) {
    return affinity_vector(e_fus, head, /*normalize_labels=*/true);
}

}  // namespace reliatta
