#include <doctest.h>

#include <cmath>

#include "reliatta/core.hpp"
#include "reliatta/fusion.hpp"
#include "reliatta/rng.hpp"

using namespace reliatta;

TEST_SUITE_BEGIN("fusion");

namespace {

RobustnessVector random_r(Pcg32& rng) {
    // Component ranges as produced upstream: V in [-1,1], U in [0, ln K].
    return robustness_vector(rng.next_uniform(-1.0, 1.0), rng.next_uniform(0.0, 2.3),
                             rng.next_uniform(-1.0, 1.0), rng.next_uniform(0.0, 2.3));
}

// Independent forward pass used as the oracle.
std::pair<double, double> mlp_oracle(const FusionNet& net, const RobustnessVector& r) {
    std::vector<long double> hidden(net.hidden);
    for (int j = 0; j < net.hidden; ++j) {
        long double z = net.b1.value[j];
        for (int i = 0; i < 4; ++i) z += static_cast<long double>(net.w1.v(j, i)) * r.r[i];
        hidden[j] = tanhl(z);
    }
    long double o0 = net.b2.value[0], o1 = net.b2.value[1];
    for (int j = 0; j < net.hidden; ++j) {
        o0 += static_cast<long double>(net.w2.v(0, j)) * hidden[j];
        o1 += static_cast<long double>(net.w2.v(1, j)) * hidden[j];
    }
    const long double m = std::max(o0, o1);
    const long double e0 = expl(o0 - m), e1 = expl(o1 - m);
    return {static_cast<double>(e0 / (e0 + e1)), static_cast<double>(e1 / (e0 + e1))};
}

}  // namespace

TEST_CASE("zeroed net emits the static average") {
    FusionNet net = FusionNet::init(16, 1);
    for (ParameterBlock* b : net.blocks()) std::fill(b->value.begin(), b->value.end(), 0.0);
    const FusionForward fwd = fusion_weights(robustness_vector(0.3, 1.0, -0.2, 0.5), net);
    CHECK(fwd.w.w_v == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(fwd.w.w_t == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("output bias dominates a zeroed net") {
    FusionNet net = FusionNet::init(16, 1);
    for (ParameterBlock* b : net.blocks()) std::fill(b->value.begin(), b->value.end(), 0.0);
    net.b2.value[0] = 10.0;
    net.b2.value[1] = -10.0;
    const FusionForward fwd = fusion_weights(robustness_vector(0, 0, 0, 0), net);
    CHECK(fwd.w.w_v == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(fwd.w.w_t == doctest::Approx(2.061e-9).epsilon(0.01));
}

TEST_CASE("fresh nets start at the static average") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        FusionNet net = FusionNet::init(16, seed);
        const FusionForward fwd = fusion_weights(robustness_vector(0.1, 0.9, 0.2, 0.7), net);
        // Biases are zero at init, so raw outputs differ only through the
        // small random weights; both weights stay near one half.
        CHECK(fwd.w.w_v + fwd.w.w_t == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("forward pass matches an independent implementation") {
    Pcg32 rng = make_stream(71, Purpose::Test);
    for (int trial = 0; trial < 20; ++trial) {
        FusionNet net = FusionNet::init(16, 1000 + trial);
        const RobustnessVector r = random_r(rng);
        const FusionForward fwd = fusion_weights(r, net);
        const auto [wv, wt] = mlp_oracle(net, r);
        CHECK(std::abs(fwd.w.w_v - wv) < 1e-12);
        CHECK(std::abs(fwd.w.w_t - wt) < 1e-12);
    }
}

TEST_CASE("fusion weight gradients pass the finite-difference check") {
    Pcg32 rng = make_stream(72, Purpose::Test);
    for (int trial = 0; trial < 5; ++trial) {
        FusionNet net = FusionNet::init(8, 2000 + trial);
        const RobustnessVector r = random_r(rng);
        // Scalar objective: 2*w_v + 3*w_t.
        const FusionForward fwd = fusion_weights(r, net);
        fusion_weights_backward(fwd, net, 2.0, 3.0);
        auto blocks = net.blocks();
        const double err = check_gradient(
            [&] {
                const FusionForward f = fusion_weights(r, net);
                return 2.0 * f.w.w_v + 3.0 * f.w.w_t;
            },
            std::span<ParameterBlock* const>(blocks.data(), blocks.size()), 1e-5);
        CHECK(err < 1e-6);
        for (ParameterBlock* b : net.blocks()) b->zero_grad();
    }
}

TEST_CASE("convexity invariants hold over random nets and inputs") {
    Pcg32 rng = make_stream(73, Purpose::Test);
    for (int trial = 0; trial < 200; ++trial) {
        FusionNet net = FusionNet::init(16, 3000 + trial);
        // Push some nets far from init to stress the softmax.
        for (double& x : net.b2.value) x = rng.next_uniform(-30.0, 30.0);
        const FusionForward fwd = fusion_weights(random_r(rng), net);
        CHECK(fwd.w.w_v >= 0.0);
        CHECK(fwd.w.w_t >= 0.0);
        CHECK(std::abs(fwd.w.w_v + fwd.w.w_t - 1.0) <= 1e-9);
    }
}

TEST_CASE("fuse reduces to a single modality at w = (1, 0)") {
    const Vec e_v{2.0, 0.0, 0.0};
    const Vec e_t{0.0, 5.0, 0.0};
    const Vec fused = fuse(e_v, e_t, FusionWeights{1.0, 0.0});
    CHECK(fused[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fused[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("agreeing modalities fuse to themselves") {
    const Vec u{0.6, 0.8};
    for (double wv : {0.0, 0.3, 0.5, 1.0}) {
        const Vec fused = fuse(u, u, FusionWeights{wv, 1.0 - wv});
        CHECK(fused[0] == doctest::Approx(0.6).epsilon(1e-12));
        CHECK(fused[1] == doctest::Approx(0.8).epsilon(1e-12));
    }
}

TEST_CASE("orthogonal halves give norm sqrt(2)/2") {
    const Vec e_v{1.0, 0.0};
    const Vec e_t{0.0, 1.0};
    const Vec fused = fuse(e_v, e_t, FusionWeights{0.5, 0.5});
    CHECK(l2_norm(fused) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("fuse rejects degenerate embeddings") {
    CHECK_THROWS_AS(fuse(Vec{0.0, 0.0}, Vec{1.0, 0.0}, FusionWeights{0.5, 0.5}),
                    DegenerateEmbeddingError);
}

TEST_CASE("fused norm never exceeds one") {
    Pcg32 rng = make_stream(74, Purpose::Test);
    for (int trial = 0; trial < 200; ++trial) {
        Vec e_v(6), e_t(6);
        for (double& x : e_v) x = rng.next_normal();
        for (double& x : e_t) x = rng.next_normal();
        const double wv = rng.next_double();
        const Vec fused = fuse(e_v, e_t, FusionWeights{wv, 1.0 - wv});
        CHECK(l2_norm(fused) <= 1.0 + 1e-9);
    }
}

TEST_CASE("fused logits align with the matching label row") {
    Mat labels(3, 4);
    labels.at(0, 0) = 1.0;
    labels.at(1, 1) = 1.0;
    labels.at(2, 2) = 1.0;
    AffinityHead head(0.0, labels);
    for (int j = 0; j < 3; ++j) {
        Vec e(4, 0.0);
        e[j] = 0.9;
        const Vec z = fused_logits(e, head);
        CHECK(argmax(z) == j);
    }
}

TEST_CASE("tau shifts leave the fused argmax unchanged") {
    Pcg32 rng = make_stream(75, Purpose::Test);
    Mat labels(5, 8);
    for (double& x : labels.data) x = rng.next_normal();
    Vec e(8);
    for (double& x : e) x = rng.next_normal();
    int reference = -1;
    for (double tau : {-1.0, 0.0, 2.0}) {
        AffinityHead head(tau, labels);
        const int am = argmax(fused_logits(e, head));
        if (reference < 0) reference = am;
        CHECK(am == reference);
    }
}

TEST_CASE("fused logits match the naive oracle at K=10, D=32") {
    Pcg32 rng = make_stream(76, Purpose::Test);
    Mat labels(10, 32);
    for (double& x : labels.data) x = rng.next_normal();
    AffinityHead head(0.4, labels);
    Vec e(32);
    for (double& x : e) x = rng.next_normal();
    const Vec z = fused_logits(e, head);
    for (int j = 0; j < 10; ++j) {
        long double norm = 0.0L, raw = 0.0L;
        for (int c = 0; c < 32; ++c) {
            norm += static_cast<long double>(labels.at(j, c)) * labels.at(j, c);
            raw += static_cast<long double>(labels.at(j, c)) * e[c];
        }
        const double expected = static_cast<double>(expl(0.4L) * raw / sqrtl(norm));
        CHECK(std::abs(z[j] - expected) < 1e-10);
    }
}

TEST_CASE("each robustness slot reaches the net in its documented position") {
    // One-hot first-layer rows turn hidden unit j into tanh(r[j]), so a
    // sentinel in slot j must surface in exactly that unit.
    FusionNet net = FusionNet::init(4, 1);
    for (ParameterBlock* b : net.blocks()) std::fill(b->value.begin(), b->value.end(), 0.0);
    for (int j = 0; j < 4; ++j) net.w1.v(j, j) = 1.0;
    const RobustnessVector r = robustness_vector(0.11, 0.23, 0.37, 0.53);
    const FusionForward fwd = fusion_weights(r, net);
    CHECK(fwd.hidden[0] == doctest::Approx(std::tanh(0.11)).epsilon(1e-15));
    CHECK(fwd.hidden[1] == doctest::Approx(std::tanh(0.23)).epsilon(1e-15));
    CHECK(fwd.hidden[2] == doctest::Approx(std::tanh(0.37)).epsilon(1e-15));
    CHECK(fwd.hidden[3] == doctest::Approx(std::tanh(0.53)).epsilon(1e-15));
}

TEST_SUITE_END();
