#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "reliatta/reliability.hpp"
#include "reliatta/rng.hpp"

using namespace reliatta;

TEST_SUITE_BEGIN("reliability");

namespace {

AffinityHead identity_head(double tau, int k) {
    return AffinityHead(tau, Mat::identity(k));
}

AffinityHead random_head(double tau, int k, int d, std::uint64_t seed) {
    Pcg32 rng = make_stream(seed, Purpose::Test);
    Mat labels(k, d);
    for (double& x : labels.data) x = rng.next_normal();
    return AffinityHead(tau, std::move(labels));
}

}  // namespace

TEST_CASE("affinity against orthonormal labels picks out coordinates") {
    const AffinityHead head = identity_head(0.0, 2);
    const Vec a = affinity_vector(std::vector<double>{1.0, 0.0}, head, false);
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("temperature scales affinities linearly") {
    const AffinityHead head = identity_head(std::log(2.0), 2);
    const Vec a = affinity_vector(std::vector<double>{1.0, 0.0}, head, false);
    CHECK(a[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("affinity matches a naive dot-product oracle") {
    const int k = 5, d = 8;
    const AffinityHead head = random_head(0.3, k, d, 11);
    Pcg32 rng = make_stream(12, Purpose::Test);
    Vec e(d);
    for (double& x : e) x = rng.next_normal();

    const Vec a = affinity_vector(e, head, false);
    for (int j = 0; j < k; ++j) {
        long double expected = 0.0L;
        for (int c = 0; c < d; ++c) {
            expected += static_cast<long double>(head.labels.at(j, c)) * e[c];
        }
        expected *= expl(0.3L);
        CHECK(std::abs(a[j] - static_cast<double>(expected)) < 1e-12);
    }

    SUBCASE("normalized-label mode divides each row by its norm") {
        const Vec an = affinity_vector(e, head, true);
        for (int j = 0; j < k; ++j) {
            long double norm = 0.0L, raw = 0.0L;
            for (int c = 0; c < d; ++c) {
                norm += static_cast<long double>(head.labels.at(j, c)) * head.labels.at(j, c);
                raw += static_cast<long double>(head.labels.at(j, c)) * e[c];
            }
            const double expected = static_cast<double>(expl(0.3L) * raw / sqrtl(norm));
            CHECK(std::abs(an[j] - expected) < 1e-10);
        }
    }
}

TEST_CASE("affinity rejects dimension mismatches") {
    const AffinityHead head = identity_head(0.0, 3);
    CHECK_THROWS_AS(affinity_vector(std::vector<double>{1.0, 0.0}, head, false),
                    DimensionError);
}

TEST_CASE("uncertainty of a uniform 2-class vector is ln 2") {
    CHECK(prediction_uncertainty(std::vector<double>{0.0, 0.0}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("uncertainty of a near-one-hot vector vanishes") {
    CHECK(prediction_uncertainty(std::vector<double>{50.0, 0.0}) < 1e-9);
}

TEST_CASE("uncertainty matches the extended-precision entropy oracle") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    const double expected = static_cast<double>(oracles::entropy_ld(a));
    CHECK(std::abs(prediction_uncertainty(a) - expected) < 1e-10);
}

TEST_CASE("entropy stays within [0, ln K] on random inputs") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Pcg32 rng = make_stream(seed, Purpose::Test, 2);
        const int k = 2 + static_cast<int>(rng.next_below(12));
        Vec a(k);
        for (double& x : a) x = rng.next_uniform(-40.0, 40.0);
        const double u = prediction_uncertainty(a);
        CHECK(u >= 0.0);
        CHECK(u <= std::log(static_cast<double>(k)) + 1e-12);
    }
}

TEST_CASE("confidence variation of identical inputs is zero") {
    const std::vector<double> a{1.0, -2.0, 0.5};
    CHECK(confidence_variation(a, a) == 0.0);
}

TEST_CASE("confidence variation of one-hot minus uniform is one half") {
    CHECK(confidence_variation(std::vector<double>{50.0, 0.0},
                               std::vector<double>{0.0, 0.0}) ==
          doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("confidence variation matches an independent softmax path") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Pcg32 rng = make_stream(seed, Purpose::Test, 3);
        Vec a(10), b(10);
        for (double& x : a) x = rng.next_uniform(-5.0, 5.0);
        for (double& x : b) x = rng.next_uniform(-5.0, 5.0);
        const double expected = static_cast<double>(oracles::max_softmax_ld(a) -
                                                    oracles::max_softmax_ld(b));
        CHECK(std::abs(confidence_variation(a, b) - expected) < 1e-12);
    }
}

TEST_CASE("thresholds of a constant batch collapse to the mean") {
    const std::vector<double> u{1.0, 1.0, 1.0};
    const std::vector<double> v{0.2, 0.2, 0.2};
    const ThresholdPair t = dynamic_thresholds(u, v, 1.0);
    CHECK(t.sigma_u == 0.0);
    CHECK(t.zeta_u == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(t.zeta_v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("two-point batch: population sigma and thresholds by hand") {
    const std::vector<double> u{1.0, 3.0};
    const std::vector<double> v{0.0, 0.0};
    const ThresholdPair t = dynamic_thresholds(u, v, 1.0);
    CHECK(t.mu_u == doctest::Approx(2.0));
    CHECK(t.sigma_u == doctest::Approx(1.0));
    CHECK(t.zeta_u == doctest::Approx(3.0));
}

TEST_CASE("thresholds match the two-pass oracle on a random batch") {
    Pcg32 rng = make_stream(21, Purpose::Test);
    std::vector<double> u(64), v(64);
    for (double& x : u) x = rng.next_uniform(0.0, 2.3);
    for (double& x : v) x = rng.next_uniform(-1.0, 1.0);
    const ThresholdPair t = dynamic_thresholds(u, v, 1.0);
    long double mu, sd;
    oracles::mean_std_ld(u, mu, sd);
    CHECK(std::abs(t.mu_u - static_cast<double>(mu)) < 1e-12);
    CHECK(std::abs(t.sigma_u - static_cast<double>(sd)) < 1e-12);
    oracles::mean_std_ld(v, mu, sd);
    CHECK(std::abs(t.mu_v - static_cast<double>(mu)) < 1e-12);
    CHECK(std::abs(t.sigma_v - static_cast<double>(sd)) < 1e-12);
}

TEST_CASE("empty batches are rejected") {
    CHECK_THROWS_AS(dynamic_thresholds(std::vector<double>{}, std::vector<double>{}, 1.0),
                    DimensionError);
}

TEST_CASE("constant batch filters everything out under strict inequality") {
    const std::vector<double> u(4, 0.7), v(4, 0.1);
    const ThresholdPair t = dynamic_thresholds(u, v, 1.0);
    const MaskResult r = reliability_masks(u, v, u, v, t, t);
    CHECK(r.reliable.empty());
    for (const ReliabilityMask& m : r.masks) CHECK(m.global == 0);
}

TEST_CASE("hand-evaluated two-sample batch keeps exactly sample 0") {
    const std::vector<double> u{0.1, 2.0};
    const std::vector<double> v{0.5, -0.5};
    const ThresholdPair t = dynamic_thresholds(u, v, 1.0);
    // mu_u = 1.05, sigma_u = 0.95 -> zeta_u = 2.0 (strict < fails for sample 1)
    // mu_v = 0, sigma_v = 0.5 -> zeta_v = -0.5 (strict > fails for sample 1)
    const MaskResult r = reliability_masks(u, v, u, v, t, t);
    CHECK(r.reliable == std::vector<int>{0});
    CHECK(r.masks[0].global == 1);
    CHECK(r.masks[1].global == 0);
}

TEST_CASE("global mask is the AND of the modality masks") {
    // Vision all reliable, touch all unreliable: empty intersection.
    const std::vector<double> u_v{0.1, 0.2};
    const std::vector<double> v_v{0.9, 0.8};
    const std::vector<double> u_t{0.1, 0.2};
    const std::vector<double> v_t{0.9, 0.8};
    ThresholdPair loose{10.0, -10.0, 0, 0, 0, 0};
    ThresholdPair impossible{-10.0, 10.0, 0, 0, 0, 0};
    const MaskResult r = reliability_masks(u_v, v_v, u_t, v_t, loose, impossible);
    CHECK(r.reliable.empty());
    for (const ReliabilityMask& m : r.masks) {
        CHECK(m.vision == 1);
        CHECK(m.touch == 0);
        CHECK(m.global == m.vision * m.touch);
    }
    CHECK(r.rate_vision == doctest::Approx(1.0));
    CHECK(r.rate_touch == doctest::Approx(0.0));
}

TEST_CASE("growing alpha never grows the reliable set") {
    Pcg32 rng = make_stream(31, Purpose::Test);
    std::vector<double> u_v(32), v_v(32), u_t(32), v_t(32);
    for (int i = 0; i < 32; ++i) {
        u_v[i] = rng.next_uniform(0.0, 2.3);
        v_v[i] = rng.next_uniform(-0.5, 0.9);
        u_t[i] = rng.next_uniform(0.0, 2.3);
        v_t[i] = rng.next_uniform(-0.5, 0.9);
    }
    // Larger alpha pushes zeta_u up and zeta_v down, relaxing both strict
    // comparisons, so the reliable set can only grow (alpha = 0 keeps only
    // the better-than-average samples; a huge alpha admits the whole batch).
    std::vector<std::size_t> sizes;
    for (double alpha : {0.0, 0.5, 1.0, 2.0, 1e6}) {
        const ThresholdPair tv = dynamic_thresholds(u_v, v_v, alpha);
        const ThresholdPair tt = dynamic_thresholds(u_t, v_t, alpha);
        sizes.push_back(reliability_masks(u_v, v_v, u_t, v_t, tv, tt).reliable.size());
    }
    for (std::size_t i = 1; i < sizes.size(); ++i) CHECK(sizes[i] >= sizes[i - 1]);
    CHECK(sizes.back() == 32);
}

TEST_CASE("robustness vector preserves the documented component order") {
    const RobustnessVector r = robustness_vector(0.1, 0.2, 0.3, 0.4);
    CHECK(r.r[0] == 0.1);  // V_t
    CHECK(r.r[1] == 0.2);  // U_t
    CHECK(r.r[2] == 0.3);  // V_v
    CHECK(r.r[3] == 0.4);  // U_v
    CHECK(r.v_touch() == 0.1);
    CHECK(r.u_touch() == 0.2);
    CHECK(r.v_vision() == 0.3);
    CHECK(r.u_vision() == 0.4);
}

TEST_CASE("affinity argmax is invariant to the temperature") {
    const int k = 6, d = 8;
    Pcg32 rng = make_stream(41, Purpose::Test);
    Mat labels(k, d);
    for (double& x : labels.data) x = rng.next_normal();
    Vec e(d);
    for (double& x : e) x = rng.next_normal();
    int reference = -1;
    for (double tau : {-2.0, 0.0, 1.5, 4.0}) {
        AffinityHead head(tau, labels);
        const Vec a = affinity_vector(e, head, false);
        const int am = argmax(a);
        if (reference < 0) reference = am;
        CHECK(am == reference);
    }
}

TEST_CASE("the perturbed path writes no gradients") {
    AffinityHead head = random_head(0.1, 4, 6, 51);
    Pcg32 rng = make_stream(52, Purpose::Test);
    Vec e(6), e_pert(6);
    for (double& x : e) x = rng.next_normal();
    for (double& x : e_pert) x = rng.next_normal();
    const Vec a = affinity_vector(e, head, false);
    const Vec a_pert = affinity_vector(e_pert, head, false);
    (void)confidence_variation(a, a_pert);
    for (double g : head.log_temp.grad) CHECK(g == 0.0);
}

TEST_SUITE_END();
