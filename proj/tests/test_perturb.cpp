#include <doctest.h>

#include <algorithm>

#include "reliatta/perturb.hpp"
#include "reliatta/rng.hpp"

using namespace reliatta;

TEST_SUITE_BEGIN("perturb");

namespace {

Grid random_grid(int h, int w, Pcg32& rng) {
    Grid g(h, w);
    for (double& v : g.v) v = rng.next_normal();
    return g;
}

}  // namespace

TEST_CASE("g=1 leaves the input untouched") {
    Pcg32 rng = make_stream(1, Purpose::Test);
    const Grid x = random_grid(8, 8, rng);
    auto [shuffled, plan] = segment_shuffle(x, 1, rng);
    CHECK(plan.perm == std::vector<int>{0});
    CHECK(shuffled.v == x.v);
}

TEST_CASE("unit patches with a reversing plan reverse the scalars") {
    Grid x(2, 2);
    x.v = {1.0, 2.0, 3.0, 4.0};
    PermutationPlan plan;
    plan.grid_side = 2;
    plan.perm = {3, 2, 1, 0};  // 0<->3, 1<->2
    const Grid y = apply_patch_permutation(x, plan);
    CHECK(y.v == std::vector<double>{4.0, 3.0, 2.0, 1.0});
}

TEST_CASE("content is conserved bitwise across seeds and grid sides") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Pcg32 data_rng = make_stream(seed, Purpose::Test, 0);
        const Grid x = random_grid(16, 16, data_rng);
        for (int g : {1, 2, 4, 8}) {
            Pcg32 rng = make_stream(seed, Purpose::Test, g);
            auto [shuffled, plan] = segment_shuffle(x, g, rng);
            Vec a = x.v, b = shuffled.v;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            CHECK(a == b);
        }
    }
}

TEST_CASE("identical input, grid, and seed reproduce bitwise") {
    Pcg32 data_rng = make_stream(7, Purpose::Test);
    const Grid x = random_grid(16, 16, data_rng);
    Pcg32 r1 = make_stream(42, Purpose::PerturbVision, 3, 9);
    Pcg32 r2 = make_stream(42, Purpose::PerturbVision, 3, 9);
    auto [y1, p1] = segment_shuffle(x, 4, r1);
    auto [y2, p2] = segment_shuffle(x, 4, r2);
    CHECK(y1.v == y2.v);
    CHECK(p1.perm == p2.perm);
}

TEST_CASE("g>1 always produces a non-identity rearrangement") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Pcg32 data_rng = make_stream(seed, Purpose::Test, 100);
        const Grid x = random_grid(8, 8, data_rng);  // distinct patches a.s.
        Pcg32 rng = make_stream(seed, Purpose::Test, 101);
        auto [shuffled, plan] = segment_shuffle(x, 2, rng);
        CHECK(!plan.is_identity());
        CHECK(shuffled.v != x.v);
    }
}

TEST_CASE("indivisible grid sides are rejected") {
    Pcg32 rng = make_stream(1, Purpose::Test);
    const Grid x = random_grid(16, 16, rng);
    CHECK_THROWS_AS(segment_shuffle(x, 3, rng), DimensionError);
    CHECK_THROWS_AS(segment_shuffle(x, 0, rng), DimensionError);
}

TEST_CASE("plans must be bijections") {
    Grid x(4, 4);
    PermutationPlan plan;
    plan.grid_side = 2;
    plan.perm = {0, 1, 1, 3};
    CHECK_THROWS_AS(apply_patch_permutation(x, plan), DimensionError);
}

TEST_SUITE_END();
