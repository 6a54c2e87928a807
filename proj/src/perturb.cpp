#include "reliatta/perturb.hpp"

#include <numeric>

namespace reliatta {

namespace {

void validate_plan(const Grid& x, const PermutationPlan& plan) {
    const int g = plan.grid_side;
    if (g < 1) throw DimensionError("patch permutation: grid side must be >= 1");
    if (x.h % g != 0 || x.w % g != 0) {
        throw DimensionError("patch permutation: H and W must be divisible by the grid side");
    }
    const int k = g * g;
    if (static_cast<int>(plan.perm.size()) != k) {
        throw DimensionError("patch permutation: plan length != g*g");
    }
    std::vector<bool> seen(k, false);
    for (int p : plan.perm) {
        if (p < 0 || p >= k || seen[p]) {
            throw DimensionError("patch permutation: plan is not a bijection");
        }
        seen[p] = true;
    }
}

}  // namespace

Grid apply_patch_permutation(const Grid& x, const PermutationPlan& plan) {
    validate_plan(x, plan);
    const int g = plan.grid_side;
    const int ph = x.h / g;
    const int pw = x.w / g;
    Grid out(x.h, x.w);
    for (int p = 0; p < g * g; ++p) {
        const int src = plan.perm[p];
        const int dr = (p / g) * ph;
        const int dc = (p % g) * pw;
        const int sr = (src / g) * ph;
        const int sc = (src % g) * pw;
        for (int r = 0; r < ph; ++r) {
            for (int c = 0; c < pw; ++c) {
                out.at(dr + r, dc + c) = x.at(sr + r, sc + c);
            }
        }
    }
    return out;
}

std::pair<Grid, PermutationPlan> segment_shuffle(const Grid& x, int grid_side, Pcg32& rng) {
    if (grid_side < 1) throw DimensionError("segment_shuffle: grid side must be >= 1");
    if (x.h % grid_side != 0 || x.w % grid_side != 0) {
        throw DimensionError("segment_shuffle: H and W must be divisible by the grid side");
    }
    const int k = grid_side * grid_side;
    PermutationPlan plan;
    plan.grid_side = grid_side;
    plan.perm.resize(k);
    std::iota(plan.perm.begin(), plan.perm.end(), 0);
    if (k > 1) {
        // Fisher-Yates, redrawn until non-identity: an identity draw would
        // zero the confidence-variation signal.
        do {
            std::iota(plan.perm.begin(), plan.perm.end(), 0);
            for (int i = k - 1; i > 0; --i) {
                const int j = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(i + 1)));
                std::swap(plan.perm[i], plan.perm[j]);
            }
        } while (plan.is_identity());
    }
    return {apply_patch_permutation(x, plan), plan};
}

std::pair<RawInput, PermutationPlan> segment_shuffle(const RawInput& x, int grid_side,
                                                     Pcg32& rng) {
    auto [grid, plan] = segment_shuffle(x.grid, grid_side, rng);
    return {RawInput{x.modality, std::move(grid)}, plan};
}

}  // namespace reliatta
