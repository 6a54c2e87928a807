#pragma once
// Segment-shuffle perturbation: partition a square grid into g x g patches
// and reassemble them under a random non-identity permutation. Used to probe
// how much a prediction leans on spatial structure.

#include <cstdint>
#include <utility>
#include <vector>

#include "reliatta/core.hpp"
#include "reliatta/rng.hpp"

namespace reliatta {

enum class Modality { Vision, Touch };

inline const char* modality_name(Modality m) {
    return m == Modality::Vision ? "vision" : "touch";
}

// Single-channel sensor image, row-major.
struct Grid {
    int h = 0;
    int w = 0;
    Vec v;

    Grid() = default;
    Grid(int height, int width) : h(height), w(width), v(static_cast<std::size_t>(height) * width, 0.0) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
    std::size_t size() const { return v.size(); }
};

struct RawInput {
    Modality modality = Modality::Vision;
    Grid grid;
};

// Recorded permutation: patch i of the output takes patch perm[i] of the
// input, with patches indexed row-major over the g x g grid.
struct PermutationPlan {
    int grid_side = 1;
    std::vector<int> perm;
    std::uint64_t seed = 0;

    bool is_identity() const {
        for (int i = 0; i < static_cast<int>(perm.size()); ++i) {
            if (perm[i] != i) return false;
        }
        return true;
    }
};

// Applies a recorded plan. Throws DimensionError when the grid side does not
// divide H and W or the plan is not a bijection on {0..g*g-1}.
Grid apply_patch_permutation(const Grid& x, const PermutationPlan& plan);

// Draws a plan uniformly over the non-identity permutations (identity when
// g == 1, where it is the only one) and applies it. The input is left
// untouched; the draw consumes only from `rng`.
std::pair<Grid, PermutationPlan> segment_shuffle(const Grid& x, int grid_side, Pcg32& rng);

std::pair<RawInput, PermutationPlan> segment_shuffle(const RawInput& x, int grid_side,
                                                     Pcg32& rng);

}  // namespace reliatta
