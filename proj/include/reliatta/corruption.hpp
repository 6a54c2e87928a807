#pragma once
// Synthetic corruption suite for small single-channel grids: 15 visual
// kinds, of which 7 apply to the tactile stream. Parameter tables are
// artifact defaults (overridable from config); the binding contract is that
// distortion grows strictly with severity, not per-kind visual fidelity.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reliatta/perturb.hpp"
#include "reliatta/rng.hpp"

namespace reliatta {

enum class CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    DefocusBlur,
    GlassBlur,
    MotionBlur,
    ZoomBlur,
    Snow,
    Frost,
    Fog,
    Brightness,
    Contrast,
    Elastic,
    Pixelate,
    Jpeg,
};

const char* corruption_name(CorruptionKind kind);
std::optional<CorruptionKind> corruption_from_name(const std::string& name);

// All 15 kinds.
const std::vector<CorruptionKind>& visual_corruptions();
// The 7-kind tactile subset: gaussian/impulse noise, defocus/motion blur,
// brightness, contrast, elastic.
const std::vector<CorruptionKind>& tactile_corruptions();
bool tactile_supported(CorruptionKind kind);

// One magnitude per severity level 1..5 (index 0 = severity 1).
struct CorruptionTable {
    std::map<CorruptionKind, std::array<double, 5>> magnitude;

    static CorruptionTable defaults();
    double at(CorruptionKind kind, int severity) const;
};

// Applies `kind` at `severity` in {1..5}. Severity 0 is a below-level-1 test
// hook that returns the input unchanged. Stochastic kinds draw only from
// `rng`, so callers control realizations; feeding the same stream at two
// severities yields coupled draws (same noise field, larger magnitude).
Grid apply_corruption(const Grid& x, CorruptionKind kind, int severity, Pcg32& rng,
                      const CorruptionTable& table = CorruptionTable::defaults());

}  // namespace reliatta
