#pragma once
// Synthetic two-modality benchmark: class prototypes (label embeddings plus
// per-modality pattern banks), frozen linear encoders, and deterministic
// batch streams under either a sequential corruption schedule or a per-
// sample wild mix. Exactly one modality is corrupted at a time.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reliatta/adapt.hpp"
#include "reliatta/corruption.hpp"
#include "reliatta/perturb.hpp"
#include "reliatta/rng.hpp"

namespace reliatta {

// Defaults put embedding norms near 1 so that, with the default
// log-temperature, both affinity paths (raw and normalized) operate in the
// mid-confidence band where the reliability indicators are informative.
struct GeneratorParams {
    double sample_noise = 0.5;       // additive draw noise on patterns
    double signal_gain = 0.06;       // class-signal strength in the encoder
    double background_gain = 0.10;   // random-map strength in the encoder
    // DC response: encoders map the grid's mean intensity onto a fixed
    // per-modality direction, the way exposure moves a real sensor's
    // embedding. Exposure-type corruptions travel through this channel.
    double intensity_gain = 1.0;
    // How much the DC direction leans toward a label row. Overexposed
    // sensors read as a plausible class to a zero-shot head, not as
    // uniform noise; 0 keeps the direction fully random.
    double dc_label_mix = 0.7;
    double pattern_fine_weight = 0.3;  // high-frequency share of each pattern
    int pattern_coarse = 4;          // coarse grid side of the smooth share
    double label_max_cosine = 0.8;
};

struct Phase {
    bool clean = false;  // no corruption in this phase
    Modality corrupted = Modality::Touch;
    CorruptionKind kind = CorruptionKind::GaussianNoise;
    int severity = 3;
    int batches = 1;
};

// Per-sample (kind, severity) draws from a fixed pool, one modality shifted.
struct WildMix {
    Modality corrupted = Modality::Touch;
    std::vector<std::pair<CorruptionKind, int>> pool;
    int batches = 1;
};

struct ScenarioSpec {
    int num_classes = 10;
    int dim = 32;
    int input_h = 16;
    int input_w = 16;
    std::uint64_t seed = 1;
    int batch_size = 64;
    int patch_grid = 2;  // segment-shuffle grid side for the probes
    std::vector<Phase> phases;      // continuous mode
    std::optional<WildMix> wild;    // wild mode (mutually exclusive)
    GeneratorParams gen;
    CorruptionTable corruption = CorruptionTable::defaults();

    void validate() const;
    int total_batches() const;
    // Index of the phase covering batch t (continuous mode only).
    int phase_at(int t) const;
    std::string phase_tag(int t) const;
};

struct Prototypes {
    Mat labels;  // K x D unit rows, pairwise cosine below the configured cap
    std::vector<Grid> vision_patterns;
    std::vector<Grid> touch_patterns;
};

// Unit label rows with pairwise cosine similarity < max_cosine, resampled on
// violation. Throws ConfigError when 1000 resamples cannot satisfy the cap.
Mat generate_label_matrix(int num_classes, int dim, std::uint64_t seed,
                          double max_cosine = 0.8);

Prototypes generate_prototypes(int num_classes, int dim, int h, int w,
                               std::uint64_t seed, const GeneratorParams& gen);

// Frozen per-modality linear maps D x (H*W). Built so each class pattern
// lands near its label row (signal_gain) on top of a random background map
// (background_gain); a map with no class structure would make the zero-shot
// head vacuous.
struct FrozenEncoder {
    Mat vision;
    Mat touch;
};

FrozenEncoder make_encoder(const Prototypes& proto, const GeneratorParams& gen,
                           std::uint64_t seed, int h, int w);

struct RawSample {
    Grid vision, touch;            // scenario inputs (possibly corrupted)
    Grid vision_pert, touch_pert;  // segment-shuffled probes
    PermutationPlan plan_v, plan_t;
    bool vision_corrupted = false;
    bool touch_corrupted = false;
};

struct GeneratedBatch {
    int index = 0;
    std::string phase;
    std::vector<RawSample> samples;
    std::vector<int> labels;  // evaluation-only view; never reaches adapt_step
};

// Deterministic stream: (spec, t) fully determines every batch bitwise.
class ScenarioStream {
public:
    explicit ScenarioStream(ScenarioSpec spec);

    const ScenarioSpec& spec() const { return spec_; }
    const Prototypes& prototypes() const { return proto_; }
    const FrozenEncoder& encoder() const { return encoder_; }
    int total_batches() const { return spec_.total_batches(); }

    // nullopt once the schedule is exhausted.
    std::optional<GeneratedBatch> make_batch(int t) const;

    // Frozen-encoder forward for all four views; labels stay behind.
    EncodedBatch encode(const GeneratedBatch& batch) const;

private:
    ScenarioSpec spec_;
    Prototypes proto_;
    FrozenEncoder encoder_;
};

}  // namespace reliatta
