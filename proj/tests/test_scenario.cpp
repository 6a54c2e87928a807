#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "reliatta/scenario.hpp"

using namespace reliatta;

TEST_SUITE_BEGIN("scenario");

namespace {

ScenarioSpec continuous_spec(std::uint64_t seed = 5) {
    ScenarioSpec spec;
    spec.num_classes = 6;
    spec.dim = 16;
    spec.seed = seed;
    spec.batch_size = 8;
    Phase clean;
    clean.clean = true;
    clean.batches = 2;
    Phase noisy;
    noisy.corrupted = Modality::Touch;
    noisy.kind = CorruptionKind::GaussianNoise;
    noisy.severity = 3;
    noisy.batches = 2;
    spec.phases = {clean, noisy};
    return spec;
}

}  // namespace

TEST_CASE("label rows are unit norm and separated") {
    const Mat labels = generate_label_matrix(10, 32, 3);
    for (int r = 0; r < labels.rows; ++r) {
        CHECK(std::abs(l2_norm(labels.row(r)) - 1.0) < 1e-9);
        for (int q = 0; q < r; ++q) {
            CHECK(dot(labels.row(r), labels.row(q)) < 0.8);
        }
    }
}

TEST_CASE("infeasible separation raises a configuration error") {
    // 40 rows in 2 dimensions cannot all stay below cosine 0.8.
    CHECK_THROWS_AS(generate_label_matrix(40, 2, 3), ConfigError);
}

TEST_CASE("pairwise cosines verified by an independent dot-product pass") {
    const Mat labels = generate_label_matrix(10, 32, 9);
    for (int a = 0; a < labels.rows; ++a) {
        for (int b = 0; b < labels.rows; ++b) {
            long double s = 0.0L;
            for (int c = 0; c < labels.cols; ++c) {
                s += static_cast<long double>(labels.at(a, c)) * labels.at(b, c);
            }
            if (a == b) {
                CHECK(std::abs(static_cast<double>(s) - 1.0) < 1e-9);
            } else {
                CHECK(static_cast<double>(s) < 0.8);
            }
        }
    }
}

TEST_CASE("prototype banks are deterministic in the seed") {
    const GeneratorParams gen;
    const Prototypes a = generate_prototypes(4, 8, 16, 16, 77, gen);
    const Prototypes b = generate_prototypes(4, 8, 16, 16, 77, gen);
    CHECK(a.labels.data == b.labels.data);
    for (int k = 0; k < 4; ++k) {
        CHECK(a.vision_patterns[k].v == b.vision_patterns[k].v);
        CHECK(a.touch_patterns[k].v == b.touch_patterns[k].v);
    }
    const Prototypes c = generate_prototypes(4, 8, 16, 16, 78, gen);
    CHECK(a.labels.data != c.labels.data);
}

TEST_CASE("patterns are standardized per grid") {
    const Prototypes proto = generate_prototypes(3, 8, 16, 16, 5, GeneratorParams{});
    for (const Grid& g : proto.vision_patterns) {
        double mean = 0.0;
        for (double v : g.v) mean += v;
        mean /= g.v.size();
        double var = 0.0;
        for (double v : g.v) var += (v - mean) * (v - mean);
        var /= g.v.size();
        CHECK(std::abs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("scenario validation enforces exactly one mode") {
    ScenarioSpec spec = continuous_spec();
    WildMix wild;
    wild.corrupted = Modality::Vision;
    wild.pool = {{CorruptionKind::Fog, 3}};
    wild.batches = 2;
    spec.wild = wild;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.phases.clear();
    CHECK_NOTHROW(spec.validate());
    spec.wild.reset();
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("tactile phases reject non-tactile kinds") {
    ScenarioSpec spec = continuous_spec();
    spec.phases[1].kind = CorruptionKind::Fog;  // weather is vision-only
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.phases[1].corrupted = Modality::Vision;
    CHECK_NOTHROW(spec.validate());
}

TEST_CASE("continuous schedules tag batches by phase") {
    const ScenarioSpec spec = continuous_spec();
    ScenarioStream stream(spec);
    CHECK(stream.total_batches() == 4);
    CHECK(stream.make_batch(0)->phase == "p0.clean");
    CHECK(stream.make_batch(1)->phase == "p0.clean");
    CHECK(stream.make_batch(2)->phase == "p1.gaussian_noise.t.s3");
    CHECK(stream.make_batch(3)->phase == "p1.gaussian_noise.t.s3");
    CHECK(!stream.make_batch(4).has_value());  // end of stream
}

TEST_CASE("at most one modality is corrupted per continuous batch") {
    ScenarioStream stream(continuous_spec());
    for (int t = 0; t < stream.total_batches(); ++t) {
        const auto batch = stream.make_batch(t);
        for (const RawSample& s : batch->samples) {
            CHECK(!(s.vision_corrupted && s.touch_corrupted));
            if (t < 2) {
                CHECK(!s.vision_corrupted);
                CHECK(!s.touch_corrupted);
            } else {
                CHECK(s.touch_corrupted);
            }
        }
    }
}

TEST_CASE("the stream is bitwise deterministic in (spec, t)") {
    ScenarioStream s1(continuous_spec(21));
    ScenarioStream s2(continuous_spec(21));
    for (int t = 0; t < 4; ++t) {
        const auto a = s1.make_batch(t);
        const auto b = s2.make_batch(t);
        CHECK(a->labels == b->labels);
        for (std::size_t i = 0; i < a->samples.size(); ++i) {
            CHECK(a->samples[i].vision.v == b->samples[i].vision.v);
            CHECK(a->samples[i].touch.v == b->samples[i].touch.v);
            CHECK(a->samples[i].vision_pert.v == b->samples[i].vision_pert.v);
            CHECK(a->samples[i].touch_pert.v == b->samples[i].touch_pert.v);
        }
        const EncodedBatch ea = s1.encode(*a);
        const EncodedBatch eb = s2.encode(*b);
        CHECK(ea.clean_v == eb.clean_v);
        CHECK(ea.pert_t == eb.pert_t);
    }
}

TEST_CASE("perturbed grids conserve the corrupted content") {
    ScenarioStream stream(continuous_spec(31));
    const auto batch = stream.make_batch(2);
    for (const RawSample& s : batch->samples) {
        Vec a = s.touch.v, b = s.touch_pert.v;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
        CHECK(!s.plan_t.is_identity());
    }
}

TEST_CASE("wild mode draws kinds roughly uniformly") {
    ScenarioSpec spec;
    spec.num_classes = 4;
    spec.dim = 8;
    spec.seed = 17;
    spec.batch_size = 100;
    WildMix wild;
    wild.corrupted = Modality::Vision;
    wild.pool = {{CorruptionKind::GaussianNoise, 3},
                 {CorruptionKind::Fog, 3},
                 {CorruptionKind::Brightness, 3}};
    wild.batches = 10;
    spec.wild = wild;
    ScenarioStream stream(spec);

    // Kind draws are keyed by (batch, sample); count them via the recorded
    // per-sample streams by regenerating the draw.
    std::map<int, int> counts;
    int total = 0;
    for (int t = 0; t < 10; ++t) {
        for (int i = 0; i < spec.batch_size; ++i) {
            Pcg32 rng = make_stream(spec.seed, Purpose::WildKindDraw,
                                    static_cast<std::uint64_t>(t),
                                    static_cast<std::uint64_t>(i));
            counts[static_cast<int>(rng.next_below(3))] += 1;
            total += 1;
        }
    }
    CHECK(total == 1000);
    for (const auto& [kind, count] : counts) {
        const double frequency = static_cast<double>(count) / total;
        CHECK(std::abs(frequency - 1.0 / 3.0) < 0.05);
    }
}

TEST_CASE("clean batches reach high zero-shot accuracy through the encoder") {
    // Sanity check on the synthetic world: the frozen encoder plus label
    // head must classify clean draws well above chance, or the benchmark
    // cannot separate methods.
    ScenarioSpec spec = continuous_spec(41);
    spec.num_classes = 10;
    spec.dim = 32;
    spec.batch_size = 64;
    spec.phases[0].batches = 3;
    spec.phases[1].batches = 0;
    ScenarioStream stream(spec);
    const Mat& labels = stream.prototypes().labels;

    int correct = 0, total = 0;
    for (int t = 0; t < 3; ++t) {
        const auto batch = stream.make_batch(t);
        const EncodedBatch encoded = stream.encode(*batch);
        AffinityHead head(0.0, labels);
        for (int i = 0; i < encoded.size(); ++i) {
            Vec fused(spec.dim);
            const Vec uv = l2_normalize(encoded.clean_v[i]);
            const Vec ut = l2_normalize(encoded.clean_t[i]);
            for (int c = 0; c < spec.dim; ++c) fused[c] = 0.5 * (uv[c] + ut[c]);
            const Vec z = affinity_vector(fused, head, true);
            if (argmax(z) == batch->labels[i]) ++correct;
            ++total;
        }
    }
    const double accuracy = static_cast<double>(correct) / total;
    CHECK(accuracy > 0.6);
}

TEST_SUITE_END();
