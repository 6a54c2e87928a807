#include "reliatta/scenario.hpp"

#include <cmath>

#include "reliatta/kernels.hpp"

namespace reliatta {

void ScenarioSpec::validate() const {
    if (num_classes < 2) throw ConfigError("scenario: num_classes must be >= 2");
    if (dim < 2) throw ConfigError("scenario: dim must be >= 2");
    if (input_h < 2 || input_w < 2) throw ConfigError("scenario: input size too small");
    if (input_h != input_w) throw ConfigError("scenario: inputs must be square");
    if (batch_size < 1) throw ConfigError("scenario: batch_size must be >= 1");
    if (patch_grid < 1 || input_h % patch_grid != 0 || input_w % patch_grid != 0) {
        throw ConfigError("scenario: patch_grid must divide the input size");
    }
    const bool has_phases = !phases.empty();
    const bool has_wild = wild.has_value();
    if (has_phases == has_wild) {
        throw ConfigError("scenario: exactly one of phases / wild must be given");
    }
    for (const Phase& p : phases) {
        if (p.batches < 0) throw ConfigError("scenario: phase batch count must be >= 0");
        if (!p.clean) {
            if (p.severity < 1 || p.severity > 5) {
                throw ConfigError("scenario: phase severity must be in {1..5}");
            }
            if (p.corrupted == Modality::Touch && !tactile_supported(p.kind)) {
                throw ConfigError(std::string("scenario: corruption '") +
                                  corruption_name(p.kind) +
                                  "' is not in the tactile set");
            }
        }
    }
    if (has_wild) {
        if (wild->batches < 0) throw ConfigError("scenario: wild batch count must be >= 0");
        if (wild->pool.empty()) throw ConfigError("scenario: wild pool is empty");
        for (const auto& [kind, severity] : wild->pool) {
            if (severity < 1 || severity > 5) {
                throw ConfigError("scenario: wild severity must be in {1..5}");
            }
            if (wild->corrupted == Modality::Touch && !tactile_supported(kind)) {
                throw ConfigError(std::string("scenario: corruption '") +
                                  corruption_name(kind) + "' is not in the tactile set");
            }
        }
    }
}

int ScenarioSpec::total_batches() const {
    if (wild) return wild->batches;
    int total = 0;
    for (const Phase& p : phases) total += p.batches;
    return total;
}

int ScenarioSpec::phase_at(int t) const {
    int offset = 0;
    for (int i = 0; i < static_cast<int>(phases.size()); ++i) {
        offset += phases[i].batches;
        if (t < offset) return i;
    }
    return -1;
}

std::string ScenarioSpec::phase_tag(int t) const {
    if (wild) return "wild";
    const int idx = phase_at(t);
    if (idx < 0) return "";
    const Phase& p = phases[idx];
    std::string tag = "p" + std::to_string(idx) + ".";
    if (p.clean) return tag + "clean";
    tag += corruption_name(p.kind);
    tag += ".";
    tag += p.corrupted == Modality::Vision ? "v" : "t";
    tag += ".s" + std::to_string(p.severity);
    return tag;
}

Mat generate_label_matrix(int num_classes, int dim, std::uint64_t seed,
                          double max_cosine) {
    if (num_classes < 2 || dim < 2) {
        throw ConfigError("label matrix: need K >= 2 and D >= 2");
    }
    Pcg32 rng = make_stream(seed, Purpose::Prototypes);
    Mat labels(num_classes, dim);
    int resamples = 0;
    for (int k = 0; k < num_classes; ++k) {
        for (;;) {
            Vec cand(dim);
            for (double& x : cand) x = rng.next_normal();
            Vec unit;
            try {
                unit = l2_normalize(cand);
            } catch (const DegenerateEmbeddingError&) {
                continue;  // astronomically unlikely; redraw
            }
            bool separated = true;
            for (int j = 0; j < k; ++j) {
                if (dot(labels.row(j), unit) >= max_cosine) {
                    separated = false;
                    break;
                }
            }
            if (separated) {
                std::copy(unit.begin(), unit.end(), labels.row(k).begin());
                break;
            }
            if (++resamples > 1000) {
                throw ConfigError(
                    "label matrix: separation infeasible after 1000 resamples "
                    "(num_classes too large for dim)");
            }
        }
    }
    return labels;
}

namespace {

// Smooth coarse structure plus a little fine noise, standardized to zero
// mean and unit variance so the corruption tables share one scale.
Grid make_pattern(int h, int w, const GeneratorParams& gen, Pcg32& rng) {
    Grid coarse(gen.pattern_coarse, gen.pattern_coarse);
    for (double& v : coarse.v) v = rng.next_normal();
    Grid out(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double sr = (r + 0.5) / h * gen.pattern_coarse - 0.5;
            const double src = (c + 0.5) / w * gen.pattern_coarse - 0.5;
            const int r0 = std::clamp(static_cast<int>(std::floor(sr)), 0, gen.pattern_coarse - 1);
            const int c0 = std::clamp(static_cast<int>(std::floor(src)), 0, gen.pattern_coarse - 1);
            const int r1 = std::min(r0 + 1, gen.pattern_coarse - 1);
            const int c1 = std::min(c0 + 1, gen.pattern_coarse - 1);
            const double fr = std::clamp(sr - r0, 0.0, 1.0);
            const double fc = std::clamp(src - c0, 0.0, 1.0);
            out.at(r, c) = coarse.at(r0, c0) * (1 - fr) * (1 - fc) +
                           coarse.at(r1, c0) * fr * (1 - fc) +
                           coarse.at(r0, c1) * (1 - fr) * fc +
                           coarse.at(r1, c1) * fr * fc;
        }
    }
    for (double& v : out.v) v += gen.pattern_fine_weight * rng.next_normal();
    double mean = 0.0;
    for (double v : out.v) mean += v;
    mean /= static_cast<double>(out.v.size());
    double var = 0.0;
    for (double v : out.v) var += (v - mean) * (v - mean);
    var /= static_cast<double>(out.v.size());
    const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (double& v : out.v) v = (v - mean) * scale;
    return out;
}

Vec flatten_unit(const Grid& g) {
    return l2_normalize(g.v);
}

Mat build_encoder(const Mat& labels, const std::vector<Grid>& patterns,
                  const GeneratorParams& gen, Pcg32& rng, int pixels) {
    const int dim = labels.cols;
    Mat enc(dim, pixels);
    const double background_sd = gen.background_gain / std::sqrt(static_cast<double>(pixels));
    for (double& v : enc.data) v = background_sd * rng.next_normal();
    for (int k = 0; k < labels.rows; ++k) {
        const Vec dir = flatten_unit(patterns[k]);
        for (int d = 0; d < dim; ++d) {
            const double coeff = gen.signal_gain * labels.at(k, d);
            double* row = enc.data.data() + static_cast<std::size_t>(d) * pixels;
            for (int p = 0; p < pixels; ++p) row[p] += coeff * dir[p];
        }
    }
    // DC channel: mean grid intensity lands on one fixed direction, leaning
    // toward a (seed-chosen) label row per dc_label_mix.
    Vec dc(dim);
    for (double& v : dc) v = rng.next_normal();
    dc = l2_normalize(dc);
    const int lean = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(labels.rows)));
    for (int d = 0; d < dim; ++d) {
        dc[d] = gen.dc_label_mix * labels.at(lean, d) + (1.0 - gen.dc_label_mix) * dc[d];
    }
    dc = l2_normalize(dc);
    for (int d = 0; d < dim; ++d) {
        const double coeff = gen.intensity_gain * dc[d] / static_cast<double>(pixels);
        double* row = enc.data.data() + static_cast<std::size_t>(d) * pixels;
        for (int p = 0; p < pixels; ++p) row[p] += coeff;
    }
    return enc;
}

}  // namespace

Prototypes generate_prototypes(int num_classes, int dim, int h, int w,
                               std::uint64_t seed, const GeneratorParams& gen) {
    Prototypes proto;
    proto.labels = generate_label_matrix(num_classes, dim, seed, gen.label_max_cosine);
    proto.vision_patterns.reserve(num_classes);
    proto.touch_patterns.reserve(num_classes);
    for (int k = 0; k < num_classes; ++k) {
        Pcg32 rv = make_stream(seed, Purpose::PatternBank, static_cast<std::uint64_t>(k), 0);
        Pcg32 rt = make_stream(seed, Purpose::PatternBank, static_cast<std::uint64_t>(k), 1);
        proto.vision_patterns.push_back(make_pattern(h, w, gen, rv));
        proto.touch_patterns.push_back(make_pattern(h, w, gen, rt));
    }
    return proto;
}

FrozenEncoder make_encoder(const Prototypes& proto, const GeneratorParams& gen,
                           std::uint64_t seed, int h, int w) {
    FrozenEncoder enc;
    Pcg32 rv = make_stream(seed, Purpose::Encoder, 0);
    Pcg32 rt = make_stream(seed, Purpose::Encoder, 1);
    enc.vision = build_encoder(proto.labels, proto.vision_patterns, gen, rv, h * w);
    enc.touch = build_encoder(proto.labels, proto.touch_patterns, gen, rt, h * w);
    return enc;
}

ScenarioStream::ScenarioStream(ScenarioSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    proto_ = generate_prototypes(spec_.num_classes, spec_.dim, spec_.input_h,
                                 spec_.input_w, spec_.seed, spec_.gen);
    encoder_ = make_encoder(proto_, spec_.gen, spec_.seed, spec_.input_h, spec_.input_w);
}

std::optional<GeneratedBatch> ScenarioStream::make_batch(int t) const {
    if (t < 0 || t >= spec_.total_batches()) return std::nullopt;

    const int n = spec_.batch_size;
    GeneratedBatch batch;
    batch.index = t;
    batch.phase = spec_.phase_tag(t);
    batch.samples.resize(n);
    batch.labels.resize(n);

    const Phase* phase = nullptr;
    if (!spec_.wild) phase = &spec_.phases[spec_.phase_at(t)];

    kernels::for_each_sample(n, [&](int i) {
        const std::uint64_t ti = static_cast<std::uint64_t>(t);
        const std::uint64_t si = static_cast<std::uint64_t>(i);
        RawSample& s = batch.samples[i];

        Pcg32 label_rng = make_stream(spec_.seed, Purpose::LabelDraw, ti, si);
        const int label = static_cast<int>(label_rng.next_below(
            static_cast<std::uint32_t>(spec_.num_classes)));
        batch.labels[i] = label;

        // Clean draws: class pattern plus additive noise.
        s.vision = proto_.vision_patterns[label];
        s.touch = proto_.touch_patterns[label];
        Pcg32 noise_v = make_stream(spec_.seed, Purpose::SampleNoise, ti, si * 2);
        Pcg32 noise_t = make_stream(spec_.seed, Purpose::SampleNoise, ti, si * 2 + 1);
        for (double& v : s.vision.v) v += spec_.gen.sample_noise * noise_v.next_normal();
        for (double& v : s.touch.v) v += spec_.gen.sample_noise * noise_t.next_normal();

        // Scenario corruption on exactly one modality.
        CorruptionKind kind = CorruptionKind::GaussianNoise;
        int severity = 0;
        Modality target = Modality::Touch;
        bool corrupt = false;
        if (spec_.wild) {
            Pcg32 kind_rng = make_stream(spec_.seed, Purpose::WildKindDraw, ti, si);
            const auto& pick = spec_.wild->pool[kind_rng.next_below(
                static_cast<std::uint32_t>(spec_.wild->pool.size()))];
            kind = pick.first;
            severity = pick.second;
            target = spec_.wild->corrupted;
            corrupt = true;
        } else if (!phase->clean) {
            kind = phase->kind;
            severity = phase->severity;
            target = phase->corrupted;
            corrupt = true;
        }
        if (corrupt) {
            Pcg32 crng = make_stream(spec_.seed, Purpose::CorruptionNoise, ti, si);
            if (target == Modality::Vision) {
                s.vision = apply_corruption(s.vision, kind, severity, crng, spec_.corruption);
                s.vision_corrupted = true;
            } else {
                s.touch = apply_corruption(s.touch, kind, severity, crng, spec_.corruption);
                s.touch_corrupted = true;
            }
        }

        // Perturbation probes come after corruption: they scramble the input
        // the model actually sees. One independent permutation per sample
        // per modality, recorded in the plan.
        Pcg32 pv = make_stream(spec_.seed, Purpose::PerturbVision, ti, si);
        Pcg32 pt = make_stream(spec_.seed, Purpose::PerturbTouch, ti, si);
        auto shuffled_v = segment_shuffle(s.vision, spec_.patch_grid, pv);
        s.vision_pert = std::move(shuffled_v.first);
        s.plan_v = std::move(shuffled_v.second);
        s.plan_v.seed = (ti << 32) | si;
        auto shuffled_t = segment_shuffle(s.touch, spec_.patch_grid, pt);
        s.touch_pert = std::move(shuffled_t.first);
        s.plan_t = std::move(shuffled_t.second);
        s.plan_t.seed = (ti << 32) | si;
    });
    return batch;
}

EncodedBatch ScenarioStream::encode(const GeneratedBatch& batch) const {
    const int n = static_cast<int>(batch.samples.size());
    std::vector<Vec> raw_v(n), raw_t(n), raw_vp(n), raw_tp(n);
    for (int i = 0; i < n; ++i) {
        raw_v[i] = batch.samples[i].vision.v;
        raw_t[i] = batch.samples[i].touch.v;
        raw_vp[i] = batch.samples[i].vision_pert.v;
        raw_tp[i] = batch.samples[i].touch_pert.v;
    }
    EncodedBatch out;
    out.phase = batch.phase;
    kernels::batch_matvec(encoder_.vision, raw_v, out.clean_v);
    kernels::batch_matvec(encoder_.touch, raw_t, out.clean_t);
    kernels::batch_matvec(encoder_.vision, raw_vp, out.pert_v);
    kernels::batch_matvec(encoder_.touch, raw_tp, out.pert_t);
    return out;
}

}  // namespace reliatta
