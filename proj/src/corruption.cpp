#include "reliatta/corruption.hpp"

#include <algorithm>
#include <cmath>

namespace reliatta {

namespace {

struct KindName {
    CorruptionKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {CorruptionKind::GaussianNoise, "gaussian_noise"},
    {CorruptionKind::ShotNoise, "shot_noise"},
    {CorruptionKind::ImpulseNoise, "impulse_noise"},
    {CorruptionKind::DefocusBlur, "defocus_blur"},
    {CorruptionKind::GlassBlur, "glass_blur"},
    {CorruptionKind::MotionBlur, "motion_blur"},
    {CorruptionKind::ZoomBlur, "zoom_blur"},
    {CorruptionKind::Snow, "snow"},
    {CorruptionKind::Frost, "frost"},
    {CorruptionKind::Fog, "fog"},
    {CorruptionKind::Brightness, "brightness"},
    {CorruptionKind::Contrast, "contrast"},
    {CorruptionKind::Elastic, "elastic"},
    {CorruptionKind::Pixelate, "pixelate"},
    {CorruptionKind::Jpeg, "jpeg"},
};

double clampd(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

// Bilinear sample with clamped coordinates.
double sample_bilinear(const Grid& g, double r, double c) {
    r = clampd(r, 0.0, g.h - 1.0);
    c = clampd(c, 0.0, g.w - 1.0);
    const int r0 = static_cast<int>(std::floor(r));
    const int c0 = static_cast<int>(std::floor(c));
    const int r1 = std::min(r0 + 1, g.h - 1);
    const int c1 = std::min(c0 + 1, g.w - 1);
    const double fr = r - r0;
    const double fc = c - c0;
    return g.at(r0, c0) * (1 - fr) * (1 - fc) + g.at(r1, c0) * fr * (1 - fc) +
           g.at(r0, c1) * (1 - fr) * fc + g.at(r1, c1) * fr * fc;
}

// Separable Gaussian blur with reflected borders.
Grid gaussian_blur(const Grid& x, double sigma) {
    if (sigma <= 0.0) return x;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - i - 1;
        }
        return i;
    };
    Grid tmp(x.h, x.w), out(x.h, x.w);
    for (int r = 0; r < x.h; ++r) {
        for (int c = 0; c < x.w; ++c) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                s += kernel[i + radius] * x.at(r, reflect(c + i, x.w));
            }
            tmp.at(r, c) = s;
        }
    }
    for (int r = 0; r < x.h; ++r) {
        for (int c = 0; c < x.w; ++c) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                s += kernel[i + radius] * tmp.at(reflect(r + i, x.h), c);
            }
            out.at(r, c) = s;
        }
    }
    return out;
}

// Smooth random field in roughly [-1, 1]: coarse normals upsampled
// bilinearly.
Grid smooth_field(int h, int w, int coarse, Pcg32& rng) {
    Grid base(coarse, coarse);
    for (double& v : base.v) v = rng.next_normal();
    Grid out(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double sr = (r + 0.5) / h * coarse - 0.5;
            const double sc = (c + 0.5) / w * coarse - 0.5;
            out.at(r, c) = sample_bilinear(base, sr, sc);
        }
    }
    return out;
}

double grid_mean(const Grid& x) {
    double s = 0.0;
    for (double v : x.v) s += v;
    return s / static_cast<double>(x.v.size());
}

}  // namespace

const char* corruption_name(CorruptionKind kind) {
    for (const auto& kn : kKindNames) {
        if (kn.kind == kind) return kn.name;
    }
    return "unknown";
}

std::optional<CorruptionKind> corruption_from_name(const std::string& name) {
    for (const auto& kn : kKindNames) {
        if (name == kn.name) return kn.kind;
    }
    return std::nullopt;
}

const std::vector<CorruptionKind>& visual_corruptions() {
    static const std::vector<CorruptionKind> kinds = [] {
        std::vector<CorruptionKind> v;
        for (const auto& kn : kKindNames) v.push_back(kn.kind);
        return v;
    }();
    return kinds;
}

const std::vector<CorruptionKind>& tactile_corruptions() {
    static const std::vector<CorruptionKind> kinds = {
        CorruptionKind::GaussianNoise, CorruptionKind::ImpulseNoise,
        CorruptionKind::DefocusBlur,   CorruptionKind::MotionBlur,
        CorruptionKind::Brightness,    CorruptionKind::Contrast,
        CorruptionKind::Elastic,
    };
    return kinds;
}

bool tactile_supported(CorruptionKind kind) {
    const auto& t = tactile_corruptions();
    return std::find(t.begin(), t.end(), kind) != t.end();
}

CorruptionTable CorruptionTable::defaults() {
    CorruptionTable t;
    // Grids are unit-variance patterns behind a linear encoder; noise has to
    // rival the pattern norm to damage the class signal, hence the scale.
    t.magnitude[CorruptionKind::GaussianNoise] = {2.0, 4.0, 8.0, 12.0, 16.0};
    t.magnitude[CorruptionKind::ShotNoise] = {1.8, 3.5, 7.0, 10.0, 14.0};
    t.magnitude[CorruptionKind::ImpulseNoise] = {0.08, 0.16, 0.28, 0.42, 0.60};
    t.magnitude[CorruptionKind::DefocusBlur] = {0.6, 0.9, 1.3, 1.9, 2.6};
    t.magnitude[CorruptionKind::GlassBlur] = {0.5, 0.9, 1.4, 2.0, 2.8};
    t.magnitude[CorruptionKind::MotionBlur] = {2.0, 3.0, 4.0, 6.0, 8.0};
    t.magnitude[CorruptionKind::ZoomBlur] = {2.0, 4.0, 6.0, 8.0, 10.0};
    t.magnitude[CorruptionKind::Snow] = {0.04, 0.08, 0.12, 0.17, 0.24};
    t.magnitude[CorruptionKind::Frost] = {0.5, 0.8, 1.2, 1.7, 2.3};
    t.magnitude[CorruptionKind::Fog] = {0.15, 0.25, 0.35, 0.47, 0.60};
    t.magnitude[CorruptionKind::Brightness] = {0.8, 1.4, 2.2, 3.2, 4.5};
    t.magnitude[CorruptionKind::Contrast] = {0.60, 0.45, 0.32, 0.22, 0.14};
    t.magnitude[CorruptionKind::Elastic] = {0.8, 1.3, 1.9, 2.6, 3.4};
    t.magnitude[CorruptionKind::Pixelate] = {2.0, 3.0, 4.0, 6.0, 8.0};
    t.magnitude[CorruptionKind::Jpeg] = {0.30, 0.55, 0.85, 1.25, 1.80};
    return t;
}

double CorruptionTable::at(CorruptionKind kind, int severity) const {
    if (severity < 1 || severity > 5) {
        throw ConfigError("corruption severity must be in {1..5}");
    }
    auto it = magnitude.find(kind);
    if (it == magnitude.end()) throw ConfigError("corruption kind missing from table");
    return it->second[severity - 1];
}

Grid apply_corruption(const Grid& x, CorruptionKind kind, int severity, Pcg32& rng,
                      const CorruptionTable& table) {
    if (severity == 0) return x;  // below-level-1 hook: identity
    const double m = table.at(kind, severity);
    const int h = x.h, w = x.w;

    switch (kind) {
        case CorruptionKind::GaussianNoise: {
            Grid out = x;
            for (double& v : out.v) v += m * rng.next_normal();
            return out;
        }
        case CorruptionKind::ShotNoise: {
            // Signal-dependent noise: stronger where the signal is stronger.
            Grid out = x;
            for (double& v : out.v) v += m * std::sqrt(std::abs(v) + 0.25) * rng.next_normal();
            return out;
        }
        case CorruptionKind::ImpulseNoise: {
            // Threshold draw per pixel: larger severity affects a superset
            // of the pixels hit at lower severity under the same stream.
            Grid out = x;
            for (double& v : out.v) {
                const double u = rng.next_double();
                const double sign = rng.next_double() < 0.5 ? -1.0 : 1.0;
                if (u < m) v = sign * 4.5;
            }
            return out;
        }
        case CorruptionKind::DefocusBlur:
            return gaussian_blur(x, m);
        case CorruptionKind::GlassBlur: {
            // Local shuffling: each pixel pulls from a random fractional
            // offset scaled by the severity magnitude.
            Grid out(h, w);
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    const double dr = m * rng.next_uniform(-1.0, 1.0);
                    const double dc = m * rng.next_uniform(-1.0, 1.0);
                    out.at(r, c) = sample_bilinear(x, r + dr, c + dc);
                }
            }
            return gaussian_blur(out, 0.4);
        }
        case CorruptionKind::MotionBlur: {
            const double angle = rng.next_uniform(0.0, std::numbers::pi);
            const double dr = std::sin(angle);
            const double dc = std::cos(angle);
            const int taps = std::max(2, static_cast<int>(std::round(m)));
            Grid out(h, w);
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    double s = 0.0;
                    for (int t = 0; t < taps; ++t) {
                        const double offset = t - (taps - 1) / 2.0;
                        s += sample_bilinear(x, r + offset * dr, c + offset * dc);
                    }
                    out.at(r, c) = s / taps;
                }
            }
            return out;
        }
        case CorruptionKind::ZoomBlur: {
            const int steps = std::max(2, static_cast<int>(std::round(m)));
            const double cr = (h - 1) / 2.0;
            const double cc = (w - 1) / 2.0;
            Grid out(h, w);
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    double s = 0.0;
                    for (int t = 0; t < steps; ++t) {
                        const double zoom = 1.0 + 0.03 * t;
                        s += sample_bilinear(x, cr + (r - cr) / zoom, cc + (c - cc) / zoom);
                    }
                    out.at(r, c) = s / steps;
                }
            }
            return out;
        }
        case CorruptionKind::Snow: {
            Grid out = x;
            for (double& v : out.v) {
                const double u = rng.next_double();
                const double bright = 0.7 + 0.3 * rng.next_double();
                if (u < m) v += 2.5 * bright;
            }
            return out;
        }
        case CorruptionKind::Frost: {
            Grid field = smooth_field(h, w, 4, rng);
            Grid out = x;
            for (std::size_t i = 0; i < out.v.size(); ++i) {
                out.v[i] += m * std::abs(field.v[i]);
            }
            return out;
        }
        case CorruptionKind::Fog: {
            Grid field = smooth_field(h, w, 4, rng);
            Grid out = x;
            for (std::size_t i = 0; i < out.v.size(); ++i) {
                const double haze = 1.5 + 0.3 * field.v[i];
                out.v[i] = out.v[i] * (1.0 - m) + haze * m;
            }
            return out;
        }
        case CorruptionKind::Brightness: {
            Grid out = x;
            for (double& v : out.v) v += m;
            return out;
        }
        case CorruptionKind::Contrast: {
            const double mean = grid_mean(x);
            Grid out = x;
            for (double& v : out.v) v = mean + (v - mean) * m;
            return out;
        }
        case CorruptionKind::Elastic: {
            Grid dr = smooth_field(h, w, 4, rng);
            Grid dc = smooth_field(h, w, 4, rng);
            Grid out(h, w);
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    out.at(r, c) = sample_bilinear(x, r + m * dr.at(r, c), c + m * dc.at(r, c));
                }
            }
            return out;
        }
        case CorruptionKind::Pixelate: {
            const int block = std::max(2, static_cast<int>(std::round(m)));
            Grid out(h, w);
            for (int r0 = 0; r0 < h; r0 += block) {
                for (int c0 = 0; c0 < w; c0 += block) {
                    const int r1 = std::min(r0 + block, h);
                    const int c1 = std::min(c0 + block, w);
                    double s = 0.0;
                    for (int r = r0; r < r1; ++r) {
                        for (int c = c0; c < c1; ++c) s += x.at(r, c);
                    }
                    s /= (r1 - r0) * (c1 - c0);
                    for (int r = r0; r < r1; ++r) {
                        for (int c = c0; c < c1; ++c) out.at(r, c) = s;
                    }
                }
            }
            return out;
        }
        case CorruptionKind::Jpeg: {
            // Block-quantization stand-in: block means survive, residuals
            // snap to a grid whose step grows with severity.
            const int block = 4;
            Grid out(h, w);
            for (int r0 = 0; r0 < h; r0 += block) {
                for (int c0 = 0; c0 < w; c0 += block) {
                    const int r1 = std::min(r0 + block, h);
                    const int c1 = std::min(c0 + block, w);
                    double mean = 0.0;
                    for (int r = r0; r < r1; ++r) {
                        for (int c = c0; c < c1; ++c) mean += x.at(r, c);
                    }
                    mean /= (r1 - r0) * (c1 - c0);
                    for (int r = r0; r < r1; ++r) {
                        for (int c = c0; c < c1; ++c) {
                            const double res = x.at(r, c) - mean;
                            out.at(r, c) = mean + std::round(res / m) * m;
                        }
                    }
                }
            }
            return out;
        }
    }
    throw ConfigError("unknown corruption kind");
}

}  // namespace reliatta
