#pragma once

// Marker detection and sparse pyramidal Lucas-Kanade tracking.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tactile/error.hpp"
#include "tactile/geometry.hpp"
#include "tactile/image.hpp"

namespace tactile {

struct MarkerSet {
    std::vector<Vec2> centroids;
    int detection_threshold = -1;  // pixels <= threshold are foreground; -1 when the image is flat
};

struct FlowEntry {
    Vec2 base;
    Vec2 delta;
    bool valid = false;
    double residual = 0.0;
};

struct FlowField {
    std::vector<FlowEntry> entries;

    std::size_t valid_count() const noexcept {
        return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const FlowEntry& e) { return e.valid; }));
    }
};

struct TrackConfig {
    int window_half = 7;
    int pyramid_levels = 3;
    int max_iterations = 20;
    double epsilon = 0.01;  // px
    /// Minimum eigenvalue of the window structure tensor, normalized per
    /// window pixel, in (intensity / px)^2.
    double min_eigen = 1.0;
};

inline void validate(const TrackConfig& c) {
    if (c.window_half < 2) throw Error(Errc::invalid_config, "window_half must be >= 2");
    if (c.pyramid_levels < 1) throw Error(Errc::invalid_config, "pyramid_levels must be >= 1");
    if (c.max_iterations < 1) throw Error(Errc::invalid_config, "max_iterations must be >= 1");
    if (!(c.epsilon > 0.0)) throw Error(Errc::invalid_config, "epsilon must be > 0");
    if (!(c.min_eigen >= 0.0)) throw Error(Errc::invalid_config, "min_eigen must be >= 0");
}

// ---------------------------------------------------------------------------
// Marker detection

/// Otsu split of the 8-bit histogram. Returns the largest intensity of the
/// dark class, or -1 when the image holds a single intensity.
inline int otsu_threshold(const GelImage& img) {
    std::array<double, 256> hist{};
    for (auto p : img.pixels) hist[p] += 1.0;
    const double total = static_cast<double>(img.pixels.size());
    if (total == 0.0) return -1;
    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += i * hist[i];

    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    int best_t = -1;
    for (int t = 0; t < 255; ++t) {
        w0 += hist[t];
        sum0 += t * hist[t];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_t = t;
        }
    }
    return best_t;
}

inline constexpr int kMinMarkerArea = 4;

/// Segments dark blobs (8-connected, at or below the Otsu threshold) and
/// returns their intensity-weighted centroids in row-major order.
inline MarkerSet detect_markers(const GelImage& image, std::size_t expected_count) {
    if (!image.well_formed()) throw Error(Errc::dimension_mismatch, "image raster size does not match its dimensions");
    MarkerSet out;
    const int t = otsu_threshold(image);
    out.detection_threshold = t;

    struct Blob {
        Vec2 centroid;
        int area;
    };
    std::vector<Blob> blobs;
    if (t >= 0) {
        const int w = image.width, h = image.height;
        std::vector<std::uint8_t> seen(image.pixels.size(), 0);
        std::vector<int> stack;
        for (int y0 = 0; y0 < h; ++y0) {
            for (int x0 = 0; x0 < w; ++x0) {
                const auto idx0 = static_cast<std::size_t>(y0) * w + x0;
                if (seen[idx0] || image.pixels[idx0] > t) continue;
                seen[idx0] = 1;
                stack.assign(1, static_cast<int>(idx0));
                double sw = 0.0, sx = 0.0, sy = 0.0;
                int area = 0;
                while (!stack.empty()) {
                    const int idx = stack.back();
                    stack.pop_back();
                    const int x = idx % w, y = idx / w;
                    // Weight falls to zero at the threshold so the pixel-quantized
                    // component boundary carries no weight.
                    const double wt = static_cast<double>(t - image.pixels[idx]) + 0.5;
                    sw += wt;
                    sx += wt * x;
                    sy += wt * y;
                    ++area;
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int nx = x + dx, ny = y + dy;
                            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                            const auto n = static_cast<std::size_t>(ny) * w + nx;
                            if (seen[n] || image.pixels[n] > t) continue;
                            seen[n] = 1;
                            stack.push_back(static_cast<int>(n));
                        }
                    }
                }
                if (area >= kMinMarkerArea) blobs.push_back({{sx / sw, sy / sw}, area});
            }
        }
    }

    if (!blobs.empty()) {
        // Row grouping tolerance scales with blob size.
        std::vector<int> areas;
        for (const auto& b : blobs) areas.push_back(b.area);
        std::nth_element(areas.begin(), areas.begin() + areas.size() / 2, areas.end());
        const double row_tol = 2.0 * std::sqrt(static_cast<double>(areas[areas.size() / 2]));

        std::sort(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) { return a.centroid.y < b.centroid.y; });
        std::size_t start = 0;
        for (std::size_t i = 1; i <= blobs.size(); ++i) {
            if (i == blobs.size() || blobs[i].centroid.y - blobs[start].centroid.y > row_tol) {
                std::sort(blobs.begin() + static_cast<std::ptrdiff_t>(start), blobs.begin() + static_cast<std::ptrdiff_t>(i),
                          [](const Blob& a, const Blob& b) { return a.centroid.x < b.centroid.x; });
                start = i;
            }
        }
        for (const auto& b : blobs) out.centroids.push_back(b.centroid);
    }

    if (out.centroids.size() != expected_count) {
        throw Error(Errc::count_mismatch, "found " + std::to_string(out.centroids.size()) + " markers, expected " +
                                              std::to_string(expected_count));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Image pyramid

struct FloatImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    float at(int x, int y) const noexcept { return data[static_cast<std::size_t>(y) * width + x]; }

    float clamped(int x, int y) const noexcept {
        return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
    }

    /// Bilinear sample with border clamping.
    double sample(double x, double y) const noexcept {
        x = std::clamp(x, 0.0, static_cast<double>(width - 1));
        y = std::clamp(y, 0.0, static_cast<double>(height - 1));
        const int x0 = std::min(static_cast<int>(x), width - 1);
        const int y0 = std::min(static_cast<int>(y), height - 1);
        const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
        const double ax = x - x0, ay = y - y0;
        const double top = (1.0 - ax) * at(x0, y0) + ax * at(x1, y0);
        const double bot = (1.0 - ax) * at(x0, y1) + ax * at(x1, y1);
        return (1.0 - ay) * top + ay * bot;
    }
};

struct PyramidLevel {
    FloatImage image;
    FloatImage grad_x;
    FloatImage grad_y;
};

struct Pyramid {
    std::vector<PyramidLevel> levels;

    int width() const noexcept { return levels.empty() ? 0 : levels.front().image.width; }
    int height() const noexcept { return levels.empty() ? 0 : levels.front().image.height; }
};

namespace detail {

// Central differences with border clamping.
inline void gradients(const FloatImage& img, FloatImage& gx, FloatImage& gy) {
    gx = {img.width, img.height, std::vector<float>(img.data.size())};
    gy = gx;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto i = static_cast<std::size_t>(y) * img.width + x;
            gx.data[i] = 0.5f * (img.clamped(x + 1, y) - img.clamped(x - 1, y));
            gy.data[i] = 0.5f * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
        }
    }
}

// 5-tap binomial blur then 2x decimation.
inline FloatImage downsample(const FloatImage& src) {
    constexpr std::array<float, 5> k{1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
    FloatImage tmp{src.width, src.height, std::vector<float>(src.data.size())};
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            float acc = 0.f;
            for (int j = -2; j <= 2; ++j) acc += k[j + 2] * src.clamped(x + j, y);
            tmp.data[static_cast<std::size_t>(y) * src.width + x] = acc;
        }
    FloatImage out{(src.width + 1) / 2, (src.height + 1) / 2, {}};
    out.data.resize(static_cast<std::size_t>(out.width) * out.height);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            float acc = 0.f;
            for (int j = -2; j <= 2; ++j) acc += k[j + 2] * tmp.clamped(2 * x, 2 * y + j);
            out.data[static_cast<std::size_t>(y) * out.width + x] = acc;
        }
    return out;
}

}  // namespace detail

inline Pyramid build_pyramid(const GelImage& img, int levels) {
    if (!img.well_formed() || img.width == 0 || img.height == 0)
        throw Error(Errc::dimension_mismatch, "cannot build a pyramid from an empty or malformed image");
    Pyramid p;
    FloatImage base{img.width, img.height, std::vector<float>(img.pixels.begin(), img.pixels.end())};
    for (int l = 0; l < levels; ++l) {
        PyramidLevel level;
        level.image = l == 0 ? std::move(base) : detail::downsample(p.levels.back().image);
        detail::gradients(level.image, level.grad_x, level.grad_y);
        p.levels.push_back(std::move(level));
        if (p.levels.back().image.width < 2 || p.levels.back().image.height < 2) break;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Lucas-Kanade

namespace detail {

struct TrackResult {
    Vec2 delta;
    bool valid;
    double residual;
};

inline TrackResult track_point(const Pyramid& prev, const Pyramid& cur, Vec2 base, const TrackConfig& cfg) {
    const int h = cfg.window_half;
    const auto n = static_cast<double>((2 * h + 1) * (2 * h + 1));
    const int top = static_cast<int>(std::min(prev.levels.size(), cur.levels.size())) - 1;

    if (!(base.x >= h && base.y >= h && base.x <= prev.width() - 1 - h && base.y <= prev.height() - 1 - h))
        return {{}, false, 0.0};

    std::vector<double> ival, gx, gy;
    ival.reserve(static_cast<std::size_t>(n));
    gx.reserve(static_cast<std::size_t>(n));
    gy.reserve(static_cast<std::size_t>(n));

    Vec2 guess{};
    Vec2 d{};
    for (int level = top; level >= 0; --level) {
        const double scale = std::ldexp(1.0, -level);
        const Vec2 p = scale * base;
        const auto& I = prev.levels[static_cast<std::size_t>(level)];
        const auto& J = cur.levels[static_cast<std::size_t>(level)];

        ival.clear();
        gx.clear();
        gy.clear();
        double gxx = 0.0, gxy = 0.0, gyy = 0.0;
        for (int v = -h; v <= h; ++v) {
            for (int u = -h; u <= h; ++u) {
                const double x = p.x + u, y = p.y + v;
                const double ix = I.grad_x.sample(x, y), iy = I.grad_y.sample(x, y);
                ival.push_back(I.image.sample(x, y));
                gx.push_back(ix);
                gy.push_back(iy);
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
            }
        }
        const double tr = 0.5 * (gxx + gyy);
        const double disc = std::sqrt(std::max(0.0, 0.25 * (gxx - gyy) * (gxx - gyy) + gxy * gxy));
        const double min_eig = (tr - disc) / n;
        const double det = gxx * gyy - gxy * gxy;
        if (!(min_eig >= cfg.min_eigen) || !(det > std::numeric_limits<double>::min()) || !std::isfinite(det))
            return {{}, false, 0.0};

        d = {};
        bool converged = false;
        for (int it = 0; it < cfg.max_iterations; ++it) {
            double bx = 0.0, by = 0.0;
            std::size_t k = 0;
            const Vec2 q = p + guess + d;
            for (int v = -h; v <= h; ++v) {
                for (int u = -h; u <= h; ++u, ++k) {
                    const double e = ival[k] - J.image.sample(q.x + u, q.y + v);
                    bx += e * gx[k];
                    by += e * gy[k];
                }
            }
            const Vec2 step{(gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det};
            if (!std::isfinite(step.x) || !std::isfinite(step.y)) return {{}, false, 0.0};
            d += step;
            if (norm(step) < cfg.epsilon) {
                converged = true;
                break;
            }
        }
        if (level == 0) {
            if (!converged) return {{}, false, 0.0};
        } else {
            guess = 2.0 * (guess + d);
        }
    }

    const Vec2 delta = guess + d;
    const Vec2 end = base + delta;
    if (!(end.x >= 0.0 && end.y >= 0.0 && end.x <= cur.width() - 1 && end.y <= cur.height() - 1))
        return {{}, false, 0.0};

    double residual = 0.0;
    const auto& I = prev.levels.front();
    const auto& J = cur.levels.front();
    for (int v = -h; v <= h; ++v)
        for (int u = -h; u <= h; ++u)
            residual += std::abs(I.image.sample(base.x + u, base.y + v) - J.image.sample(end.x + u, end.y + v));
    return {delta, true, residual / n};
}

}  // namespace detail

/// Sparse flow from prebuilt pyramids. Points closer than window_half to the
/// image border, with an ill-conditioned structure tensor, or whose final
/// level does not converge are reported invalid with a zero delta.
inline FlowField lk_flow(const Pyramid& prev, const Pyramid& cur, std::span<const Vec2> points, const TrackConfig& cfg) {
    validate(cfg);
    if (prev.width() != cur.width() || prev.height() != cur.height())
        throw Error(Errc::dimension_mismatch, "flow frames differ in size");
    FlowField out;
    out.entries.reserve(points.size());
    for (const auto& p : points) {
        const auto r = detail::track_point(prev, cur, p, cfg);
        out.entries.push_back({p, r.valid ? r.delta : Vec2{}, r.valid, r.residual});
    }
    return out;
}

inline FlowField lk_flow(const GelImage& prev, const GelImage& cur, const MarkerSet& points, const TrackConfig& cfg) {
    validate(cfg);
    if (prev.width != cur.width || prev.height != cur.height || !prev.well_formed() || !cur.well_formed())
        throw Error(Errc::dimension_mismatch, "flow frames differ in size");
    return lk_flow(build_pyramid(prev, cfg.pyramid_levels), build_pyramid(cur, cfg.pyramid_levels), points.centroids, cfg);
}

/// Reference-frame tracking: markers are detected once on frames[0] and every
/// later frame is tracked against it. Returns frames.size() - 1 fields, the
/// i-th one describing frames[i + 1].
inline std::vector<FlowField> track_sequence(std::span<const GelImage> frames, const TrackConfig& cfg, std::size_t expected_count) {
    validate(cfg);
    if (frames.size() < 2) throw Error(Errc::invalid_config, "track_sequence needs at least two frames");
    for (const auto& f : frames)
        if (f.width != frames[0].width || f.height != frames[0].height)
            throw Error(Errc::dimension_mismatch, "sequence frames differ in size");
    const MarkerSet markers = detect_markers(frames[0], expected_count);
    const Pyramid ref = build_pyramid(frames[0], cfg.pyramid_levels);
    std::vector<FlowField> out;
    out.reserve(frames.size() - 1);
    for (std::size_t i = 1; i < frames.size(); ++i)
        out.push_back(lk_flow(ref, build_pyramid(frames[i], cfg.pyramid_levels), markers.centroids, cfg));
    return out;
}

/// Mean delta over valid entries; zero when none are valid.
inline Vec2 mean_delta(const FlowField& flow) noexcept {
    Vec2 sum;
    std::size_t n = 0;
    for (const auto& e : flow.entries) {
        if (!e.valid) continue;
        sum += e.delta;
        ++n;
    }
    return n == 0 ? sum : (1.0 / static_cast<double>(n)) * sum;
}

}  // namespace tactile
