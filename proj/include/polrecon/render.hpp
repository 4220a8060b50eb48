#pragma once

#include "camera.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "pbrdf.hpp"
#include "polcore.hpp"
#include "rng.hpp"
#include "scene.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace polrecon {

enum class RenderMode { sphere_trace, volume };

struct Hit {
    Vec3d point;
    double t = 0.0;
    Vec3d normal;
    std::size_t primitive = 0;
};

struct TraceStats {
    std::uint64_t exhausted = 0; // rays that ran out of iterations
};

/// Ray parameters where the ray is inside the bounding sphere, clipped to t >= 0.
inline std::optional<std::pair<double, double>> bounding_interval(const Ray& ray, double radius) {
    const double b = dot(ray.origin, ray.dir);
    const double c = dot(ray.origin, ray.origin) - radius * radius;
    const double disc = b * b - c;
    if (disc <= 0.0) return std::nullopt;
    const double root = std::sqrt(disc);
    const double t0 = std::max(-b - root, 0.0);
    const double t1 = -b + root;
    if (t1 <= t0) return std::nullopt;
    return std::pair{t0, t1};
}

inline constexpr int kMaxTraceSteps = 1024;

/// First zero crossing of the scene SDF along the ray, inside the bounding
/// sphere. Hits satisfy |sdf| < 1e-6 * bounding radius; a short Newton polish
/// then drives the residual to round-off.
inline std::optional<Hit> sphere_trace(const SdfScene& scene, const Ray& ray, TraceStats* stats = nullptr) {
    if (scene.primitives.empty()) return std::nullopt;
    const auto span = bounding_interval(ray, scene.bounding_radius);
    if (!span) return std::nullopt;
    const double eps = 1e-6 * scene.bounding_radius;
    double t = span->first;
    for (int step = 0; step < kMaxTraceSteps; ++step) {
        const Vec3d p = ray.origin + ray.dir * t;
        const double d = sdf_eval(scene, p);
        if (std::abs(d) < eps) {
            double best_t = t, best_d = std::abs(d);
            for (int k = 0; k < 4 && best_d > 0.0; ++k) {
                const Vec3d q = ray.origin + ray.dir * best_t;
                const double slope = dot(sdf_gradient(scene, q), ray.dir);
                if (std::abs(slope) < 1e-3) break;
                const double cand_t = best_t - sdf_eval(scene, q) / slope;
                const double cand_d = std::abs(sdf_eval(scene, ray.origin + ray.dir * cand_t));
                if (!(cand_d < best_d)) break;
                best_t = cand_t;
                best_d = cand_d;
            }
            Hit hit;
            hit.t = best_t;
            hit.point = ray.origin + ray.dir * best_t;
            hit.primitive = *closest_primitive(scene, hit.point);
            hit.normal = sdf_normal(scene, hit.point);
            return hit;
        }
        t += std::abs(d);
        if (t > span->second) return std::nullopt;
    }
    if (stats) ++stats->exhausted;
    return std::nullopt;
}

/// Compositing weights w_i = T_i (1 - exp(-sigma_i delta_i)).
inline std::vector<double> volume_weights(std::span<const double> sigmas, std::span<const double> deltas) {
    if (sigmas.size() != deltas.size()) fail(ErrorKind::domain, "volume_weights: length mismatch");
    std::vector<double> w(sigmas.size());
    double optical_depth = 0.0;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (sigmas[i] < 0.0) fail(ErrorKind::domain, "volume_weights: negative density");
        if (!(deltas[i] > 0.0)) fail(ErrorKind::domain, "volume_weights: non-positive spacing");
        const double tau = sigmas[i] * deltas[i];
        w[i] = std::exp(-optical_depth) * -std::expm1(-tau);
        optical_depth += tau;
    }
    return w;
}

struct PixelRecord {
    StokesRGB stokes{};
    bool hit = false;
    Vec3d normal{};
    double depth = 0.0; // distance along the ray
};

struct StokesImage {
    int width = 0, height = 0;
    std::vector<PixelRecord> pixels;
    // Diagnostics; not serialized.
    std::vector<double> weight_sum;  // volume mode only
    std::uint64_t failed_pixels = 0; // pixels whose evaluation raised an error
    std::uint64_t exhausted_rays = 0;

    StokesImage() = default;
    StokesImage(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h) {}

    PixelRecord& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
    const PixelRecord& at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
};

struct RenderOptions {
    RenderMode mode = RenderMode::sphere_trace;
    int workers = 1;
    std::uint64_t seed = 0;
    int volume_samples = 128;
    RGB light{1.0, 1.0, 1.0};
    double mask_threshold = 0.5; // volume mode: weight sum needed to count as a hit
};

namespace detail {

inline StokesRGB shade(const SdfScene& scene, std::size_t primitive, const Vec3d& normal, const Vec3d& view,
                       const Vec3d& camera_x, const RGB& light) {
    if (!(dot(normal, view) > 0.0)) return {};
    return pbrdf_stokes(mirror_geometry(normal, view, camera_x), scene.primitives[primitive].material, light);
}

inline void render_trace_pixel(const SdfScene& scene, const Camera& cam, const RenderOptions& opt, int x, int y,
                               PixelRecord& out, TraceStats& stats) {
    const Ray ray = generate_ray(cam, x, y);
    const auto hit = sphere_trace(scene, ray, &stats);
    if (!hit) return;
    out.hit = true;
    out.normal = hit->normal;
    out.depth = hit->t;
    out.stokes = shade(scene, hit->primitive, hit->normal, -ray.dir, cam.right, opt.light);
}

inline double render_volume_pixel(const SdfScene& scene, const Camera& cam, const RenderOptions& opt, int x, int y,
                                  PixelRecord& out) {
    const Ray ray = generate_ray(cam, x, y);
    const auto span = bounding_interval(ray, scene.bounding_radius);
    if (!span || scene.primitives.empty()) return 0.0;
    const int n = opt.volume_samples;
    const double width = (span->second - span->first) / n;
    std::mt19937_64 rng(mix_seed(opt.seed, std::uint64_t(y) * cam.width + x));

    std::vector<double> ts(n), sigmas(n), deltas(n, width);
    for (int k = 0; k < n; ++k) {
        ts[k] = span->first + (k + uniform01(rng)) * width;
        sigmas[k] = density_from_sdf(sdf_eval(scene, ray.origin + ray.dir * ts[k]), scene.density);
    }
    const std::vector<double> w = volume_weights(sigmas, deltas);

    StokesRGB acc{};
    Vec3d normal_acc{};
    double depth_acc = 0.0, weight_sum = 0.0;
    for (int k = 0; k < n; ++k) {
        weight_sum += w[k];
        if (w[k] == 0.0) continue;
        const Vec3d p = ray.origin + ray.dir * ts[k];
        const Vec3d g = sdf_gradient(scene, p);
        if (norm(g) == 0.0) continue;
        const Vec3d nrm = normalize(g);
        const StokesRGB s = shade(scene, *closest_primitive(scene, p), nrm, -ray.dir, cam.right, opt.light);
        for (int c = 0; c < 3; ++c) acc[c] += w[k] * s[c];
        normal_acc += nrm * w[k];
        depth_acc += w[k] * ts[k];
    }
    if (weight_sum > opt.mask_threshold) {
        out.hit = true;
        out.stokes = acc;
        out.normal = normalize(normal_acc);
        out.depth = depth_acc / weight_sum;
    }
    return weight_sum;
}

} // namespace detail

/// Per-pixel RGB Stokes, hit mask, normal and depth for one camera. Output
/// is a pure function of (scene, camera, options) minus the worker count.
inline StokesImage render_stokes_image(const SdfScene& scene, const Camera& cam, const RenderOptions& opt = {}) {
    StokesImage img(cam.width, cam.height);
    if (opt.mode == RenderMode::volume) img.weight_sum.assign(img.pixels.size(), 0.0);
    std::vector<std::uint8_t> failed(img.pixels.size(), 0), exhausted(img.pixels.size(), 0);
    parallel_for(img.pixels.size(), opt.workers, [&](std::size_t idx) {
        const int x = int(idx % cam.width), y = int(idx / cam.width);
        PixelRecord rec;
        try {
            if (opt.mode == RenderMode::sphere_trace) {
                TraceStats stats;
                detail::render_trace_pixel(scene, cam, opt, x, y, rec, stats);
                exhausted[idx] = stats.exhausted > 0;
            } else {
                img.weight_sum[idx] = detail::render_volume_pixel(scene, cam, opt, x, y, rec);
            }
        } catch (const Error&) {
            rec = PixelRecord{};
            failed[idx] = 1;
        }
        img.pixels[idx] = rec;
    });
    for (std::size_t i = 0; i < failed.size(); ++i) {
        img.failed_pixels += failed[i];
        img.exhausted_rays += exhausted[i];
    }
    return img;
}

/// Scalar RGB image, row-major, top-left origin.
struct RGBImage {
    int width = 0, height = 0;
    std::vector<RGB> pixels;

    RGBImage() = default;
    RGBImage(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h, RGB{0, 0, 0}) {}

    RGB& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
    const RGB& at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
};

inline RGBImage render_polarized_image(const StokesImage& img, double pol_angle) {
    RGBImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        if (!img.pixels[i].hit) continue;
        for (int c = 0; c < 3; ++c) out.pixels[i][c] = filter_intensity(img.pixels[i].stokes[c], pol_angle);
    }
    return out;
}

/// s0 per channel.
inline RGBImage total_intensity_image(const StokesImage& img) {
    RGBImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        for (int c = 0; c < 3; ++c) out.pixels[i][c] = img.pixels[i].stokes[c].s0;
    return out;
}

} // namespace polrecon
