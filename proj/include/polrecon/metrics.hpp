#pragma once

#include "error.hpp"
#include "render.hpp"
#include "vec3.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace polrecon {

/// Per-pixel inclusion flags; empty means "all pixels".
using Mask = std::vector<std::uint8_t>;

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

namespace detail {

inline void check_same_size(const RGBImage& a, const RGBImage& b, const Mask& mask) {
    if (a.width != b.width || a.height != b.height) fail(ErrorKind::domain, "image dimensions differ");
    if (!mask.empty() && mask.size() != a.pixels.size()) fail(ErrorKind::domain, "mask size differs from image size");
}

inline bool selected(const Mask& mask, std::size_t i) { return mask.empty() || mask[i] != 0; }

} // namespace detail

/// 10 log10(1 / MSE) over masked pixels and all channels, peak 1.
/// Identical inputs give +inf.
inline double psnr(const RGBImage& a, const RGBImage& b, const Mask& mask = {}) {
    detail::check_same_size(a, b, mask);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        if (!detail::selected(mask, i)) continue;
        for (int c = 0; c < 3; ++c) {
            const double d = a.pixels[i][c] - b.pixels[i][c];
            sum += d * d;
        }
        count += 3;
    }
    if (count == 0) fail(ErrorKind::domain, "psnr: empty mask");
    if (sum == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(double(count) / sum);
}

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01, k2 = 0.03;
    double peak = 1.0;
};

/// Mean local SSIM over masked window centres and the three channels.
/// Windows are Gaussian; weights falling outside the image are dropped and
/// the rest renormalized.
inline double ssim(const RGBImage& a, const RGBImage& b, const Mask& mask = {}, const SsimParams& p = {}) {
    detail::check_same_size(a, b, mask);
    const int half = p.window / 2;
    std::vector<double> g(std::size_t(p.window));
    for (int k = -half; k <= half; ++k) g[std::size_t(k + half)] = std::exp(-0.5 * k * k / (p.sigma * p.sigma));
    const double c1 = (p.k1 * p.peak) * (p.k1 * p.peak), c2 = (p.k2 * p.peak) * (p.k2 * p.peak);

    double total = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (!detail::selected(mask, std::size_t(y) * a.width + x)) continue;
            for (int c = 0; c < 3; ++c) {
                double w_sum = 0, ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
                for (int dy = -half; dy <= half; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= a.height) continue;
                    for (int dx = -half; dx <= half; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= a.width) continue;
                        const double w = g[std::size_t(dy + half)] * g[std::size_t(dx + half)];
                        const double va = a.at(xx, yy)[c], vb = b.at(xx, yy)[c];
                        w_sum += w;
                        ma += w * va;
                        mb += w * vb;
                        aa += w * va * va;
                        bb += w * vb * vb;
                        ab += w * va * vb;
                    }
                }
                ma /= w_sum;
                mb /= w_sum;
                const double var_a = aa / w_sum - ma * ma, var_b = bb / w_sum - mb * mb;
                const double cov = ab / w_sum - ma * mb;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
                ++count;
            }
        }
    if (count == 0) fail(ErrorKind::domain, "ssim: empty mask");
    return total / double(count);
}

/// Mean angle between unit normals over masked pixels, in degrees.
inline double normal_mae(const std::vector<Vec3d>& a, const std::vector<Vec3d>& b, const Mask& mask = {}) {
    if (a.size() != b.size()) fail(ErrorKind::domain, "normal_mae: field sizes differ");
    if (!mask.empty() && mask.size() != a.size()) fail(ErrorKind::domain, "normal_mae: mask size differs");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!detail::selected(mask, i)) continue;
        if (std::abs(norm(a[i]) - 1.0) > 1e-6 || std::abs(norm(b[i]) - 1.0) > 1e-6)
            fail(ErrorKind::domain, "normal_mae: non-unit normal at index " + std::to_string(i));
        sum += std::atan2(norm(cross(a[i], b[i])), dot(a[i], b[i])); // exact 0 for equal vectors
        ++count;
    }
    if (count == 0) fail(ErrorKind::domain, "normal_mae: empty mask");
    return sum / double(count) * 180.0 / std::numbers::pi;
}

namespace detail {

namespace bg = boost::geometry;
using RPoint = bg::model::point<double, 3, bg::cs::cartesian>;

// Mean over `from` of the squared distance to the nearest point of `to`.
inline double mean_nearest_sq(const std::vector<Vec3d>& from, const std::vector<Vec3d>& to) {
    std::vector<RPoint> pts;
    pts.reserve(to.size());
    for (const Vec3d& p : to) pts.emplace_back(p.x, p.y, p.z);
    const bg::index::rtree<RPoint, bg::index::rstar<16>> tree(pts.begin(), pts.end());
    double sum = 0.0;
    std::vector<RPoint> nearest;
    for (const Vec3d& p : from) {
        nearest.clear();
        tree.query(bg::index::nearest(RPoint(p.x, p.y, p.z), 1), std::back_inserter(nearest));
        const Vec3d q{bg::get<0>(nearest[0]), bg::get<1>(nearest[0]), bg::get<2>(nearest[0])};
        sum += dot(p - q, p - q);
    }
    return sum / double(from.size());
}

} // namespace detail

/// Bidirectional chamfer distance: mean squared nearest-neighbour distance
/// from a to b plus from b to a. Exact.
inline double chamfer(const std::vector<Vec3d>& a, const std::vector<Vec3d>& b) {
    if (a.empty() || b.empty()) fail(ErrorKind::domain, "chamfer: empty point set");
    return detail::mean_nearest_sq(a, b) + detail::mean_nearest_sq(b, a);
}

/// Similarity transform taking `reference` into the unit sphere: centred on
/// its centroid and scaled by its largest centroid distance.
struct UnitSphereTransform {
    Vec3d center;
    double scale = 1.0;
    Vec3d apply(const Vec3d& p) const { return (p - center) * scale; }
};

inline UnitSphereTransform unit_sphere_transform(const std::vector<Vec3d>& reference) {
    if (reference.empty()) fail(ErrorKind::domain, "unit sphere transform: empty point set");
    UnitSphereTransform t;
    for (const Vec3d& p : reference) t.center += p;
    t.center = t.center / double(reference.size());
    double r = 0.0;
    for (const Vec3d& p : reference) r = std::max(r, norm(p - t.center));
    t.scale = r > 0.0 ? 1.0 / r : 1.0;
    return t;
}

/// Chamfer after mapping both sets with the unit-sphere transform of `b`.
inline double chamfer_unit_sphere(const std::vector<Vec3d>& a, const std::vector<Vec3d>& b) {
    if (a.empty() || b.empty()) fail(ErrorKind::domain, "chamfer: empty point set");
    const UnitSphereTransform t = unit_sphere_transform(b);
    std::vector<Vec3d> ta, tb;
    for (const Vec3d& p : a) ta.push_back(t.apply(p));
    for (const Vec3d& p : b) tb.push_back(t.apply(p));
    return chamfer(ta, tb);
}

/// Plain-text point list, one "x y z" per line; blank lines and lines
/// starting with '#' are skipped.
inline std::vector<Vec3d> read_point_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open point list " + path.string());
    std::vector<Vec3d> pts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Vec3d p;
        std::string extra;
        if (!(ls >> p.x >> p.y >> p.z) || (ls >> extra))
            throw FormatError(line_no, path.string() + ": expected \"x y z\" on line " + std::to_string(line_no));
        pts.push_back(p);
    }
    return pts;
}

inline void write_point_list(const std::filesystem::path& path, const std::vector<Vec3d>& pts) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write point list " + path.string());
    out.precision(17);
    for (const Vec3d& p : pts) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
    if (!out) fail(ErrorKind::io, "failed writing " + path.string());
}

} // namespace polrecon
