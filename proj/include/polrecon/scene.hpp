#pragma once

#include "error.hpp"
#include "pbrdf.hpp"
#include "vec3.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace polrecon {

enum class ShapeKind { sphere, box, torus, plane };

/// One analytic shape in local coordinates plus its placement. Local frames:
/// the torus axis and the plane normal are local +z; the plane is the
/// half-space z <= 0.
struct Primitive {
    ShapeKind shape = ShapeKind::sphere;
    double radius = 1.0;               // sphere
    Vec3d half_extents{1, 1, 1};       // box
    double major_radius = 1.0;         // torus
    double minor_radius = 0.25;        // torus
    Vec3d position{0, 0, 0};
    Vec3d rotation_axis{0, 0, 1};
    double rotation_angle = 0.0;       // radians
    double scale = 1.0;
    Material material;

    Vec3d to_local(const Vec3d& x) const {
        return rotate(x - position, rotation_axis, -rotation_angle) / scale;
    }
    Vec3d to_world_dir(const Vec3d& d) const { return rotate(d, rotation_axis, rotation_angle); }

    /// Radius of a sphere about `position` containing the shape; infinite for planes.
    double extent() const {
        switch (shape) {
        case ShapeKind::sphere: return scale * radius;
        case ShapeKind::box: return scale * norm(half_extents);
        case ShapeKind::torus: return scale * (major_radius + minor_radius);
        case ShapeKind::plane: return std::numeric_limits<double>::infinity();
        }
        return 0.0;
    }
};

struct DensityParams {
    double beta = 1e-3;
};

/// Union of primitives inside a bounding sphere centred at the origin.
struct SdfScene {
    std::vector<Primitive> primitives;
    double bounding_radius = 1.0;
    DensityParams density;
};

namespace detail {

inline double local_distance(const Primitive& p, const Vec3d& q) {
    switch (p.shape) {
    case ShapeKind::sphere: return norm(q) - p.radius;
    case ShapeKind::box: {
        const Vec3d d{std::abs(q.x) - p.half_extents.x, std::abs(q.y) - p.half_extents.y,
                      std::abs(q.z) - p.half_extents.z};
        const Vec3d outside{std::max(d.x, 0.0), std::max(d.y, 0.0), std::max(d.z, 0.0)};
        return norm(outside) + std::min(std::max(d.x, std::max(d.y, d.z)), 0.0);
    }
    case ShapeKind::torus: {
        const double ring = std::hypot(q.x, q.y) - p.major_radius;
        return std::hypot(ring, q.z) - p.minor_radius;
    }
    case ShapeKind::plane: return q.z;
    }
    return 0.0;
}

// Analytic gradient; zero vector where undefined (medial points).
inline Vec3d local_gradient(const Primitive& p, const Vec3d& q) {
    switch (p.shape) {
    case ShapeKind::sphere: {
        const double r = norm(q);
        return r > 0.0 ? q / r : Vec3d{};
    }
    case ShapeKind::box: {
        const Vec3d d{std::abs(q.x) - p.half_extents.x, std::abs(q.y) - p.half_extents.y,
                      std::abs(q.z) - p.half_extents.z};
        const Vec3d sgn{q.x < 0 ? -1.0 : 1.0, q.y < 0 ? -1.0 : 1.0, q.z < 0 ? -1.0 : 1.0};
        if (d.x > 0 || d.y > 0 || d.z > 0) {
            const Vec3d o{std::max(d.x, 0.0) * sgn.x, std::max(d.y, 0.0) * sgn.y, std::max(d.z, 0.0) * sgn.z};
            return normalize(o);
        }
        if (d.x >= d.y && d.x >= d.z) return {sgn.x, 0, 0};
        if (d.y >= d.z) return {0, sgn.y, 0};
        return {0, 0, sgn.z};
    }
    case ShapeKind::torus: {
        const double rho = std::hypot(q.x, q.y);
        if (rho == 0.0) return {};
        const double ring = rho - p.major_radius;
        const double len = std::hypot(ring, q.z);
        if (len == 0.0) return {};
        return Vec3d{ring * q.x / rho, ring * q.y / rho, q.z} / len;
    }
    case ShapeKind::plane: return {0, 0, 1};
    }
    return {};
}

} // namespace detail

inline double primitive_distance(const Primitive& p, const Vec3d& x) {
    return p.scale * detail::local_distance(p, p.to_local(x));
}

/// Index of the primitive attaining the union minimum, or nullopt for an empty scene.
inline std::optional<std::size_t> closest_primitive(const SdfScene& scene, const Vec3d& x) {
    std::optional<std::size_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < scene.primitives.size(); ++k) {
        const double d = primitive_distance(scene.primitives[k], x);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

/// Signed distance of the union; +inf for an empty scene.
inline double sdf_eval(const SdfScene& scene, const Vec3d& x) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : scene.primitives) d = std::min(d, primitive_distance(p, x));
    return d;
}

/// Analytic gradient of the union (gradient of the closest member).
inline Vec3d sdf_gradient(const SdfScene& scene, const Vec3d& x) {
    const auto k = closest_primitive(scene, x);
    if (!k) return {};
    const Primitive& p = scene.primitives[*k];
    return p.to_world_dir(detail::local_gradient(p, p.to_local(x)));
}

/// Central-difference gradient; the reference the analytic path is checked against.
inline Vec3d sdf_gradient_fd(const SdfScene& scene, const Vec3d& x, double step) {
    Vec3d g;
    for (int a = 0; a < 3; ++a) {
        Vec3d hi = x, lo = x;
        hi[a] += step;
        lo[a] -= step;
        g[a] = (sdf_eval(scene, hi) - sdf_eval(scene, lo)) / (2.0 * step);
    }
    return g;
}

inline Vec3d sdf_normal(const SdfScene& scene, const Vec3d& x) {
    const Vec3d g = sdf_gradient(scene, x);
    const double len = norm(g);
    if (!(len > 1e-12)) fail(ErrorKind::degenerate_normal, "sdf_normal: zero gradient");
    return g / len;
}

/// Laplace-CDF density: 1/beta deep inside, 1/(2 beta) on the surface,
/// decaying to zero outside.
inline double density_from_sdf(double d, const DensityParams& params) {
    const double b = params.beta;
    if (d <= 0.0) return (1.0 - 0.5 * std::exp(d / b)) / b;
    return 0.5 * std::exp(-d / b) / b;
}

} // namespace polrecon
