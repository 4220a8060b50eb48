#pragma once

#include "error.hpp"
#include "jet.hpp"
#include "vec3.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace polrecon {

/// Intensity Fresnel coefficients for air -> dielectric plus the derived
/// quantities the pBRDF consumes. Transmittance includes the radiance
/// scaling, so r + t = 1 per polarization.
template <typename T>
struct Fresnel {
    T r_s{}, r_p{}, t_s{}, t_p{};
    T r_plus{}, r_minus{}, t_plus{}, t_minus{};
    T dop_reflection{}, dop_transmission{};
};

using FresnelPack = Fresnel<double>;

/// Unchecked evaluation, usable with any scalar.
template <typename T>
Fresnel<T> fresnel_terms(const T& cos_i, double eta) {
    using std::sqrt;
    const T sin2_t = (1.0 - cos_i * cos_i) / (eta * eta);
    const T cos_t = sqrt(1.0 - sin2_t);

    const T ds = cos_i + eta * cos_t;
    const T dp = eta * cos_i + cos_t;
    const T as = (cos_i - eta * cos_t) / ds;
    const T ap = (eta * cos_i - cos_t) / dp;
    const T cross_term = 4.0 * eta * cos_i * cos_t;

    Fresnel<T> f;
    f.r_s = as * as;
    f.r_p = ap * ap;
    f.t_s = cross_term / (ds * ds);
    f.t_p = cross_term / (dp * dp);
    f.r_plus = 0.5 * (f.r_s + f.r_p);
    f.r_minus = 0.5 * (f.r_s - f.r_p);
    f.t_plus = 0.5 * (f.t_s + f.t_p);
    f.t_minus = 0.5 * (f.t_p - f.t_s);
    f.dop_reflection = f.r_minus / f.r_plus;
    f.dop_transmission = f.t_minus / f.t_plus;
    return f;
}

inline FresnelPack fresnel_pack(double cos_theta_i, double eta) {
    if (!(cos_theta_i > 0.0) || cos_theta_i > 1.0)
        fail(ErrorKind::domain, "fresnel_pack: cos_theta_i must lie in (0, 1]");
    if (!(eta > 1.0)) fail(ErrorKind::unsupported_medium, "fresnel_pack: eta must exceed 1");
    FresnelPack f = fresnel_terms(cos_theta_i, eta);
    f.dop_reflection = std::abs(f.r_s - f.r_p) / (f.r_s + f.r_p);
    f.dop_transmission = std::abs(f.t_s - f.t_p) / (f.t_s + f.t_p);
    return f;
}

inline double brewster_angle(double eta) {
    if (!(eta > 1.0)) fail(ErrorKind::unsupported_medium, "brewster_angle: eta must exceed 1");
    return std::atan(eta);
}

/// Rotation taking the camera Stokes reference axis onto a local scattering
/// frame axis. `psi` is positive counter-clockwise when looking down the view
/// direction, i.e. a right-handed rotation about -view_dir.
struct FrameRotation {
    double psi = 0.0;
    double cos2psi = 1.0;
    double sin2psi = 0.0;
};

/// cos 2psi and sin 2psi without trigonometry. Falls back to the identity
/// rotation when `axis` is parallel to `view_dir`, where the scattering plane
/// is undefined and the polarized part it would orient vanishes anyway.
template <typename T>
std::pair<T, T> frame_rotation_terms(const Vec3<T>& camera_x, const Vec3<T>& view_dir,
                                     const Vec3<T>& axis) {
    const Vec3<T> xc = camera_x - view_dir * dot(camera_x, view_dir);
    const Vec3<T> yc = cross(view_dir, xc);
    const Vec3<T> a = axis - view_dir * dot(axis, view_dir);
    const T c = dot(a, xc);
    const T s = -dot(a, yc);
    const T r2 = c * c + s * s;
    if (value_of(r2) < 1e-24 * value_of(dot(xc, xc))) return {T(1.0), T(0.0)};
    return {(c * c - s * s) / r2, 2.0 * c * s / r2};
}

inline FrameRotation frame_rotation(const Vec3d& camera_x_axis, const Vec3d& view_dir,
                                    const Vec3d& plane_axis) {
    const Vec3d xc = camera_x_axis - view_dir * dot(camera_x_axis, view_dir);
    if (norm(xc) < 1e-9) fail(ErrorKind::frame_degenerate, "camera axis parallel to view direction");
    const Vec3d a = plane_axis - view_dir * dot(plane_axis, view_dir);
    if (norm(a) < 1e-12) fail(ErrorKind::frame_degenerate, "scattering plane axis parallel to view direction");
    const Vec3d xn = normalize(xc);
    const Vec3d yn = cross(view_dir, xn);
    FrameRotation f;
    f.psi = std::atan2(-dot(a, yn), dot(a, xn));
    const auto [c2, s2] = frame_rotation_terms(camera_x_axis, view_dir, plane_axis);
    f.cos2psi = c2;
    f.sin2psi = s2;
    return f;
}

} // namespace polrecon
