#pragma once

#include "error.hpp"
#include "fresnel.hpp"
#include "jet.hpp"
#include "polcore.hpp"
#include "vec3.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <utility>

namespace polrecon {

using RGB = std::array<double, 3>;
using StokesRGB = std::array<StokesVector, 3>;

struct Material {
    RGB kd{0.5, 0.5, 0.5};
    RGB ks{0.5, 0.5, 0.5};
    double roughness = 0.5; // GGX alpha, used as-is
    double ior = 1.5;
};

inline constexpr double kRoughnessMin = 1e-3;
inline constexpr double kGrazingCos = 1e-6;

/// Unit vectors at a shading point. `v` points from the surface to the
/// camera, `i` from the surface to the light.
struct ShadingGeometry {
    Vec3d n, v, i, h, camera_x;
};

inline Vec3d mirror_incident(const Vec3d& v, const Vec3d& n) {
    const double nv = dot(n, v);
    if (!(nv > 0.0)) fail(ErrorKind::geometry, "mirror_incident: view direction is back-facing");
    return n * (2.0 * nv) - v;
}

/// Geometry with the light placed along the mirrored view direction, so h = n.
inline ShadingGeometry mirror_geometry(const Vec3d& n, const Vec3d& v, const Vec3d& camera_x) {
    return {n, v, mirror_incident(v, n), n, camera_x};
}

inline ShadingGeometry general_geometry(const Vec3d& n, const Vec3d& v, const Vec3d& i,
                                        const Vec3d& camera_x) {
    return {n, v, i, normalize(i + v), camera_x};
}

template <typename T>
struct MicrofacetTerms {
    T d{}, g{}, w{};
};

/// Isotropic GGX distribution and height-correlated Smith masking with
/// alpha = roughness. `w` is D G / (4 n.v).
template <typename T>
MicrofacetTerms<T> microfacet_eval(const T& n_dot_h, const T& n_dot_v, const T& n_dot_i, const T& alpha) {
    using std::sqrt;
    const T a2 = alpha * alpha;
    const T denom = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0;
    const auto lambda = [&](const T& c) {
        const T tan2 = (1.0 - c * c) / (c * c);
        return 0.5 * (sqrt(1.0 + a2 * tan2) - 1.0);
    };
    MicrofacetTerms<T> m;
    m.d = a2 / (std::numbers::pi * denom * denom);
    m.g = 1.0 / (1.0 + lambda(n_dot_v) + lambda(n_dot_i));
    m.w = m.d * m.g / (4.0 * n_dot_v);
    return m;
}

inline MicrofacetTerms<double> microfacet_terms(const ShadingGeometry& g, double roughness) {
    const double nv = dot(g.n, g.v);
    if (!(nv > 0.0)) fail(ErrorKind::geometry, "microfacet_terms: back-facing view");
    if (!(roughness > 0.0) || roughness > 1.0) fail(ErrorKind::domain, "microfacet_terms: roughness outside (0, 1]");
    return microfacet_eval(dot(g.n, g.h), nv, dot(g.n, g.i), roughness);
}

/// Per-unit-albedo structure of the pBRDF at one shading point. The outgoing
/// Stokes vector per channel is
///   L kd (n.i) * diffuse + L ks W * specular.
template <typename T>
struct PbrdfBasis {
    T diffuse_weight{};  // n.i
    T specular_weight{}; // D G / (4 n.v)
    Stokes<T> diffuse;   // T_i+ [T_o+, T_o- cos2psi_t, -T_o- sin2psi_t, 0]
    Stokes<T> specular;  // [R+, R- cos2psi_r, -R- sin2psi_r, 0]
    bool valid = false;  // false at grazing or back-lit geometry; everything is zero
};

template <typename T>
PbrdfBasis<T> pbrdf_basis(const Vec3<T>& n, const Vec3<T>& v, const Vec3<T>& i, const Vec3<T>& camera_x,
                          const T& roughness, double ior) {
    PbrdfBasis<T> b;
    const T nv = dot(n, v);
    const T ni = dot(n, i);
    if (value_of(nv) < kGrazingCos || value_of(ni) < kGrazingCos) return b;
    const Vec3<T> h = normalize(i + v);
    const T hv = dot(h, v);

    const Fresnel<T> f_out = fresnel_terms(nv, ior);
    const Fresnel<T> f_in = fresnel_terms(ni, ior);
    const Fresnel<T> f_spec = fresnel_terms(hv, ior);

    // Diffuse light leaves polarized along the exit plane's p axis (the
    // projected normal); specular light along its s axis.
    const auto [ct, st] = frame_rotation_terms(camera_x, v, n);
    const auto [cr, sr] = frame_rotation_terms(camera_x, v, cross(v, h));

    const MicrofacetTerms<T> mf = microfacet_eval(dot(n, h), nv, ni, roughness);

    b.diffuse_weight = ni;
    b.specular_weight = mf.w;
    b.diffuse = {f_in.t_plus * f_out.t_plus, f_in.t_plus * f_out.t_minus * ct,
                 -(f_in.t_plus * f_out.t_minus * st), T(0.0)};
    b.specular = {f_spec.r_plus, f_spec.r_minus * cr, -(f_spec.r_minus * sr), T(0.0)};
    b.valid = true;
    return b;
}

inline PbrdfBasis<double> pbrdf_basis(const ShadingGeometry& g, double roughness, double ior) {
    if (!(dot(g.n, g.v) > 0.0)) fail(ErrorKind::geometry, "pbrdf: back-facing view");
    return pbrdf_basis<double>(g.n, g.v, g.i, g.camera_x, roughness, ior);
}

struct RadianceSplit {
    RGB c_d{}; // L kd (n.i)
    RGB c_s{}; // L ks D G / (4 n.v)
};

inline RadianceSplit decompose_radiance(const ShadingGeometry& g, const Material& mat, const RGB& light = {1, 1, 1}) {
    const PbrdfBasis<double> b = pbrdf_basis(g, mat.roughness, mat.ior);
    RadianceSplit out;
    if (!b.valid) return out;
    for (int c = 0; c < 3; ++c) {
        out.c_d[c] = light[c] * mat.kd[c] * b.diffuse_weight;
        out.c_s[c] = light[c] * mat.ks[c] * b.specular_weight;
    }
    return out;
}

inline void check_finite(const StokesRGB& s) {
    for (const auto& ch : s)
        for (int k = 0; k < 4; ++k)
            if (!std::isfinite(ch[k])) fail(ErrorKind::numeric, "pbrdf produced a non-finite Stokes component");
}

inline StokesRGB pbrdf_stokes(const ShadingGeometry& g, const Material& mat, const RGB& light = {1, 1, 1}) {
    const PbrdfBasis<double> b = pbrdf_basis(g, mat.roughness, mat.ior);
    StokesRGB out{};
    if (!b.valid) return out;
    for (int c = 0; c < 3; ++c) {
        const double cd = light[c] * mat.kd[c] * b.diffuse_weight;
        const double cs = light[c] * mat.ks[c] * b.specular_weight;
        out[c] = cd * b.diffuse + cs * b.specular;
    }
    check_finite(out);
    return out;
}

/// Only the diffuse or only the specular Stokes contribution.
inline StokesRGB pbrdf_stokes_diffuse(const ShadingGeometry& g, const Material& mat, const RGB& light = {1, 1, 1}) {
    Material m = mat;
    m.ks = {0, 0, 0};
    return pbrdf_stokes(g, m, light);
}

inline StokesRGB pbrdf_stokes_specular(const ShadingGeometry& g, const Material& mat, const RGB& light = {1, 1, 1}) {
    Material m = mat;
    m.kd = {0, 0, 0};
    return pbrdf_stokes(g, m, light);
}

/// Filtered radiance via the Stokes route: build s_out, then apply the polarizer.
inline RGB radiance_at_filter(const ShadingGeometry& g, const Material& mat, const RGB& light, double pol_angle) {
    const StokesRGB s = pbrdf_stokes(g, mat, light);
    RGB out{};
    for (int c = 0; c < 3; ++c) out[c] = filter_intensity(s[c], pol_angle);
    return out;
}

/// Filtered radiance via per-term Malus modulation of the Fresnel factors,
///   c_d T_i+ T(phi_pol) + c_s R(phi_pol),  X(phi_pol) = X+ (1 + rho cos(2 phi - 2 phi_pol)) / 2.
/// Independent of the Stokes route; the two must agree.
inline RGB radiance_at_filter_closed_form(const ShadingGeometry& g, const Material& mat, const RGB& light,
                                          double pol_angle) {
    RGB out{};
    const double nv = dot(g.n, g.v);
    const double ni = dot(g.n, g.i);
    if (!(nv > 0.0)) fail(ErrorKind::geometry, "radiance: back-facing view");
    if (nv < kGrazingCos || ni < kGrazingCos) return out;

    const FresnelPack f_out = fresnel_pack(nv, mat.ior);
    const FresnelPack f_in = fresnel_pack(ni, mat.ior);
    const FresnelPack f_spec = fresnel_pack(dot(g.h, g.v), mat.ior);
    const MicrofacetTerms<double> mf = microfacet_eval(dot(g.n, g.h), nv, ni, mat.roughness);

    // The AoP of a term is minus its frame angle; degenerate frames carry no
    // polarization, so their angle is irrelevant.
    const auto aop = [&](const Vec3d& axis) {
        const Vec3d a = axis - g.v * dot(axis, g.v);
        if (norm(a) < 1e-12) return 0.0;
        return -frame_rotation(g.camera_x, g.v, axis).psi;
    };
    const double phi_t = aop(g.n);
    const double phi_r = aop(cross(g.v, g.h));

    const double t_filtered = 0.5 * f_out.t_plus * (1.0 + f_out.dop_transmission * std::cos(2.0 * phi_t - 2.0 * pol_angle));
    const double r_filtered = 0.5 * f_spec.r_plus * (1.0 + f_spec.dop_reflection * std::cos(2.0 * phi_r - 2.0 * pol_angle));

    for (int c = 0; c < 3; ++c) {
        const double cd = light[c] * mat.kd[c] * ni;
        const double cs = light[c] * mat.ks[c] * mf.w;
        out[c] = cd * f_in.t_plus * t_filtered + cs * r_filtered;
    }
    return out;
}

/// Splits an observed Stokes vector at mirror geometry into its diffuse and
/// specular parts using their orthogonal polarization axes. Returns
/// {diffuse s0, specular s0}. Undefined at exact normal incidence, where both
/// parts are unpolarized; there everything is attributed to diffuse.
inline std::pair<double, double> separate_diffuse_specular(const StokesVector& s, const ShadingGeometry& g,
                                                           double ior) {
    const double nv = dot(g.n, g.v);
    if (!(nv > 0.0)) fail(ErrorKind::geometry, "separate_diffuse_specular: back-facing view");
    if (nv < kGrazingCos) return {0.0, 0.0};
    const FresnelPack f = fresnel_pack(std::min(nv, 1.0), ior);
    const auto [c2, s2] = frame_rotation_terms(g.camera_x, g.v, g.n);
    const double s1_local = s.s1 * c2 - s.s2 * s2;
    // s0 = D T+ + S R+,  s1_local = D T- - S R-
    const double det = -f.t_plus * f.r_minus - f.r_plus * f.t_minus;
    if (std::abs(det) < 1e-14) return {s.s0, 0.0};
    const double diffuse = (-s.s0 * f.r_minus - f.r_plus * s1_local) / det;
    const double specular = (f.t_plus * s1_local - f.t_minus * s.s0) / det;
    return {diffuse * f.t_plus, specular * f.r_plus};
}

} // namespace polrecon
