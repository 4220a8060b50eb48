#pragma once

#include "error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace polrecon {

/// Stokes vector [s0, s1, s2, s3]. s0 is total radiance, s1 the
/// horizontal/vertical difference, s2 the diagonal difference. s3 (circular)
/// is carried but always zero here.
template <typename T>
struct Stokes {
    T s0{}, s1{}, s2{}, s3{};

    T& operator[](int i) { return i == 0 ? s0 : (i == 1 ? s1 : (i == 2 ? s2 : s3)); }
    const T& operator[](int i) const { return i == 0 ? s0 : (i == 1 ? s1 : (i == 2 ? s2 : s3)); }

    Stokes& operator+=(const Stokes& o) { s0 += o.s0; s1 += o.s1; s2 += o.s2; s3 += o.s3; return *this; }
    friend Stokes operator+(Stokes a, const Stokes& b) { return a += b; }
    friend Stokes operator*(const T& k, const Stokes& a) { return {k * a.s0, k * a.s1, k * a.s2, k * a.s3}; }
    friend bool operator==(const Stokes& a, const Stokes& b) {
        return a.s0 == b.s0 && a.s1 == b.s1 && a.s2 == b.s2 && a.s3 == b.s3;
    }
};

using StokesVector = Stokes<double>;

/// 4x4 Mueller matrix, `m[row][col]`.
struct MuellerMatrix {
    std::array<std::array<double, 4>, 4> m{};

    static MuellerMatrix identity() {
        MuellerMatrix r;
        for (int i = 0; i < 4; ++i) r.m[i][i] = 1.0;
        return r;
    }

    MuellerMatrix transposed() const {
        MuellerMatrix r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) r.m[i][j] = m[j][i];
        return r;
    }

    friend MuellerMatrix operator*(const MuellerMatrix& a, const MuellerMatrix& b) {
        MuellerMatrix r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += a.m[i][k] * b.m[k][j];
                r.m[i][j] = acc;
            }
        return r;
    }

    friend bool operator==(const MuellerMatrix& a, const MuellerMatrix& b) { return a.m == b.m; }
};

struct PolarizationInfo {
    double unpolarized_intensity = 0.0; // s0 / 2
    double dop = 0.0;                   // [0, 1]
    double aop = 0.0;                   // (-pi/2, pi/2]
};

/// Wrap an angle into [0, pi). A linear polarizer is pi-periodic.
inline double canonical_angle(double angle) {
    double a = std::fmod(angle, std::numbers::pi);
    if (a < 0.0) a += std::numbers::pi;
    if (a >= std::numbers::pi) a = 0.0;
    return a;
}

/// Distance between two angles on the pi-periodic circle, in [0, pi/2].
inline double angle_distance_mod_pi(double a, double b) {
    const double d = canonical_angle(a - b);
    return std::min(d, std::numbers::pi - d);
}

inline bool is_realizable(const StokesVector& s, double tol = 1e-12) {
    return s.s0 >= -tol && std::sqrt(s.s1 * s.s1 + s.s2 * s.s2 + s.s3 * s.s3) <= s.s0 + tol * (1.0 + s.s0);
}

inline PolarizationInfo extract_polarization_info(const StokesVector& s) {
    if (s.s0 < 0.0) fail(ErrorKind::domain, "extract_polarization_info: negative s0");
    if (s.s0 == 0.0) return {};
    PolarizationInfo info;
    info.unpolarized_intensity = 0.5 * s.s0;
    info.dop = std::min(1.0, std::sqrt(s.s1 * s.s1 + s.s2 * s.s2) / s.s0);
    double aop = 0.5 * std::atan2(s.s2, s.s1);
    if (aop <= -std::numbers::pi / 2) aop = std::numbers::pi / 2;
    info.aop = aop;
    return info;
}

inline double malus_intensity(const PolarizationInfo& info, double pol_angle) {
    return info.unpolarized_intensity * (1.0 + info.dop * std::cos(2.0 * info.aop - 2.0 * pol_angle));
}

/// Frame rotation acting on (s1, s2) by twice `angle`.
inline MuellerMatrix rotation_mueller(double angle) {
    const double c = std::cos(2.0 * angle), s = std::sin(2.0 * angle);
    MuellerMatrix r = MuellerMatrix::identity();
    r.m[1][1] = c;
    r.m[1][2] = s;
    r.m[2][1] = -s;
    r.m[2][2] = c;
    return r;
}

/// Ideal linear polarizer with horizontal transmission axis.
inline MuellerMatrix horizontal_polarizer_mueller() {
    MuellerMatrix r;
    r.m[0][0] = r.m[0][1] = r.m[1][0] = r.m[1][1] = 0.5;
    return r;
}

inline MuellerMatrix linear_polarizer_mueller(double pol_angle) {
    const MuellerMatrix rot = rotation_mueller(pol_angle);
    return rot.transposed() * horizontal_polarizer_mueller() * rot;
}

inline StokesVector apply_mueller(const MuellerMatrix& m, const StokesVector& s) {
    StokesVector out;
    for (int i = 0; i < 4; ++i) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += m.m[i][k] * s[k];
        out[i] = acc;
    }
    return out;
}

/// Intensity behind a linear polarizer at `pol_angle`: the first component
/// of the filtered Stokes vector, 0.5 * (s0 + s1 cos 2t + s2 sin 2t).
template <typename T, typename A>
T filter_intensity(const Stokes<T>& s, const A& pol_angle) {
    using std::cos;
    using std::sin;
    const A two_theta = 2.0 * pol_angle;
    return 0.5 * (s.s0 + s.s1 * cos(two_theta) + s.s2 * sin(two_theta));
}

inline StokesVector stokes_from_quad(double i0, double i45, double i90, double i135) {
    if (i0 < 0.0 || i45 < 0.0 || i90 < 0.0 || i135 < 0.0)
        fail(ErrorKind::domain, "stokes_from_quad: negative intensity");
    return {i0 + i90, i0 - i90, i45 - i135, 0.0};
}

/// Polarizer angles in [0, pi) that reproduce `observed` for Stokes `s`.
/// Two roots in general, one when `observed` sits at an extremum.
inline std::vector<double> solve_polarizer_angle_closed_form(const StokesVector& s, double observed,
                                                             double tol = 1e-9) {
    const PolarizationInfo info = extract_polarization_info(s);
    if (info.dop <= 0.0) fail(ErrorKind::unconstrained, "polarizer angle unconstrained: DoP is zero");
    const double band = info.unpolarized_intensity * info.dop;
    double c = (observed - info.unpolarized_intensity) / band;
    const double slack = tol * (1.0 + s.s0) / band;
    if (c > 1.0 + slack || c < -1.0 - slack)
        fail(ErrorKind::inconsistency, "observed intensity outside the feasible band");
    c = std::clamp(c, -1.0, 1.0);
    const double half = 0.5 * std::acos(c);
    std::vector<double> roots{canonical_angle(info.aop - half)};
    const double other = canonical_angle(info.aop + half);
    if (angle_distance_mod_pi(other, roots.front()) > 1e-12) roots.push_back(other);
    std::sort(roots.begin(), roots.end());
    return roots;
}

} // namespace polrecon
