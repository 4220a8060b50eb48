#include <polrecon/pbrdf.hpp>
#include <polrecon/rng.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace polrecon;
using std::numbers::pi;

namespace {

Vec3d random_unit(std::mt19937_64& rng) {
    const double z = uniform(rng, -1, 1), phi = uniform(rng, 0, 2 * pi);
    const double r = std::sqrt(1 - z * z);
    return {r * std::cos(phi), r * std::sin(phi), z};
}

// Front-facing mirror geometry with incidence angle in (0, max_deg).
ShadingGeometry random_geometry(std::mt19937_64& rng, double max_deg = 89.0) {
    const Vec3d n = random_unit(rng);
    const Vec3d t = any_orthonormal(n);
    const Vec3d b = cross(n, t);
    const double theta = uniform(rng, 0.01, max_deg) * pi / 180, az = uniform(rng, 0, 2 * pi);
    const Vec3d v = n * std::cos(theta) + (t * std::cos(az) + b * std::sin(az)) * std::sin(theta);
    Vec3d cam_x = random_unit(rng);
    cam_x = normalize(cam_x - v * dot(cam_x, v));
    return mirror_geometry(n, v, cam_x);
}

Material random_material(std::mt19937_64& rng) {
    Material m;
    for (int c = 0; c < 3; ++c) {
        m.kd[c] = uniform(rng, 0, 1);
        m.ks[c] = uniform(rng, 0, 1);
    }
    m.roughness = uniform(rng, 0.05, 1);
    return m;
}

double dop(const StokesVector& s) { return std::hypot(s.s1, s.s2) / s.s0; }

// 2 pi * integral over mu in [0,1] of D(mu) mu, composite Simpson on a grid
// refined towards mu = 1 where the lobe concentrates.
double ggx_projected_integral(double alpha) {
    const auto integrand = [&](double mu) { return microfacet_eval(mu, 1.0, 1.0, alpha).d * mu; };
    const int n = 200000;
    double sum = 0;
    // substitution mu = 1 - u^4 concentrates samples near mu = 1
    const auto f = [&](double u) { return integrand(1 - std::pow(u, 4)) * 4 * std::pow(u, 3); };
    const double h = 1.0 / n;
    for (int k = 0; k <= n; ++k) {
        const double w = (k == 0 || k == n) ? 1 : (k % 2 ? 4 : 2);
        sum += w * f(k * h);
    }
    return 2 * pi * sum * h / 3;
}

} // namespace

TEST(MirrorIncident, Examples) {
    const Vec3d n{0, 0, 1};
    const Vec3d i = mirror_incident(n, n);
    EXPECT_NEAR(norm(i - n), 0, 1e-15);
    const Vec3d v = normalize(Vec3d{1, 0, 1});
    const Vec3d r = mirror_incident(v, n);
    EXPECT_NEAR(r.x, -v.x, 1e-15);
    EXPECT_NEAR(r.z, v.z, 1e-15);
    EXPECT_NEAR(dot(n, r), dot(n, v), 1e-15);
    EXPECT_THROW(mirror_incident({0, 0, -1}, n), Error);
}

TEST(MirrorIncident, HalfVectorIsNormal) {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 2000; ++k) {
        const ShadingGeometry g = random_geometry(rng);
        EXPECT_LT(norm(normalize(g.v + mirror_incident(g.v, g.n)) - g.n), 1e-9);
    }
}

TEST(Microfacet, PeakValue) {
    for (double a : {0.05, 0.3, 1.0}) {
        const auto m = microfacet_eval(1.0, 1.0, 1.0, a);
        EXPECT_NEAR(m.d, 1.0 / (pi * a * a), 1e-12 / (a * a));
        EXPECT_DOUBLE_EQ(m.g, 1.0);
    }
}

TEST(Microfacet, ProjectedAreaNormalization) {
    for (double a : {0.05, 0.2, 0.5, 1.0}) EXPECT_NEAR(ggx_projected_integral(a), 1.0, 1e-3) << a;
}

TEST(Microfacet, SmoothLimitHasNoShadowing) {
    const double nv = std::cos(60 * pi / 180);
    EXPECT_GT(microfacet_eval(1.0, nv, nv, 1e-4).g, 1 - 1e-6);
    EXPECT_LT(microfacet_eval(1.0, nv, nv, 0.8).g, 0.9);
}

TEST(Microfacet, BackFacingIsGeometryError) {
    const ShadingGeometry g{{0, 0, 1}, {0, 0, -1}, {0, 0, 1}, {0, 0, 1}, {1, 0, 0}};
    EXPECT_THROW(microfacet_terms(g, 0.5), Error);
}

TEST(PbrdfStokes, NormalIncidenceIsUnpolarized) {
    const ShadingGeometry g = mirror_geometry({0, 0, 1}, {0, 0, 1}, {1, 0, 0});
    Material m;
    m.kd = {0.7, 0.2, 0.1};
    m.ks = {0.3, 0.3, 0.3};
    const StokesRGB s = pbrdf_stokes(g, m);
    for (const auto& ch : s) {
        EXPECT_GT(ch.s0, 0.0);
        EXPECT_NEAR(ch.s1, 0, 1e-16);
        EXPECT_NEAR(ch.s2, 0, 1e-16);
    }
}

TEST(PbrdfStokes, AlbedoSelectsChannels) {
    std::mt19937_64 rng(2);
    Material m;
    m.kd = {1, 0, 0};
    m.ks = {0, 0, 0};
    const StokesRGB s = pbrdf_stokes(random_geometry(rng), m);
    EXPECT_GT(s[0].s0, 0);
    EXPECT_EQ(s[1], StokesVector{});
    EXPECT_EQ(s[2], StokesVector{});
}

TEST(PbrdfStokes, SpecularFullyPolarizedAtBrewster) {
    const double theta = brewster_angle(1.5);
    const Vec3d v{std::sin(theta), 0, std::cos(theta)};
    const ShadingGeometry g = mirror_geometry({0, 0, 1}, v, {0, 1, 0});
    Material m;
    m.kd = {0, 0, 0};
    m.ks = {0.2, 0.5, 1.0};
    for (const auto& ch : pbrdf_stokes(g, m)) EXPECT_NEAR(dop(ch), 1.0, 1e-9);
}

TEST(PbrdfStokes, GrazingReturnsZero) {
    const double c = 1e-7;
    const ShadingGeometry g = mirror_geometry({0, 0, 1}, {std::sqrt(1 - c * c), 0, c}, {0, 1, 0});
    for (const auto& ch : pbrdf_stokes(g, Material{})) EXPECT_EQ(ch, StokesVector{});
}

TEST(PbrdfStokes, DiffuseAndSpecularAopAreOrthogonal) {
    std::mt19937_64 rng(3);
    Material m;
    m.kd = m.ks = {1, 1, 1};
    int checked = 0;
    for (int k = 0; k < 5000; ++k) {
        const ShadingGeometry g = random_geometry(rng, 82.8);
        const StokesVector d = pbrdf_stokes_diffuse(g, m)[0], s = pbrdf_stokes_specular(g, m)[0];
        if (dop(d) < 1e-6 || dop(s) < 1e-6) continue;
        const double delta = angle_distance_mod_pi(extract_polarization_info(d).aop, extract_polarization_info(s).aop);
        EXPECT_NEAR(delta, pi / 2, 1e-6);
        EXPECT_GE(dop(s), dop(d));
        ++checked;
    }
    EXPECT_GT(checked, 4000);
}

TEST(PbrdfStokes, LinearInAlbedoAndLight) {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 200; ++k) {
        const ShadingGeometry g = random_geometry(rng);
        Material a = random_material(rng), b = a;
        b.kd = random_material(rng).kd;
        Material sum = a;
        for (int c = 0; c < 3; ++c) sum.kd[c] = a.kd[c] + b.kd[c];
        const StokesRGB sa = pbrdf_stokes(g, a), sb = pbrdf_stokes(g, b), ss = pbrdf_stokes(g, sum);
        Material only_spec = a;
        only_spec.kd = {0, 0, 0};
        const StokesRGB sp = pbrdf_stokes(g, only_spec);
        const StokesRGB s2 = pbrdf_stokes(g, a, {2, 2, 2});
        for (int c = 0; c < 3; ++c)
            for (int j = 0; j < 4; ++j) {
                EXPECT_NEAR(ss[c][j], sa[c][j] + sb[c][j] - sp[c][j], 1e-12 * (1 + std::abs(ss[c][j])));
                EXPECT_NEAR(s2[c][j], 2 * sa[c][j], 1e-12 * (1 + std::abs(s2[c][j])));
            }
    }
}

TEST(PbrdfStokes, Realizable) {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 5000; ++k)
        for (const auto& ch : pbrdf_stokes(random_geometry(rng), random_material(rng)))
            EXPECT_TRUE(is_realizable(ch, 1e-12));
}

TEST(RadianceAtFilter, Examples) {
    const ShadingGeometry normal = mirror_geometry({0, 0, 1}, {0, 0, 1}, {1, 0, 0});
    const RGB r0 = radiance_at_filter(normal, Material{}, {1, 1, 1}, 0.0);
    const RGB r1 = radiance_at_filter(normal, Material{}, {1, 1, 1}, 1.1);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(r0[c], r1[c], 1e-15);

    std::mt19937_64 rng(6);
    Material black;
    black.kd = black.ks = {0, 0, 0};
    for (double a : {0.0, 0.7, 2.0}) {
        const RGB r = radiance_at_filter(random_geometry(rng), black, {1, 1, 1}, a);
        for (double x : r) EXPECT_EQ(x, 0.0);
    }
}

TEST(RadianceAtFilter, ClosedFormMatchesStokesRoute) {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 5000; ++k) {
        const ShadingGeometry g = random_geometry(rng);
        const Material m = random_material(rng);
        const double a = uniform(rng, 0, pi);
        const RGB light{uniform(rng, 0.5, 2), uniform(rng, 0.5, 2), uniform(rng, 0.5, 2)};
        const RGB p = radiance_at_filter(g, m, light, a), q = radiance_at_filter_closed_form(g, m, light, a);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(p[c], q[c], 1e-12 * std::max(1.0, std::abs(p[c])));
    }
}

TEST(RadianceAtFilter, ClosedFormMatchesForGeneralLight) {
    std::mt19937_64 rng(8);
    for (int k = 0; k < 1000; ++k) {
        const ShadingGeometry base = random_geometry(rng, 70);
        Vec3d i = random_unit(rng);
        if (dot(i, base.n) < 0.1) i = normalize(i + base.n * (0.2 - dot(i, base.n)));
        const ShadingGeometry g = general_geometry(base.n, base.v, i, base.camera_x);
        const Material m = random_material(rng);
        const double a = uniform(rng, 0, pi);
        const RGB p = radiance_at_filter(g, m, {1, 1, 1}, a), q = radiance_at_filter_closed_form(g, m, {1, 1, 1}, a);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(p[c], q[c], 1e-12 * std::max(1.0, std::abs(p[c])));
    }
}

TEST(DecomposeRadiance, Examples) {
    std::mt19937_64 rng(9);
    const ShadingGeometry g = random_geometry(rng, 80);
    Material m = random_material(rng);
    m.kd = {0, 0, 0};
    const RadianceSplit r = decompose_radiance(g, m);
    for (double x : r.c_d) EXPECT_EQ(x, 0.0);

    m = random_material(rng);
    const RadianceSplit one = decompose_radiance(g, m, {1, 1, 1}), two = decompose_radiance(g, m, {2, 2, 2});
    for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(two.c_d[c], 2 * one.c_d[c]);
        EXPECT_EQ(two.c_s[c], 2 * one.c_s[c]);
    }
}

TEST(DecomposeRadiance, StokesIsWeightedSumOfBases) {
    std::mt19937_64 rng(10);
    for (int k = 0; k < 500; ++k) {
        const ShadingGeometry g = random_geometry(rng);
        const Material m = random_material(rng);
        const RadianceSplit r = decompose_radiance(g, m);
        const PbrdfBasis<double> b = pbrdf_basis(g, m.roughness, m.ior);
        const StokesRGB s = pbrdf_stokes(g, m);
        for (int c = 0; c < 3; ++c)
            for (int j = 0; j < 4; ++j)
                EXPECT_NEAR(s[c][j], r.c_d[c] * b.diffuse[j] + r.c_s[c] * b.specular[j], 1e-14 * (1 + std::abs(s[c][j])));
    }
}

TEST(DecomposeRadiance, SpecularPeakDivergesWhileLobeStaysNormalized) {
    const ShadingGeometry g = mirror_geometry({0, 0, 1}, normalize(Vec3d{0.3, 0, 1}), {0, 1, 0});
    Material m;
    double prev = 0;
    for (double a : {0.3, 0.1, 0.03, 0.01, 0.003}) {
        m.roughness = a;
        const double cs = decompose_radiance(g, m).c_s[0];
        EXPECT_GT(cs, 5 * prev);
        prev = cs;
        EXPECT_NEAR(ggx_projected_integral(a), 1.0, 1e-3);
    }
}

TEST(SeparateDiffuseSpecular, RecoversComponents) {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 2000; ++k) {
        const ShadingGeometry g = random_geometry(rng);
        if (dot(g.n, g.v) > 0.999) continue;
        const Material m = random_material(rng);
        const StokesRGB all = pbrdf_stokes(g, m), dif = pbrdf_stokes_diffuse(g, m), spec = pbrdf_stokes_specular(g, m);
        for (int c = 0; c < 3; ++c) {
            const auto [d, s] = separate_diffuse_specular(all[c], g, m.ior);
            EXPECT_NEAR(d, dif[c].s0, 1e-8 * (1 + all[c].s0));
            EXPECT_NEAR(s, spec[c].s0, 1e-8 * (1 + all[c].s0));
        }
    }
}
