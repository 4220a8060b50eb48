#include <polrecon/rng.hpp>
#include <polrecon/scene.hpp>
#include <polrecon/scene_config.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace polrecon;
using std::numbers::pi;

namespace {

SdfScene single(Primitive p, double radius = 4.0) {
    SdfScene s;
    s.bounding_radius = radius;
    s.primitives.push_back(p);
    return s;
}

Primitive sphere(Vec3d at = {}, double r = 1.0) {
    Primitive p;
    p.shape = ShapeKind::sphere;
    p.radius = r;
    p.position = at;
    return p;
}

} // namespace

TEST(SdfEval, Examples) {
    const SdfScene s = single(sphere());
    EXPECT_DOUBLE_EQ(sdf_eval(s, {0, 0, 2}), 1.0);
    EXPECT_DOUBLE_EQ(sdf_eval(s, {0, 0, 0}), -1.0);
    SdfScene u;
    u.bounding_radius = 5;
    u.primitives = {sphere({3, 0, 0}), sphere({-3, 0, 0})};
    EXPECT_DOUBLE_EQ(sdf_eval(u, {0, 0, 0}), 2.0);
    EXPECT_TRUE(std::isinf(sdf_eval(SdfScene{}, {0, 0, 0})));
}

TEST(SdfEval, PlacementIsRigidPlusScale) {
    Primitive b;
    b.shape = ShapeKind::box;
    b.half_extents = {1, 0.5, 0.25};
    b.position = {0.5, -0.2, 0.1};
    b.rotation_axis = normalize(Vec3d{1, 2, 3});
    b.rotation_angle = 0.7;
    b.scale = 1.5;
    const SdfScene s = single(b);
    // The +x face centre maps to local (1, 0, 0).
    const Vec3d face = b.position + rotate(Vec3d{1.5, 0, 0}, b.rotation_axis, b.rotation_angle);
    EXPECT_NEAR(sdf_eval(s, face), 0.0, 1e-14);
    EXPECT_NEAR(norm(sdf_normal(s, face) - rotate(Vec3d{1, 0, 0}, b.rotation_axis, b.rotation_angle)), 0, 1e-14);
    const Vec3d out = b.position + rotate(Vec3d{1.5 + 0.3, 0, 0}, b.rotation_axis, b.rotation_angle);
    EXPECT_NEAR(sdf_eval(s, out), 0.3, 1e-14);
}

TEST(SdfEval, UnionBoundsMembers) {
    SdfScene u;
    u.bounding_radius = 5;
    Primitive t;
    t.shape = ShapeKind::torus;
    t.major_radius = 1.0;
    t.minor_radius = 0.3;
    u.primitives = {sphere({1, 0, 0}, 0.7), t};
    std::mt19937_64 rng(1);
    for (int k = 0; k < 1000; ++k) {
        const Vec3d x{uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3)};
        const double d = sdf_eval(u, x);
        for (const auto& p : u.primitives) EXPECT_LE(d, primitive_distance(p, x));
    }
}

TEST(SdfNormal, Examples) {
    EXPECT_LT(norm(sdf_normal(single(sphere()), {0, 0, 1}) - Vec3d{0, 0, 1}), 1e-15);
    Primitive plane;
    plane.shape = ShapeKind::plane;
    const SdfScene ps = single(plane);
    for (const Vec3d& x : {Vec3d{0, 0, 0}, Vec3d{3, -1, 0}}) EXPECT_EQ(sdf_normal(ps, x), (Vec3d{0, 0, 1}));
    Primitive box;
    box.shape = ShapeKind::box;
    box.half_extents = {1, 2, 3};
    EXPECT_EQ(sdf_normal(single(box), {1, 0, 0}), (Vec3d{1, 0, 0}));
}

TEST(SdfNormal, MedialPointIsDegenerate) {
    try {
        sdf_normal(single(sphere()), {0, 0, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_normal);
    }
}

TEST(SdfNormal, AnalyticMatchesFiniteDifferences) {
    Primitive t;
    t.shape = ShapeKind::torus;
    t.major_radius = 1.0;
    t.minor_radius = 0.4;
    t.rotation_axis = normalize(Vec3d{1, 1, 0});
    t.rotation_angle = 0.4;
    const SdfScene s = single(t);
    std::mt19937_64 rng(2);
    for (int k = 0; k < 500; ++k) {
        const Vec3d x{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)};
        const Vec3d q = t.to_local(x);
        if (std::hypot(q.x, q.y) < 0.05 || std::abs(sdf_eval(s, x) + t.minor_radius) < 0.05) continue;
        EXPECT_LT(norm(sdf_gradient(s, x) - sdf_gradient_fd(s, x, 1e-6)), 1e-7);
    }
}

TEST(Density, Examples) {
    const DensityParams p{0.1};
    EXPECT_DOUBLE_EQ(density_from_sdf(0.0, p), 5.0);
    EXPECT_LT(density_from_sdf(50.0, p), 1e-100);
    EXPECT_NEAR(density_from_sdf(-50.0, p), 10.0, 1e-12);
}

TEST(Density, ContinuousMonotoneNonNegative) {
    const DensityParams p{0.05};
    double prev = density_from_sdf(-2.0, p);
    for (int k = 1; k <= 40000; ++k) {
        const double d = -2.0 + 4.0 * k / 40000;
        const double v = density_from_sdf(d, p);
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, prev);
        ASSERT_LT(prev - v, 0.01 * (1.0 / p.beta)); // no jumps on a 1e-4 grid
        prev = v;
    }
    EXPECT_NEAR(density_from_sdf(-1e-15, p), density_from_sdf(1e-15, p), 1e-12);
}

TEST(SceneConfig, ParsesAllShapes) {
    const auto cfg = parse_scene_config(nlohmann::json::parse(R"({
        "scene": {"bounding_radius": 3},
        "primitives": [
          {"shape": "sphere", "radius": 0.5, "position": [1, 0, 0],
           "material": {"kd": [0.1, 0.2, 0.3], "ks": [1, 1, 1], "roughness": 0.2, "ior": 1.6}},
          {"shape": "box", "half_extents": [0.2, 0.3, 0.4], "rotation": [0, 0, 1, 90]},
          {"shape": "torus", "major_radius": 1.0, "minor_radius": 0.2, "scale": 0.5},
          {"shape": "plane", "position": [0, -1, 0], "rotation": [1, 0, 0, -90]}
        ],
        "density": {"beta": 0.01},
        "cameras": [{"position": [0, 0, 5], "look_at": [0, 0, 0], "up": [0, 1, 0], "fov_deg": 30, "width": 8, "height": 6}],
        "render": {"pol_angle_deg": 45, "mode": "volume"}
    })"));
    ASSERT_EQ(cfg.scene.primitives.size(), 4u);
    EXPECT_EQ(cfg.scene.primitives[0].material.kd[2], 0.3);
    EXPECT_EQ(cfg.scene.primitives[0].material.ior, 1.6);
    EXPECT_EQ(cfg.scene.primitives[2].scale, 0.5);
    EXPECT_NEAR(cfg.scene.primitives[1].rotation_angle, pi / 2, 1e-15);
    EXPECT_EQ(cfg.scene.density.beta, 0.01);
    EXPECT_EQ(cfg.cameras[0].height, 6);
    EXPECT_EQ(cfg.render.mode, RenderMode::volume);
    EXPECT_EQ(cfg.render.pol_angle_deg, 45);
    // rotated plane: world normal +y
    EXPECT_LT(norm(sdf_normal(cfg.scene, {0, -1, 0}) - Vec3d{0, 1, 0}), 1e-12);
}

TEST(SceneConfig, SchemaErrorsNameTheField) {
    const auto field_of = [](const char* text) -> std::string {
        try {
            parse_scene_config(nlohmann::json::parse(text));
        } catch (const SchemaError& e) {
            return e.field();
        }
        return "<none>";
    };
    EXPECT_EQ(field_of(R"({"primitives": []})"), "scene");
    EXPECT_EQ(field_of(R"({"scene": {}})"), "scene.bounding_radius");
    EXPECT_EQ(field_of(R"({"scene": {"bounding_radius": 2}, "primitives": [{"shape": "cone"}]})"), "primitives[0].shape");
    EXPECT_EQ(field_of(R"({"scene": {"bounding_radius": 2}, "primitives": [{"shape": "sphere", "material": {"roughness": 0}}]})"),
              "primitives[0].material.roughness");
    EXPECT_EQ(field_of(R"({"scene": {"bounding_radius": 2}, "primitives": [{"shape": "sphere", "material": {"ior": 1.0}}]})"),
              "primitives[0].material.ior");
    EXPECT_EQ(field_of(R"({"scene": {"bounding_radius": 1}, "primitives": [{"shape": "sphere", "radius": 2}]})"), "primitives[0]");
    EXPECT_EQ(field_of(R"({"scene": {"bounding_radius": 1}, "render": {"mode": "raster"}})"), "render.mode");
    EXPECT_EQ(field_of(R"({"scene": {"bounding_radius": 1}, "cameras": [{"position": [0, 0, 3], "width": 0}]})"), "cameras[0].width");
    EXPECT_EQ(field_of(R"({"scene": {"bounding_radius": 1}, "cameras": [{"look_at": [0, 0, 0]}]})"), "cameras[0].position");
}

TEST(SceneConfig, DefaultBetaScalesWithBounds) {
    const auto cfg = parse_scene_config(nlohmann::json::parse(R"({"scene": {"bounding_radius": 2.5}})"));
    EXPECT_DOUBLE_EQ(cfg.scene.density.beta, 2.5e-3);
    EXPECT_TRUE(cfg.scene.primitives.empty());
}

TEST(OrbitCameras, KeepDistanceAndTarget) {
    CameraSpec base;
    base.position = {0, 1, 4};
    const auto cams = orbit_cameras(base, 6);
    ASSERT_EQ(cams.size(), 6u);
    for (const auto& c : cams) EXPECT_NEAR(norm(c.position - base.look_at), norm(base.position - base.look_at), 1e-12);
    EXPECT_EQ(cams[0].position, base.position);
}
