#pragma once

#include "camera.hpp"
#include "error.hpp"
#include "render.hpp"
#include "scene.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

namespace polrecon {

struct CameraSpec {
    Vec3d position{0, 0, 4};
    Vec3d look_at{0, 0, 0};
    Vec3d up{0, 1, 0};
    double fov_deg = 40.0;
    int width = 32, height = 32;

    Camera camera() const { return Camera::look_at(position, look_at, up, fov_deg, width, height); }
};

struct RenderSettings {
    double pol_angle_deg = 0.0;
    RenderMode mode = RenderMode::sphere_trace;
    int views = 0;              // > 0: orbit this many cameras around cameras[0]
    double orbit_raise_deg = 0; // see orbit_cameras
};

struct SceneConfig {
    SdfScene scene;
    std::vector<CameraSpec> cameras;
    RenderSettings render;
};

inline const char* to_string(RenderMode m) { return m == RenderMode::volume ? "volume" : "sphere_trace"; }

inline RenderMode parse_render_mode(const std::string& s, const std::string& field = "render.mode") {
    if (s == "sphere_trace") return RenderMode::sphere_trace;
    if (s == "volume") return RenderMode::volume;
    throw SchemaError(field, "expected 'sphere_trace' or 'volume', got '" + s + "'");
}

namespace detail {

using json = nlohmann::json;

inline double number(const json& j, const std::string& field) {
    if (!j.is_number()) throw SchemaError(field, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw SchemaError(field, "must be finite");
    return v;
}

inline double number_or(const json& obj, const char* key, double fallback, const std::string& path) {
    return obj.contains(key) ? number(obj.at(key), path + "." + key) : fallback;
}

inline std::vector<double> numbers(const json& j, std::size_t count, const std::string& field) {
    if (!j.is_array() || j.size() != count)
        throw SchemaError(field, "expected an array of " + std::to_string(count) + " numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < count; ++k) out.push_back(number(j[k], field + "[" + std::to_string(k) + "]"));
    return out;
}

inline Vec3d vec3(const json& j, const std::string& field) {
    const auto v = numbers(j, 3, field);
    return {v[0], v[1], v[2]};
}

inline const json& require(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) throw SchemaError(path.empty() ? key : path + "." + key, "missing");
    return obj.at(key);
}

inline Material parse_material(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    Material m;
    if (j.contains("kd")) {
        const auto kd = numbers(j.at("kd"), 3, path + ".kd");
        for (int c = 0; c < 3; ++c) {
            if (kd[c] < 0 || kd[c] > 1) throw SchemaError(path + ".kd", "channels must lie in [0, 1]");
            m.kd[c] = kd[c];
        }
    }
    if (j.contains("ks")) {
        const auto ks = numbers(j.at("ks"), 3, path + ".ks");
        for (int c = 0; c < 3; ++c) {
            if (ks[c] < 0) throw SchemaError(path + ".ks", "channels must be non-negative");
            m.ks[c] = ks[c];
        }
    }
    m.roughness = number_or(j, "roughness", m.roughness, path);
    if (!(m.roughness > 0 && m.roughness <= 1)) throw SchemaError(path + ".roughness", "must lie in (0, 1]");
    m.ior = number_or(j, "ior", m.ior, path);
    if (!(m.ior > 1)) throw SchemaError(path + ".ior", "must exceed 1");
    return m;
}

inline Primitive parse_primitive(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    const json& shape = require(j, "shape", path);
    if (!shape.is_string()) throw SchemaError(path + ".shape", "expected a string");
    const std::string kind = shape.get<std::string>();
    Primitive p;
    if (kind == "sphere") {
        p.shape = ShapeKind::sphere;
        p.radius = number_or(j, "radius", 1.0, path);
        if (!(p.radius > 0)) throw SchemaError(path + ".radius", "must be positive");
    } else if (kind == "box") {
        p.shape = ShapeKind::box;
        if (j.contains("half_extents")) p.half_extents = vec3(j.at("half_extents"), path + ".half_extents");
        if (!(p.half_extents.x > 0 && p.half_extents.y > 0 && p.half_extents.z > 0))
            throw SchemaError(path + ".half_extents", "must be positive");
    } else if (kind == "torus") {
        p.shape = ShapeKind::torus;
        p.major_radius = number_or(j, "major_radius", 1.0, path);
        p.minor_radius = number_or(j, "minor_radius", 0.25, path);
        if (!(p.minor_radius > 0 && p.major_radius > p.minor_radius))
            throw SchemaError(path + ".minor_radius", "need 0 < minor_radius < major_radius");
    } else if (kind == "plane") {
        p.shape = ShapeKind::plane;
    } else {
        throw SchemaError(path + ".shape", "unknown shape '" + kind + "'");
    }
    if (j.contains("position")) p.position = vec3(j.at("position"), path + ".position");
    if (j.contains("rotation")) {
        const auto r = numbers(j.at("rotation"), 4, path + ".rotation");
        const Vec3d axis{r[0], r[1], r[2]};
        if (r[3] != 0.0) {
            if (norm(axis) == 0.0) throw SchemaError(path + ".rotation", "axis must be non-zero");
            p.rotation_axis = normalize(axis);
        }
        p.rotation_angle = r[3] * std::numbers::pi / 180.0;
    }
    p.scale = number_or(j, "scale", 1.0, path);
    if (!(p.scale > 0)) throw SchemaError(path + ".scale", "must be positive");
    if (j.contains("material")) p.material = parse_material(j.at("material"), path + ".material");
    return p;
}

inline CameraSpec parse_camera(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    CameraSpec c;
    c.position = vec3(require(j, "position", path), path + ".position");
    if (j.contains("look_at")) c.look_at = vec3(j.at("look_at"), path + ".look_at");
    if (j.contains("up")) c.up = vec3(j.at("up"), path + ".up");
    c.fov_deg = number_or(j, "fov_deg", c.fov_deg, path);
    if (!(c.fov_deg > 0.0 && c.fov_deg < 180.0)) throw SchemaError(path + ".fov_deg", "must lie in (0, 180)");
    const auto dim = [&](const char* key, int fallback) {
        if (!j.contains(key)) return fallback;
        const json& v = j.at(key);
        if (!v.is_number_integer() || v.get<long long>() <= 0 || v.get<long long>() > 16384)
            throw SchemaError(path + "." + key, "expected a positive integer");
        return int(v.get<long long>());
    };
    c.width = dim("width", c.width);
    c.height = dim("height", c.height);
    try {
        (void)c.camera();
    } catch (const Error& e) {
        throw SchemaError(path, e.what());
    }
    return c;
}

} // namespace detail

inline SceneConfig parse_scene_config(const nlohmann::json& root) {
    using detail::require;
    if (!root.is_object()) throw SchemaError("<root>", "expected an object");
    SceneConfig cfg;
    const auto& scene = require(root, "scene", "");
    cfg.scene.bounding_radius = detail::number(require(scene, "bounding_radius", "scene"), "scene.bounding_radius");
    if (!(cfg.scene.bounding_radius > 0)) throw SchemaError("scene.bounding_radius", "must be positive");

    if (root.contains("primitives")) {
        const auto& prims = root.at("primitives");
        if (!prims.is_array()) throw SchemaError("primitives", "expected an array");
        for (std::size_t k = 0; k < prims.size(); ++k) {
            const std::string path = "primitives[" + std::to_string(k) + "]";
            Primitive p = detail::parse_primitive(prims[k], path);
            if (norm(p.position) + p.extent() > cfg.scene.bounding_radius * (1 + 1e-12) && p.shape != ShapeKind::plane)
                throw SchemaError(path, "primitive extends beyond scene.bounding_radius");
            cfg.scene.primitives.push_back(p);
        }
    }

    cfg.scene.density.beta = 1e-3 * cfg.scene.bounding_radius;
    if (root.contains("density"))
        cfg.scene.density.beta = detail::number_or(root.at("density"), "beta", cfg.scene.density.beta, "density");
    if (!(cfg.scene.density.beta > 0)) throw SchemaError("density.beta", "must be positive");

    if (root.contains("cameras")) {
        const auto& cams = root.at("cameras");
        if (!cams.is_array()) throw SchemaError("cameras", "expected an array");
        for (std::size_t k = 0; k < cams.size(); ++k)
            cfg.cameras.push_back(detail::parse_camera(cams[k], "cameras[" + std::to_string(k) + "]"));
    }

    if (root.contains("render")) {
        const auto& r = root.at("render");
        if (!r.is_object()) throw SchemaError("render", "expected an object");
        cfg.render.pol_angle_deg = detail::number_or(r, "pol_angle_deg", 0.0, "render");
        if (r.contains("mode")) {
            if (!r.at("mode").is_string()) throw SchemaError("render.mode", "expected a string");
            cfg.render.mode = parse_render_mode(r.at("mode").get<std::string>());
        }
        const double views = detail::number_or(r, "views", 0.0, "render");
        if (views < 0 || views != std::floor(views)) throw SchemaError("render.views", "expected a non-negative integer");
        cfg.render.views = int(views);
        cfg.render.orbit_raise_deg = detail::number_or(r, "orbit_raise_deg", 0.0, "render");
    }
    return cfg;
}

inline SceneConfig load_scene_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open scene config '" + path.string() + "'");
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("<root>", std::string("invalid JSON: ") + e.what());
    }
    return parse_scene_config(root);
}

/// `count` cameras on a ring around the look-at point of `base`, keeping its
/// distance, intrinsics and image size. Odd-numbered cameras are raised by
/// `raise_deg` towards the up axis, which varies the viewing elevation.
inline std::vector<CameraSpec> orbit_cameras(const CameraSpec& base, int count, double raise_deg = 0.0) {
    std::vector<CameraSpec> out;
    const Vec3d offset = base.position - base.look_at;
    const Vec3d axis = normalize(base.up);
    for (int k = 0; k < count; ++k) {
        CameraSpec c = base;
        Vec3d o = rotate(offset, axis, 2.0 * std::numbers::pi * k / count);
        const Vec3d tilt = cross(o, axis);
        if (k % 2 == 1 && raise_deg != 0.0 && norm(tilt) > 0.0)
            o = rotate(o, normalize(tilt), raise_deg * std::numbers::pi / 180.0);
        c.position = base.look_at + o;
        out.push_back(c);
    }
    return out;
}

/// The cameras a render uses: an orbit of `views` cameras around the first
/// listed camera when `views` > 0, otherwise the listed cameras.
inline std::vector<CameraSpec> resolve_cameras(const SceneConfig& cfg, int views) {
    if (cfg.cameras.empty()) throw SchemaError("cameras", "at least one camera is required");
    if (views <= 0) return cfg.cameras;
    return orbit_cameras(cfg.cameras.front(), views, cfg.render.orbit_raise_deg);
}

} // namespace polrecon
