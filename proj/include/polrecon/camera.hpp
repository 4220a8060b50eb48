#pragma once

#include "error.hpp"
#include "vec3.hpp"

#include <cmath>
#include <numbers>

namespace polrecon {

struct Ray {
    Vec3d origin;
    Vec3d dir; // unit
};

/// Pinhole camera. Camera space is right-handed with +x right, +y up and the
/// camera looking down -z; `right`, `up` and `back` are those axes in world
/// space. `fov` is the vertical field of view.
struct Camera {
    Vec3d position;
    Vec3d right{1, 0, 0}, up{0, 1, 0}, back{0, 0, 1};
    double fov = std::numbers::pi / 4;
    int width = 1, height = 1;

    Vec3d forward() const { return -back; }

    static Camera look_at(const Vec3d& position, const Vec3d& target, const Vec3d& up_hint, double fov_deg,
                          int width, int height) {
        if (width <= 0 || height <= 0) fail(ErrorKind::domain, "camera: image size must be positive");
        if (!(fov_deg > 0.0 && fov_deg < 180.0)) fail(ErrorKind::domain, "camera: fov must lie in (0, 180) degrees");
        const Vec3d fwd = target - position;
        if (norm(fwd) == 0.0) fail(ErrorKind::domain, "camera: position equals look_at");
        Camera c;
        c.position = position;
        c.back = -normalize(fwd);
        const Vec3d r = cross(up_hint, c.back);
        if (norm(r) < 1e-12) fail(ErrorKind::domain, "camera: up vector parallel to view direction");
        c.right = normalize(r);
        c.up = cross(c.back, c.right);
        c.fov = fov_deg * std::numbers::pi / 180.0;
        c.width = width;
        c.height = height;
        return c;
    }

    double tan_half() const { return std::tan(0.5 * fov); }
    double aspect() const { return double(width) / double(height); }
};

/// Ray through the centre of pixel (px, py); (0, 0) is the top-left pixel.
inline Ray generate_ray(const Camera& cam, int px, int py) {
    if (px < 0 || py < 0 || px >= cam.width || py >= cam.height)
        fail(ErrorKind::index, "generate_ray: pixel out of bounds");
    const double th = cam.tan_half();
    const double sx = (2.0 * (px + 0.5) / cam.width - 1.0) * th * cam.aspect();
    const double sy = (1.0 - 2.0 * (py + 0.5) / cam.height) * th;
    return {cam.position, normalize(cam.right * sx + cam.up * sy - cam.back)};
}

struct Projection {
    double px = 0.0, py = 0.0; // continuous pixel coordinates; centres sit at k + 0.5
    double distance = 0.0;     // Euclidean distance from the camera centre
    bool in_front = false;
};

inline Projection project(const Camera& cam, const Vec3d& x) {
    const Vec3d d = x - cam.position;
    Projection p;
    const double z = -dot(d, cam.back);
    p.distance = norm(d);
    p.in_front = z > 0.0;
    if (!p.in_front) return p;
    const double th = cam.tan_half();
    const double sx = dot(d, cam.right) / z;
    const double sy = dot(d, cam.up) / z;
    p.px = (sx / (th * cam.aspect()) + 1.0) * 0.5 * cam.width;
    p.py = (1.0 - sy / th) * 0.5 * cam.height;
    return p;
}

} // namespace polrecon
