#pragma once

#include "camera.hpp"
#include "error.hpp"
#include "jet.hpp"
#include "parallel.hpp"
#include "pbrdf.hpp"
#include "polcore.hpp"
#include "render.hpp"
#include "rng.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace polrecon {

/// Unknown layout for one point: theta, phi, kd[3], ks[3], roughness, and the
/// shared polarizer angle last.
inline constexpr int kPointUnknowns = 9;
inline constexpr int kUnknowns = 10;
inline constexpr int kPolIndex = 9;
inline constexpr double kRoughnessMax = 1.0;

/// Normal as spherical angles in a per-point frame. theta = pi/2, phi = 0 is
/// `frame_n`, so the parameterization is regular near the current estimate;
/// `recenter` moves the frame onto the current normal.
struct PointUnknowns {
    double theta = std::numbers::pi / 2;
    double phi = 0.0;
    Vec3d frame_n{0, 0, 1}, frame_t{1, 0, 0}, frame_b{0, 1, 0};
    RGB kd{0.5, 0.5, 0.5};
    RGB ks{0.5, 0.5, 0.5};
    double roughness = 0.5;

    static PointUnknowns facing(const Vec3d& normal) {
        PointUnknowns p;
        p.frame_n = normalize(normal);
        p.frame_t = any_orthonormal(p.frame_n);
        p.frame_b = cross(p.frame_n, p.frame_t);
        return p;
    }

    Vec3d normal() const;

    void recenter() {
        const PointUnknowns f = facing(normal());
        theta = f.theta;
        phi = f.phi;
        frame_n = f.frame_n;
        frame_t = f.frame_t;
        frame_b = f.frame_b;
    }
};

template <typename T>
Vec3<T> normal_from_angles(const T& theta, const T& phi, const PointUnknowns& frame) {
    using std::cos;
    using std::sin;
    const T st = sin(theta);
    return Vec3<T>(frame.frame_n) * (st * cos(phi)) + Vec3<T>(frame.frame_t) * (st * sin(phi)) +
           Vec3<T>(frame.frame_b) * cos(theta);
}

inline Vec3d PointUnknowns::normal() const { return normal_from_angles(theta, phi, *this); }

/// One view of one surface point. `view` points from the surface to the camera.
struct ViewObservation {
    Vec3d view;
    Vec3d camera_x;
    RGB intensity{};
    double weight = 1.0;
};

using PointObservations = std::vector<ViewObservation>;

struct Observations {
    std::vector<PointObservations> points;
    double ior = 1.5; // known; not an unknown of the solve
};

struct SolveState {
    std::vector<PointUnknowns> points;
    double pol_angle = 0.0; // [0, pi)
    int iterations = 0;
    std::vector<double> loss_trace;
};

inline std::string unknown_name(std::size_t point, int k) {
    static const char* names[kPointUnknowns] = {"theta", "phi", "kd[0]", "kd[1]", "kd[2]",
                                               "ks[0]", "ks[1]", "ks[2]", "roughness"};
    if (k == kPolIndex) return "pol_angle";
    return "points[" + std::to_string(point) + "]." + names[k];
}

template <typename T>
using PointVector = std::array<T, kUnknowns>;

inline PointVector<double> point_vector(const PointUnknowns& p, double pol_angle) {
    return {p.theta, p.phi, p.kd[0], p.kd[1], p.kd[2], p.ks[0], p.ks[1], p.ks[2], p.roughness, pol_angle};
}

inline void assign_point_vector(const PointVector<double>& x, PointUnknowns& p, double& pol_angle) {
    p.theta = x[0];
    p.phi = x[1];
    for (int c = 0; c < 3; ++c) {
        p.kd[c] = x[2 + c];
        p.ks[c] = x[5 + c];
    }
    p.roughness = x[8];
    pol_angle = x[kPolIndex];
}

/// Filtered intensity predicted for one view, mirror light (h = n), unit
/// light radiance. Returns false at grazing geometry.
template <typename T>
bool predict_intensity(const Vec3<T>& n, const PointVector<T>& x, const ViewObservation& obs, double ior,
                       std::array<T, 3>& out) {
    const Vec3<T> v(obs.view);
    const T nv = dot(n, v);
    if (value_of(nv) < kGrazingCos) return false;
    const Vec3<T> i = n * (2.0 * nv) - v;
    const PbrdfBasis<T> b = pbrdf_basis<T>(n, v, i, Vec3<T>(obs.camera_x), x[8], ior);
    if (!b.valid) return false;
    for (int c = 0; c < 3; ++c) {
        const Stokes<T> s = (x[2 + c] * b.diffuse_weight) * b.diffuse + (x[5 + c] * b.specular_weight) * b.specular;
        out[c] = filter_intensity(s, x[kPolIndex]);
    }
    return true;
}

/// Weighted residuals (predicted - observed) of one point, 3 per view.
/// Degenerate views contribute zeros and are counted.
template <typename T>
std::size_t point_residuals(const PointVector<T>& x, const PointUnknowns& frame, const PointObservations& obs,
                            double ior, T* out) {
    const Vec3<T> n = normal_from_angles(x[0], x[1], frame);
    std::size_t degenerate = 0;
    std::array<T, 3> pred;
    for (std::size_t k = 0; k < obs.size(); ++k) {
        if (!predict_intensity(n, x, obs[k], ior, pred)) {
            ++degenerate;
            for (int c = 0; c < 3; ++c) out[3 * k + c] = T(0.0);
            continue;
        }
        for (int c = 0; c < 3; ++c) out[3 * k + c] = (pred[c] - obs[k].intensity[c]) * obs[k].weight;
    }
    return degenerate;
}

struct ResidualVector {
    std::vector<double> values;
    std::size_t degenerate = 0;
};

inline void check_observations(const SolveState& state, const Observations& obs) {
    if (state.points.size() != obs.points.size())
        fail(ErrorKind::domain, "state and observations disagree on the number of points");
}

inline ResidualVector residuals(const SolveState& state, const Observations& obs) {
    check_observations(state, obs);
    ResidualVector r;
    for (std::size_t p = 0; p < obs.points.size(); ++p) {
        const std::size_t base = r.values.size();
        r.values.resize(base + 3 * obs.points[p].size());
        r.degenerate += point_residuals(point_vector(state.points[p], state.pol_angle), state.points[p],
                                        obs.points[p], obs.ior, r.values.data() + base);
    }
    return r;
}

/// All unknowns as one vector: 9 per point, then the polarizer angle.
inline std::vector<double> pack_state(const SolveState& state) {
    std::vector<double> x;
    x.reserve(kPointUnknowns * state.points.size() + 1);
    for (const auto& p : state.points) {
        const auto v = point_vector(p, state.pol_angle);
        x.insert(x.end(), v.begin(), v.begin() + kPointUnknowns);
    }
    x.push_back(state.pol_angle);
    return x;
}

/// 1/2 sum of squared residuals at packed unknowns `x`, using the normal
/// frames of `frames`. Any scalar type works; long double serves as the
/// finite-difference reference.
template <typename T>
T half_squared_loss(const std::vector<T>& x, const SolveState& frames, const Observations& obs) {
    check_observations(frames, obs);
    T total(0.0);
    std::vector<T> r;
    for (std::size_t p = 0; p < obs.points.size(); ++p) {
        PointVector<T> xp;
        for (int k = 0; k < kPointUnknowns; ++k) xp[k] = x[kPointUnknowns * p + k];
        xp[kPolIndex] = x.back();
        r.assign(3 * obs.points[p].size(), T(0.0));
        point_residuals(xp, frames.points[p], obs.points[p], obs.ior, r.data());
        for (const T& v : r) total += v * v;
    }
    return T(0.5) * total;
}

using PointJet = Jet<double, kUnknowns>;

/// Residuals and their exact Jacobian (rows: 3 per view, columns: the 10
/// unknowns) for one point.
inline std::size_t point_jacobian(const PointVector<double>& x, const PointUnknowns& frame,
                                  const PointObservations& obs, double ior, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    PointVector<PointJet> xj;
    for (int k = 0; k < kUnknowns; ++k) xj[k] = PointJet(x[k], k);
    std::vector<PointJet> rj(3 * obs.size());
    const std::size_t degenerate = point_residuals(xj, frame, obs, ior, rj.data());
    r.resize(Eigen::Index(rj.size()));
    J.resize(Eigen::Index(rj.size()), kUnknowns);
    for (std::size_t i = 0; i < rj.size(); ++i) {
        r[Eigen::Index(i)] = rj[i].a;
        J.row(Eigen::Index(i)) = rj[i].v.transpose();
    }
    return degenerate;
}

inline Eigen::MatrixXd point_jacobian(const PointUnknowns& p, double pol_angle, const PointObservations& obs,
                                      double ior) {
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    point_jacobian(point_vector(p, pol_angle), p, obs, ior, r, J);
    return J;
}

/// Numerical rank: singular values above rel_tol * the largest.
inline int numeric_rank(const Eigen::MatrixXd& J, double rel_tol = 1e-9) {
    if (J.size() == 0) return 0;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s[i] > rel_tol * s[0];
    return rank;
}

/// Gradient of 1/2 |residuals|^2 over the packed unknowns.
inline std::vector<double> gradient(const SolveState& state, const Observations& obs) {
    check_observations(state, obs);
    std::vector<double> g(kPointUnknowns * state.points.size() + 1, 0.0);
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    for (std::size_t p = 0; p < state.points.size(); ++p) {
        point_jacobian(point_vector(state.points[p], state.pol_angle), state.points[p], obs.points[p], obs.ior, r, J);
        const Eigen::VectorXd gp = J.transpose() * r;
        for (int k = 0; k < kUnknowns; ++k) {
            if (!std::isfinite(gp[k])) fail(ErrorKind::numeric, "non-finite gradient for " + unknown_name(p, k));
        }
        for (int k = 0; k < kPointUnknowns; ++k) g[kPointUnknowns * p + k] = gp[k];
        g.back() += gp[kPolIndex];
    }
    return g;
}

struct SolvePointOptions {
    bool free_pol = true;
    bool fix_normal = false;
    double ior = 1.5;
    int max_iterations = 500;
    double step_tolerance = 1e-10;
    double initial_damping = 1e-3;
    int recenter_every = 50;
};

struct PointSolveResult {
    PointUnknowns point;
    double pol_angle = 0.0;
    double loss = 0.0; // 1/2 sum of squared residuals
    double l1 = 0.0;   // sum of absolute residuals
    int iterations = 0;
    bool converged = false;
    bool rank_deficient = false;
    std::size_t degenerate = 0;
    std::vector<double> loss_trace; // accepted steps
};

namespace detail {

inline void project_to_bounds(PointVector<double>& x) {
    for (int c = 0; c < 3; ++c) {
        x[2 + c] = std::clamp(x[2 + c], 0.0, 1.0);
        x[5 + c] = std::max(x[5 + c], 0.0);
    }
    x[8] = std::clamp(x[8], kRoughnessMin, kRoughnessMax);
}

// Same normal, canonical angle ranges.
inline void wrap_angles(PointVector<double>& x) {
    constexpr double pi = std::numbers::pi;
    double theta = std::fmod(x[0], 2 * pi);
    if (theta < 0) theta += 2 * pi;
    if (theta > pi) {
        theta = 2 * pi - theta;
        x[1] += pi;
    }
    x[0] = theta;
    x[1] = std::remainder(x[1], 2 * pi);
    if (x[1] >= pi) x[1] -= 2 * pi;
    x[kPolIndex] = canonical_angle(x[kPolIndex]);
}

inline double half_sq(const Eigen::VectorXd& r) { return 0.5 * r.squaredNorm(); }

} // namespace detail

/// Damped Gauss-Newton (Levenberg damping, x10 on rejection, x0.1 on
/// acceptance) with projection onto the bounds.
inline PointSolveResult solve_point(const PointObservations& obs, const PointUnknowns& init, double pol_angle,
                                    const SolvePointOptions& opt = {}) {
    if (obs.empty()) fail(ErrorKind::domain, "solve_point: no observations");
    std::vector<int> active;
    for (int k = opt.fix_normal ? 2 : 0; k < kPointUnknowns; ++k) active.push_back(k);
    if (opt.free_pol) active.push_back(kPolIndex);
    const Eigen::Index m = Eigen::Index(active.size());

    PointUnknowns frame = init;
    PointVector<double> x = point_vector(init, pol_angle);
    detail::project_to_bounds(x);

    Eigen::VectorXd r, r_trial(Eigen::Index(3 * obs.size()));
    Eigen::MatrixXd J;
    PointSolveResult res;
    res.degenerate = point_jacobian(x, frame, obs, opt.ior, r, J);
    double loss = detail::half_sq(r);
    res.loss_trace.push_back(loss);
    double lambda = opt.initial_damping;
    int since_recenter = 0;

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        Eigen::MatrixXd Ja(J.rows(), m);
        for (Eigen::Index j = 0; j < m; ++j) Ja.col(j) = J.col(active[j]);
        const Eigen::VectorXd g = Ja.transpose() * r;
        Eigen::MatrixXd A = Ja.transpose() * Ja;
        A.diagonal().array() += lambda;
        const Eigen::VectorXd delta = A.ldlt().solve(-g);
        if (!delta.allFinite()) {
            lambda *= 10.0;
            continue;
        }
        PointVector<double> trial = x;
        for (Eigen::Index j = 0; j < m; ++j) trial[active[j]] += delta[j];
        detail::project_to_bounds(trial);
        double step = 0.0;
        for (int k = 0; k < kUnknowns; ++k) step += (trial[k] - x[k]) * (trial[k] - x[k]);
        if (std::sqrt(step) < opt.step_tolerance) {
            res.converged = true;
            break;
        }
        // Turning a view grazing would zero its residuals; never accept that.
        const std::size_t trial_degenerate = point_residuals(trial, frame, obs, opt.ior, r_trial.data());
        const double trial_loss = detail::half_sq(r_trial);
        if (trial_loss < loss && trial_degenerate <= res.degenerate) {
            x = trial;
            detail::wrap_angles(x);
            lambda = std::max(lambda * 0.1, 1e-15);
            if (++since_recenter >= opt.recenter_every) {
                double pol = 0.0;
                assign_point_vector(x, frame, pol);
                frame.recenter();
                x = point_vector(frame, pol);
                since_recenter = 0;
            }
            res.degenerate = point_jacobian(x, frame, obs, opt.ior, r, J);
            loss = detail::half_sq(r);
            res.loss_trace.push_back(loss);
        } else {
            lambda *= 10.0;
            if (lambda > 1e20) break;
        }
    }

    assign_point_vector(x, frame, res.pol_angle);
    res.point = frame;
    res.pol_angle = canonical_angle(res.pol_angle);
    res.loss = loss;
    res.l1 = r.lpNorm<1>();
    Eigen::MatrixXd Ja(J.rows(), m);
    for (Eigen::Index j = 0; j < m; ++j) Ja.col(j) = J.col(active[j]);
    res.rank_deficient = numeric_rank(Ja) < m;
    return res;
}

inline Vec3d mean_view(const PointObservations& obs) {
    Vec3d s{};
    for (const auto& o : obs) s += o.view;
    if (norm(s) == 0.0) fail(ErrorKind::domain, "observations have no mean view direction");
    return normalize(s);
}

/// Default start: gray material, roughness 0.5, normal along the mean view.
inline PointUnknowns default_init(const PointObservations& obs) { return PointUnknowns::facing(mean_view(obs)); }

inline PointUnknowns random_init(const PointObservations& obs, std::mt19937_64& rng) {
    const Vec3d mean = mean_view(obs);
    // A normal every view sees from the front; the mean view if none is found.
    Vec3d n = mean;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const double z = uniform(rng, -1.0, 1.0), a = uniform(rng, -std::numbers::pi, std::numbers::pi);
        const double s = std::sqrt(1.0 - z * z);
        const Vec3d cand{s * std::cos(a), s * std::sin(a), z};
        double worst = 1.0;
        for (const auto& o : obs) worst = std::min(worst, dot(cand, o.view));
        if (worst > 0.05) {
            n = cand;
            break;
        }
    }
    PointUnknowns p = PointUnknowns::facing(n);
    for (int c = 0; c < 3; ++c) {
        p.kd[c] = uniform01(rng);
        p.ks[c] = uniform01(rng);
    }
    p.roughness = uniform(rng, 0.05, 1.0);
    return p;
}

/// Best of `restarts` solves: the first from default_init (at `pol_angle`),
/// the rest from seeded random starts (random angle too when it is free).
inline PointSolveResult solve_point_restarts(const PointObservations& obs, double pol_angle,
                                             const SolvePointOptions& opt, int restarts, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    PointSolveResult best;
    best.loss = std::numeric_limits<double>::infinity();
    for (int k = 0; k < std::max(restarts, 1); ++k) {
        PointUnknowns init = default_init(obs);
        double pol = pol_angle;
        if (k > 0) {
            init = random_init(obs, rng);
            if (opt.free_pol) pol = uniform(rng, 0.0, std::numbers::pi);
        }
        PointSolveResult r = solve_point(obs, init, pol, opt);
        if (r.loss < best.loss) best = std::move(r);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Multi-view scenes

struct DatasetView {
    Camera camera;
    StokesImage record;  // only mask, depth and normal are read
    RGBImage intensity;  // the captured filtered image
};

struct SceneSolveOptions {
    bool known_geometry = false; // fix normals to the recorded ones
    double ior = 1.5;
    int max_points = 48;
    int pixel_stride = 2;
    int silhouette_margin = 1; // pixels kept between interpolation support and background
    int grid_samples = 64;
    int restarts = 2; // per point and angle, in addition to the warm start
    int workers = 1;
    std::uint64_t seed = 0;
    SolvePointOptions point;
};

struct ScenePoint {
    Vec3d position;
    Vec3d recorded_normal;
    int view = 0, px = 0, py = 0; // where the point was sampled
};

struct SceneSolveResult {
    SolveState state;
    std::vector<ScenePoint> samples;
    Observations observations;
    std::vector<PointSolveResult> point_results;
    std::vector<double> grid_angles, grid_losses;
    double loss = 0.0, l1 = 0.0;
    double profile_range = 0.0;
    double signal = 0.0; // sum of squared observations
    bool identifiable = true;
    bool underdetermined = false; // fewer than four views available
};

namespace detail {

inline std::array<double, 4> catmull_rom(double t) {
    const double t2 = t * t, t3 = t2 * t;
    return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t), 0.5 * (t3 - t2)};
}

// Bicubic sample of intensity and depth at continuous pixel coordinates.
// The 4x4 support, grown by `margin` pixels, must be all hits: shading
// changes fastest near silhouettes, where interpolation is least accurate.
inline bool sample_view(const DatasetView& view, double px, double py, int margin, RGB& intensity, double& depth) {
    const double u = px - 0.5, v = py - 0.5;
    const int ix = int(std::floor(u)), iy = int(std::floor(v));
    const int lo = 1 + margin, hi = 2 + margin;
    if (ix - lo < 0 || iy - lo < 0 || ix + hi >= view.record.width || iy + hi >= view.record.height) return false;
    for (int j = -lo; j <= hi; ++j)
        for (int i = -lo; i <= hi; ++i)
            if (!view.record.at(ix + i, iy + j).hit) return false;
    const auto wx = catmull_rom(u - ix), wy = catmull_rom(v - iy);
    intensity = {0, 0, 0};
    depth = 0.0;
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) {
            const int x = ix - 1 + i, y = iy - 1 + j;
            const PixelRecord& rec = view.record.at(x, y);
            const double w = wx[i] * wy[j];
            for (int c = 0; c < 3; ++c) intensity[c] += w * view.intensity.at(x, y)[c];
            depth += w * rec.depth;
        }
    return true;
}

inline PointObservations gather_observations(const std::vector<DatasetView>& views, const ScenePoint& pt,
                                             bool known_geometry, int margin) {
    PointObservations obs;
    for (std::size_t k = 0; k < views.size(); ++k) {
        const Camera& cam = views[k].camera;
        ViewObservation o;
        o.view = normalize(cam.position - pt.position);
        o.camera_x = cam.right;
        if (int(k) == pt.view) {
            o.intensity = views[k].intensity.at(pt.px, pt.py);
        } else {
            const Projection p = project(cam, pt.position);
            double depth = 0.0;
            if (!p.in_front || !sample_view(views[k], p.px, p.py, margin, o.intensity, depth)) continue;
            if (std::abs(depth - p.distance) > 1e-2 * p.distance) continue; // occluded
        }
        if (known_geometry && dot(pt.recorded_normal, o.view) < 0.05) continue;
        obs.push_back(o);
    }
    return obs;
}

} // namespace detail

/// Samples surface points from the views' hit pixels and pairs each with its
/// observations in every view that sees it.
inline void sample_scene_points(const std::vector<DatasetView>& views, const SceneSolveOptions& opt,
                                std::vector<ScenePoint>& points, Observations& obs) {
    const std::size_t min_views = std::min<std::size_t>(4, views.size());
    std::vector<ScenePoint> cand_points;
    std::vector<PointObservations> cand_obs;
    bool any_hit = false;
    const int stride = std::max(opt.pixel_stride, 1);
    for (std::size_t k = 0; k < views.size(); ++k) {
        const DatasetView& view = views[k];
        for (int y = 0; y < view.record.height; y += stride)
            for (int x = 0; x < view.record.width; x += stride) {
                const PixelRecord& rec = view.record.at(x, y);
                if (!rec.hit) continue;
                any_hit = true;
                const Ray ray = generate_ray(view.camera, x, y);
                ScenePoint pt{ray.origin + ray.dir * rec.depth, rec.normal, int(k), x, y};
                PointObservations o = detail::gather_observations(views, pt, opt.known_geometry, opt.silhouette_margin);
                if (o.size() < min_views) continue;
                cand_points.push_back(pt);
                cand_obs.push_back(std::move(o));
            }
    }
    if (!any_hit) fail(ErrorKind::no_signal, "dataset contains no foreground pixels");
    if (cand_points.empty()) fail(ErrorKind::no_signal, "no surface point is seen by enough views");

    std::vector<std::size_t> order(cand_points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(mix_seed(opt.seed, 0));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    order.resize(std::min<std::size_t>(order.size(), std::max(opt.max_points, 1)));
    std::sort(order.begin(), order.end());

    points.clear();
    obs.points.clear();
    obs.ior = opt.ior;
    for (std::size_t i : order) {
        points.push_back(cand_points[i]);
        obs.points.push_back(cand_obs[i]);
    }
}

/// Recovers per-point unknowns and the shared polarizer angle. The angle is
/// found by minimizing the profile loss (points re-solved per angle) over a
/// uniform grid on [0, pi), then refined with Brent's method.
inline SceneSolveResult solve_scene(const std::vector<DatasetView>& views, const SceneSolveOptions& opt = {}) {
    if (views.empty()) fail(ErrorKind::no_signal, "dataset has no views");
    SceneSolveResult out;
    out.underdetermined = views.size() < 4;
    sample_scene_points(views, opt, out.samples, out.observations);
    const Observations& obs = out.observations;
    const std::size_t n = obs.points.size();
    for (const auto& po : obs.points)
        for (const auto& o : po)
            for (double v : o.intensity) out.signal += v * v;

    SolvePointOptions popt = opt.point;
    popt.free_pol = false;
    popt.fix_normal = opt.known_geometry;
    popt.ior = opt.ior;

    std::vector<PointUnknowns> defaults(n);
    for (std::size_t p = 0; p < n; ++p)
        defaults[p] = opt.known_geometry ? PointUnknowns::facing(out.samples[p].recorded_normal)
                                         : default_init(obs.points[p]);

    struct Profile {
        double loss = 0.0;
        std::vector<PointSolveResult> points;
    };
    int evaluations = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    const auto evaluate = [&](double angle, const std::vector<PointSolveResult>* warm) {
        Profile prof;
        prof.points.resize(n);
        const std::uint64_t eval_seed = mix_seed(opt.seed, std::uint64_t(evaluations) + 1);
        parallel_for(n, opt.workers, [&](std::size_t p) {
            std::mt19937_64 rng(mix_seed(eval_seed, p));
            PointSolveResult best = solve_point(obs.points[p], defaults[p], angle, popt);
            const auto consider = [&](const PointUnknowns& init) {
                PointSolveResult r = solve_point(obs.points[p], init, angle, popt);
                if (r.loss < best.loss) best = std::move(r);
            };
            if (warm) consider((*warm)[p].point);
            for (int k = 0; k < opt.restarts; ++k) {
                PointUnknowns init = random_init(obs.points[p], rng);
                if (opt.known_geometry) {
                    const PointUnknowns fixed = defaults[p];
                    init.theta = fixed.theta;
                    init.phi = fixed.phi;
                    init.frame_n = fixed.frame_n;
                    init.frame_t = fixed.frame_t;
                    init.frame_b = fixed.frame_b;
                }
                consider(init);
            }
            prof.points[p] = std::move(best);
        });
        for (const auto& r : prof.points) prof.loss += r.loss; // fixed order
        ++evaluations;
        best_loss = std::min(best_loss, prof.loss);
        out.state.loss_trace.push_back(best_loss);
        return prof;
    };

    const int grid = std::max(opt.grid_samples, 3);
    const double step = std::numbers::pi / grid;
    std::vector<Profile> profiles;
    profiles.reserve(grid);
    for (int j = 0; j < grid; ++j) {
        profiles.push_back(evaluate(j * step, j > 0 ? &profiles.back().points : nullptr));
        out.grid_angles.push_back(j * step);
        out.grid_losses.push_back(profiles.back().loss);
    }
    const auto [lo, hi] = std::minmax_element(out.grid_losses.begin(), out.grid_losses.end());
    out.profile_range = *hi - *lo;
    out.identifiable = out.profile_range > 1e-10 * out.signal;
    const int jbest = int(lo - out.grid_losses.begin());

    double best_angle = jbest * step;
    Profile best = profiles[jbest];
    if (out.identifiable) {
        const std::vector<PointSolveResult> warm = profiles[jbest].points;
        const auto f = [&](double a) {
            Profile p = evaluate(a, &warm);
            const double loss = p.loss;
            if (loss < best.loss) {
                best = std::move(p);
                best_angle = a;
            }
            return loss;
        };
        std::uintmax_t max_iter = 80;
        boost::math::tools::brent_find_minima(f, best_angle - step, best_angle + step,
                                              std::numeric_limits<double>::digits / 2, max_iter);
    }

    out.state.pol_angle = canonical_angle(best_angle);
    out.state.iterations = evaluations;
    out.point_results = std::move(best.points);
    for (const auto& r : out.point_results) {
        out.state.points.push_back(r.point);
        out.loss += r.loss;
        out.l1 += r.l1;
    }
    return out;
}

} // namespace polrecon
