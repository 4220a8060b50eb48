#pragma once

#include "dataset.hpp"
#include "image_io.hpp"
#include "inverse.hpp"
#include "metrics.hpp"
#include "render.hpp"
#include "scene_config.hpp"

#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace polrecon {

inline constexpr double kDeg = std::numbers::pi / 180.0;

namespace detail {

inline void make_output_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        fail(ErrorKind::io, "cannot create output directory '" + dir.string() + "'");
}

inline std::string join(const std::vector<double>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? " " : "") + KeyValueFile::format_number(values[i]);
    return s;
}

inline std::string yes_no(bool b) { return b ? "true" : "false"; }

} // namespace detail

// ---------------------------------------------------------------------------
// render

struct RenderCommand {
    std::filesystem::path scene;
    std::filesystem::path out;
    std::uint64_t seed = 0;
    int workers = 1;
    std::optional<double> pol_angle_deg; // defaults to the config's
    std::optional<RenderMode> mode;      // defaults to the config's
    int views = 0;                       // > 0 overrides the config's camera set
};

/// Renders every camera: SVIM record, filtered intensity and s0 (float64
/// .npy), a PNG preview of the filtered image, and the manifest.
inline Manifest cmd_render(const RenderCommand& cmd) {
    const SceneConfig cfg = load_scene_config(cmd.scene);
    Manifest m;
    m.dir = cmd.out;
    m.scene_file = "scene.json";
    m.config = cfg;
    m.mode = cmd.mode.value_or(cfg.render.mode);
    m.seed = cmd.seed;
    m.pol_angle_deg = cmd.pol_angle_deg.value_or(cfg.render.pol_angle_deg);
    m.cameras = resolve_cameras(cfg, cmd.views > 0 ? cmd.views : cfg.render.views);

    detail::make_output_dir(cmd.out);
    std::error_code ec;
    const std::filesystem::path scene_copy = cmd.out / m.scene_file;
    if (!std::filesystem::equivalent(cmd.scene, scene_copy, ec)) {
        std::filesystem::copy_file(cmd.scene, scene_copy, std::filesystem::copy_options::overwrite_existing, ec);
        if (ec) fail(ErrorKind::io, "cannot copy scene config into '" + cmd.out.string() + "'");
    }

    for (std::size_t k = 0; k < m.cameras.size(); ++k) {
        RenderOptions opt;
        opt.mode = m.mode;
        opt.workers = cmd.workers;
        opt.seed = mix_seed(cmd.seed, k);
        const StokesImage img = render_stokes_image(cfg.scene, m.cameras[k].camera(), opt);
        const RGBImage filtered = render_polarized_image(img, m.pol_angle_deg * kDeg);
        m.files.push_back(view_files(k));
        write_stokes_image(cmd.out / m.files[k].svim, img);
        write_npy(cmd.out / m.files[k].intensity, to_npy(filtered));
        write_npy(cmd.out / m.files[k].s0, to_npy(total_intensity_image(img)));
        write_png(cmd.out / m.files[k].png, filtered);
    }
    manifest_entries(m).write(cmd.out / kManifestName);
    return m;
}

// ---------------------------------------------------------------------------
// solve

struct SolveCommand {
    std::filesystem::path manifest;
    std::filesystem::path out; // report directory
    std::uint64_t seed = 0;
    int workers = 1;
    bool known_geometry = false;
    int max_points = 48;
};

struct SolveSummary {
    SceneSolveResult result;
    double true_angle_deg = 0.0;
    double error_deg = 0.0; // mod 180
    KeyValueFile report;
};

/// Solves a rendered dataset and writes `report.txt`. The true angle in the
/// manifest is used only to score the result.
inline SolveSummary cmd_solve(const SolveCommand& cmd) {
    const Manifest m = read_manifest(cmd.manifest);
    const std::vector<DatasetView> views = load_dataset_views(m);

    SceneSolveOptions opt;
    opt.known_geometry = cmd.known_geometry;
    opt.seed = cmd.seed;
    opt.workers = cmd.workers;
    opt.max_points = cmd.max_points;
    if (!m.config.scene.primitives.empty()) opt.ior = m.config.scene.primitives.front().material.ior;

    SolveSummary s;
    s.result = solve_scene(views, opt);
    const SceneSolveResult& r = s.result;
    s.true_angle_deg = m.pol_angle_deg;
    s.error_deg = angle_distance_mod_pi(r.state.pol_angle, m.pol_angle_deg * kDeg) / kDeg;

    KeyValueFile& kv = s.report;
    kv.set("manifest", cmd.manifest.filename().string());
    kv.set("seed", std::to_string(cmd.seed));
    kv.set("known_geometry", detail::yes_no(cmd.known_geometry));
    kv.set("views", std::to_string(views.size()));
    kv.set("underdetermined", detail::yes_no(r.underdetermined));
    if (r.underdetermined) kv.set("warning", "fewer than 4 views; per-point unknowns are under-determined");
    kv.set("points", std::to_string(r.samples.size()));
    kv.set("pol_angle_identifiable", detail::yes_no(r.identifiable));
    if (!r.identifiable) kv.set("diagnostic", "no polarization signal; polarizer angle is unidentifiable");
    kv.set("pol_angle_deg", r.state.pol_angle / kDeg);
    kv.set("pol_angle_true_deg", s.true_angle_deg);
    kv.set("pol_angle_error_deg", s.error_deg);
    kv.set("profile_range", r.profile_range);
    kv.set("signal", r.signal);
    kv.set("loss", r.loss);
    kv.set("l1_loss", r.l1);
    kv.set("profile_evaluations", std::to_string(r.state.iterations));
    kv.set("loss_trace", detail::join(r.state.loss_trace));
    for (std::size_t p = 0; p < r.samples.size(); ++p) {
        const std::string pre = "point." + std::to_string(p) + ".";
        const PointUnknowns& u = r.state.points[p];
        const ScenePoint& sp = r.samples[p];
        const Material& truth = m.config.scene.primitives[*closest_primitive(m.config.scene, sp.position)].material;
        double kd_err = 0, ks_err = 0;
        for (int c = 0; c < 3; ++c) {
            kd_err = std::max(kd_err, std::abs(u.kd[c] - truth.kd[c]));
            ks_err = std::max(ks_err, std::abs(u.ks[c] - truth.ks[c]));
        }
        kv.set(pre + "position", sp.position);
        kv.set(pre + "views", std::to_string(r.observations.points[p].size()));
        kv.set(pre + "normal", u.normal());
        kv.set(pre + "normal_error_deg", std::acos(std::clamp(dot(u.normal(), normalize(sp.recorded_normal)), -1.0, 1.0)) / kDeg);
        kv.set(pre + "kd", Vec3d{u.kd[0], u.kd[1], u.kd[2]});
        kv.set(pre + "kd_error", kd_err);
        kv.set(pre + "ks", Vec3d{u.ks[0], u.ks[1], u.ks[2]});
        kv.set(pre + "ks_error", ks_err);
        kv.set(pre + "roughness", u.roughness);
        kv.set(pre + "roughness_error", std::abs(u.roughness - truth.roughness));
        kv.set(pre + "loss", r.point_results[p].loss);
        kv.set(pre + "converged", detail::yes_no(r.point_results[p].converged));
    }
    detail::make_output_dir(cmd.out);
    kv.write(cmd.out / "report.txt");
    return s;
}

// ---------------------------------------------------------------------------
// decompose

struct DecomposeCommand {
    std::filesystem::path svim;
    std::filesystem::path out;
    std::optional<std::filesystem::path> manifest; // enables diffuse/specular
    std::size_t view = 0;
};

struct PolarizationMaps {
    RGBImage dop, aop_deg, unpolarized;
};

/// Per-pixel, per-channel DoP, AoP (degrees, (-90, 90]) and unpolarized
/// intensity. Background and black pixels are zero.
inline PolarizationMaps polarization_maps(const StokesImage& img) {
    PolarizationMaps m{RGBImage(img.width, img.height), RGBImage(img.width, img.height),
                       RGBImage(img.width, img.height)};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        if (!img.pixels[i].hit) continue;
        for (int c = 0; c < 3; ++c) {
            const PolarizationInfo info = extract_polarization_info(img.pixels[i].stokes[c]);
            m.dop.pixels[i][c] = info.dop;
            m.aop_deg.pixels[i][c] = info.aop / kDeg;
            m.unpolarized.pixels[i][c] = info.unpolarized_intensity;
        }
    }
    return m;
}

/// Diffuse and specular s0 per pixel, split by their orthogonal polarization
/// axes at mirror geometry.
inline std::pair<RGBImage, RGBImage> diffuse_specular_maps(const StokesImage& img, const Camera& cam, double ior) {
    RGBImage diffuse(img.width, img.height), specular(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const PixelRecord& p = img.at(x, y);
            if (!p.hit || norm(p.normal) == 0.0) continue;
            const Vec3d v = -generate_ray(cam, x, y).dir;
            const Vec3d n = normalize(p.normal);
            if (dot(n, v) <= 0.0) continue;
            const ShadingGeometry g = mirror_geometry(n, v, cam.right);
            for (int c = 0; c < 3; ++c) {
                const auto [d, s] = separate_diffuse_specular(p.stokes[c], g, ior);
                diffuse.at(x, y)[c] = d;
                specular.at(x, y)[c] = s;
            }
        }
    return {diffuse, specular};
}

inline KeyValueFile cmd_decompose(const DecomposeCommand& cmd) {
    const StokesImage img = read_stokes_image(cmd.svim);
    const PolarizationMaps maps = polarization_maps(img);
    detail::make_output_dir(cmd.out);

    KeyValueFile kv;
    kv.set("source", cmd.svim.filename().string());
    const auto emit = [&](const std::string& name, const RGBImage& im, const RGBImage& preview) {
        write_npy(cmd.out / (name + ".npy"), to_npy(im));
        write_png(cmd.out / (name + ".png"), preview);
        kv.set(name, name + ".npy");
    };
    RGBImage aop_preview = maps.aop_deg;
    for (auto& p : aop_preview.pixels)
        for (double& v : p) v = (v + 90.0) / 180.0;
    emit("dop", maps.dop, maps.dop);
    emit("aop_deg", maps.aop_deg, aop_preview);
    emit("unpolarized", maps.unpolarized, maps.unpolarized);

    double dop_max = 0.0, aop_min = 90.0, aop_max = -90.0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        if (!img.pixels[i].hit) continue;
        for (int c = 0; c < 3; ++c) {
            dop_max = std::max(dop_max, maps.dop.pixels[i][c]);
            aop_min = std::min(aop_min, maps.aop_deg.pixels[i][c]);
            aop_max = std::max(aop_max, maps.aop_deg.pixels[i][c]);
        }
    }
    kv.set("dop_max", dop_max);
    kv.set("aop_min_deg", aop_min);
    kv.set("aop_max_deg", aop_max);

    if (cmd.manifest) {
        const Manifest m = read_manifest(*cmd.manifest);
        if (cmd.view >= m.cameras.size()) fail(ErrorKind::index, "view " + std::to_string(cmd.view) + " not in manifest");
        const double ior = m.config.scene.primitives.empty() ? 1.5 : m.config.scene.primitives.front().material.ior;
        const auto [diffuse, specular] = diffuse_specular_maps(img, m.cameras[cmd.view].camera(), ior);
        emit("diffuse", diffuse, diffuse);
        emit("specular", specular, specular);
    } else {
        kv.set("diffuse_specular", "skipped; needs --manifest for the camera");
    }
    kv.write(cmd.out / "decompose.txt");
    return kv;
}

// ---------------------------------------------------------------------------
// eval

struct EvalCommand {
    std::optional<std::filesystem::path> svim_a, svim_b;
    std::optional<std::filesystem::path> points_a, points_b;
    std::filesystem::path out;
};

/// Image metrics on s0 over pixels hit in either record, normal MAE over
/// pixels hit in both, chamfer on point lists.
inline KeyValueFile cmd_eval(const EvalCommand& cmd) {
    if (cmd.svim_a.has_value() != cmd.svim_b.has_value())
        fail(ErrorKind::domain, "eval: images must be given in pairs");
    if (cmd.points_a.has_value() != cmd.points_b.has_value())
        fail(ErrorKind::domain, "eval: point lists must be given in pairs");
    if (!cmd.svim_a && !cmd.points_a) fail(ErrorKind::domain, "eval: nothing to evaluate");
    KeyValueFile kv;
    if (cmd.svim_a) {
        const StokesImage a = read_stokes_image(*cmd.svim_a), b = read_stokes_image(*cmd.svim_b);
        if (a.width != b.width || a.height != b.height) fail(ErrorKind::domain, "eval: image dimensions differ");
        Mask either(a.pixels.size()), both(a.pixels.size());
        std::vector<Vec3d> na, nb;
        for (std::size_t i = 0; i < a.pixels.size(); ++i) {
            either[i] = a.pixels[i].hit || b.pixels[i].hit;
            both[i] = a.pixels[i].hit && b.pixels[i].hit;
            if (both[i]) {
                na.push_back(normalize(a.pixels[i].normal));
                nb.push_back(normalize(b.pixels[i].normal));
            }
        }
        if (std::find(either.begin(), either.end(), 1) == either.end()) either.clear();
        const RGBImage ia = total_intensity_image(a), ib = total_intensity_image(b);
        kv.set("psnr_db", psnr(ia, ib, either));
        kv.set("ssim", ssim(ia, ib, either));
        if (!na.empty()) kv.set("normal_mae_deg", normal_mae(na, nb));
    }
    if (cmd.points_a) {
        const auto a = read_point_list(*cmd.points_a), b = read_point_list(*cmd.points_b);
        kv.set("chamfer", chamfer(a, b));
        kv.set("chamfer_unit_sphere", chamfer_unit_sphere(a, b));
    }
    detail::make_output_dir(cmd.out);
    kv.write(cmd.out / "metrics.txt");
    return kv;
}

} // namespace polrecon
