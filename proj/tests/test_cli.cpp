#include <polrecon/commands.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

using namespace polrecon;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("polrecon_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_text(const fs::path& path, const std::string& text) {
    std::ofstream(path) << text;
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string sphere_scene(const std::string& material, int size, const std::string& render = "{}") {
    return R"({"scene": {"bounding_radius": 1.05},
  "primitives": [{"shape": "sphere", "radius": 1.0, "material": )" + material + R"(}],
  "cameras": [{"position": [0, 2.294305, 3.276608], "fov_deg": 30, "width": )" + std::to_string(size) +
           R"(, "height": )" + std::to_string(size) + R"(}],
  "render": )" + render + "}";
}

const std::string kDefaultMaterial = R"({"kd": [0.6, 0.4, 0.2], "ks": [0.5, 0.5, 0.5], "roughness": 0.3})";

} // namespace

TEST(CmdRender, EmptySceneGivesZeroRecordAndManifest) {
    const fs::path dir = scratch("empty");
    const fs::path scene = write_text(dir / "in.json", R"({"scene": {"bounding_radius": 1},
        "cameras": [{"position": [0, 0, 3], "width": 8, "height": 8}]})");
    RenderCommand cmd;
    cmd.scene = scene;
    cmd.out = dir / "out";
    cmd_render(cmd);
    ASSERT_TRUE(fs::exists(dir / "out" / kManifestName));
    const StokesImage img = read_stokes_image(dir / "out" / "view_000.svim");
    EXPECT_EQ(img.width, 8);
    for (const auto& p : img.pixels) {
        EXPECT_FALSE(p.hit);
        for (const auto& ch : p.stokes) EXPECT_EQ(ch, StokesVector{});
    }
    const Manifest m = read_manifest(dir / "out" / kManifestName);
    EXPECT_EQ(m.cameras.size(), 1u);
}

TEST(CmdRender, SameSeedIsByteIdenticalAcrossWorkerCounts) {
    const fs::path dir = scratch("determinism");
    const fs::path scene = write_text(dir / "in.json", sphere_scene(kDefaultMaterial, 12, R"({"views": 3})"));
    for (const auto& [name, workers] : {std::pair{"a", 1}, std::pair{"b", 4}}) {
        RenderCommand cmd;
        cmd.scene = scene;
        cmd.out = dir / name;
        cmd.seed = 99;
        cmd.workers = workers;
        cmd.mode = RenderMode::volume;
        cmd_render(cmd);
    }
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        EXPECT_EQ(slurp(entry.path()), slurp(dir / "b" / entry.path().filename())) << entry.path();
        ++files;
    }
    EXPECT_EQ(files, 2u + 3u * 4u);
}

TEST(CmdRender, CrossedPolarizerImagesSumToTotalIntensity) {
    const fs::path dir = scratch("i0i90");
    const fs::path scene = write_text(dir / "in.json", sphere_scene(kDefaultMaterial, 16));
    for (const auto& [name, angle] : {std::pair{"p0", 0.0}, std::pair{"p90", 90.0}}) {
        RenderCommand cmd;
        cmd.scene = scene;
        cmd.out = dir / name;
        cmd.pol_angle_deg = angle;
        cmd_render(cmd);
    }
    const NpyArray i0 = read_npy(dir / "p0" / "view_000_intensity.npy");
    const NpyArray i90 = read_npy(dir / "p90" / "view_000_intensity.npy");
    const NpyArray s0 = read_npy(dir / "p0" / "view_000_s0.npy");
    ASSERT_EQ(i0.data.size(), s0.data.size());
    double worst = 0.0, signal = 0.0;
    for (std::size_t i = 0; i < s0.data.size(); ++i) {
        worst = std::max(worst, std::abs(i0.data[i] + i90.data[i] - s0.data[i]));
        signal = std::max(signal, s0.data[i]);
    }
    EXPECT_LT(worst, 1e-12);
    EXPECT_GT(signal, 0.01);
}

TEST(CmdRender, ErrorsNameTheProblem) {
    const fs::path dir = scratch("errors");
    RenderCommand cmd;
    cmd.scene = write_text(dir / "bad.json", R"({"scene": {"bounding_radius": 1}, "cameras": [{"position": [0, 0, 3], "fov_deg": 200}]})");
    cmd.out = dir / "out";
    try {
        cmd_render(cmd);
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.field(), "cameras[0].fov_deg");
    }
    cmd.scene = write_text(dir / "ok.json", sphere_scene(kDefaultMaterial, 4));
    write_text(dir / "a_file", "x");
    cmd.out = dir / "a_file" / "sub";
    try {
        cmd_render(cmd);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::io);
    }
}

TEST(Manifest, MissingFileIsReported) {
    const fs::path dir = scratch("manifest");
    RenderCommand cmd;
    cmd.scene = write_text(dir / "in.json", sphere_scene(kDefaultMaterial, 6));
    cmd.out = dir / "out";
    cmd_render(cmd);
    EXPECT_NO_THROW(read_manifest(dir / "out" / kManifestName));
    fs::remove(dir / "out" / "view_000_s0.npy");
    try {
        read_manifest(dir / "out" / kManifestName);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::io);
    }
}

TEST(CmdDecompose, UnpolarizedImageHasZeroDop) {
    const fs::path dir = scratch("decompose_unpol");
    StokesImage img(5, 4);
    for (auto& p : img.pixels) {
        p.hit = true;
        p.stokes = {StokesVector{0.3, 0, 0, 0}, StokesVector{0.2, 0, 0, 0}, StokesVector{0, 0, 0, 0}};
    }
    write_stokes_image(dir / "u.svim", img);
    DecomposeCommand cmd;
    cmd.svim = dir / "u.svim";
    cmd.out = dir / "maps";
    const KeyValueFile kv = cmd_decompose(cmd);
    EXPECT_EQ(kv.get("dop_max"), "0");
    for (double v : read_npy(dir / "maps" / "dop.npy").data) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(fs::exists(dir / "maps" / "dop.png"));
}

TEST(CmdDecompose, BrewsterBandOfSpecularSphere) {
    const fs::path dir = scratch("decompose_brewster");
    RenderCommand render;
    render.scene = write_text(dir / "in.json",
                              sphere_scene(R"({"kd": [0, 0, 0], "ks": [1, 1, 1], "roughness": 0.4, "ior": 1.5})", 64));
    render.out = dir / "ds";
    cmd_render(render);
    DecomposeCommand cmd;
    cmd.svim = dir / "ds" / "view_000.svim";
    cmd.out = dir / "maps";
    cmd_decompose(cmd);

    const StokesImage img = read_stokes_image(cmd.svim);
    const RGBImage dop = rgb_from_npy(read_npy(dir / "maps" / "dop.npy"));
    const RGBImage aop = rgb_from_npy(read_npy(dir / "maps" / "aop_deg.npy"));
    const Camera cam = read_manifest(dir / "ds" / kManifestName).cameras[0].camera();
    const double brewster = brewster_angle(1.5);
    double band_max = 0.0;
    int band_pixels = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (!img.at(x, y).hit) continue;
            const double nv = dot(normalize(img.at(x, y).normal), -generate_ray(cam, x, y).dir);
            for (int c = 0; c < 3; ++c) {
                EXPECT_GT(aop.at(x, y)[c], -90.0);
                EXPECT_LE(aop.at(x, y)[c], 90.0);
            }
            if (nv <= 1e-3 || nv >= 1.0) continue;
            // Pure specular at mirror geometry: DoP is the Fresnel reflection DoP.
            EXPECT_NEAR(dop.at(x, y)[0], fresnel_pack(nv, 1.5).dop_reflection, 1e-5);
            if (std::abs(std::acos(nv) - brewster) < 0.5 * std::numbers::pi / 180) {
                ++band_pixels;
                band_max = std::max(band_max, dop.at(x, y)[0]);
            }
        }
    EXPECT_GT(band_pixels, 0);
    EXPECT_GT(band_max, 0.999);
}

TEST(CmdDecompose, DiffuseSpecularWithManifest) {
    const fs::path dir = scratch("decompose_split");
    RenderCommand render;
    render.scene = write_text(dir / "in.json", sphere_scene(kDefaultMaterial, 16));
    render.out = dir / "ds";
    cmd_render(render);
    DecomposeCommand cmd;
    cmd.svim = dir / "ds" / "view_000.svim";
    cmd.out = dir / "maps";
    cmd.manifest = dir / "ds" / kManifestName;
    cmd_decompose(cmd);
    const RGBImage d = rgb_from_npy(read_npy(dir / "maps" / "diffuse.npy"));
    const RGBImage s = rgb_from_npy(read_npy(dir / "maps" / "specular.npy"));
    const StokesImage img = read_stokes_image(cmd.svim);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(d.pixels[i][c] + s.pixels[i][c], img.pixels[i].stokes[c].s0, 1e-5);
}

TEST(CmdEval, IdentityInputs) {
    const fs::path dir = scratch("eval");
    RenderCommand render;
    render.scene = write_text(dir / "in.json", sphere_scene(kDefaultMaterial, 12));
    render.out = dir / "ds";
    cmd_render(render);
    write_point_list(dir / "pts.txt", {{0, 0, 0}, {1, 2, 3}, {0.5, 0.5, -1}});
    EvalCommand cmd;
    cmd.svim_a = cmd.svim_b = dir / "ds" / "view_000.svim";
    cmd.points_a = cmd.points_b = dir / "pts.txt";
    cmd.out = dir / "metrics";
    const KeyValueFile kv = cmd_eval(cmd);
    EXPECT_EQ(kv.get("psnr_db"), "inf");
    EXPECT_EQ(kv.get("ssim"), "1");
    EXPECT_EQ(kv.get("normal_mae_deg"), "0");
    EXPECT_EQ(kv.get("chamfer"), "0");
    EXPECT_TRUE(fs::exists(dir / "metrics" / "metrics.txt"));

    StokesImage other(5, 5);
    write_stokes_image(dir / "small.svim", other);
    cmd.svim_b = dir / "small.svim";
    try {
        cmd_eval(cmd);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::domain);
    }
}

TEST(CmdSolve, ZeroDopDatasetIsFlaggedUnidentifiable) {
    const fs::path dir = scratch("solve_zero_dop");
    RenderCommand render;
    render.scene = write_text(dir / "in.json",
                              sphere_scene(R"({"kd": [0.6, 0.4, 0.2], "ks": [0.5, 0.5, 0.5], "ior": 1.000000001})", 48,
                                           R"({"views": 4, "orbit_raise_deg": 30, "pol_angle_deg": 45})"));
    render.out = dir / "ds";
    cmd_render(render);
    SolveCommand cmd;
    cmd.manifest = dir / "ds" / kManifestName;
    cmd.out = dir / "solve";
    cmd.max_points = 4;
    const SolveSummary s = cmd_solve(cmd);
    EXPECT_FALSE(s.result.identifiable);
    EXPECT_EQ(s.report.get("pol_angle_identifiable"), "false");
    EXPECT_TRUE(s.report.contains("diagnostic"));
}

TEST(CmdSolve, ThreeViewsRunFlaggedUnderdetermined) {
    const fs::path dir = scratch("solve_three");
    RenderCommand render;
    render.scene = write_text(dir / "in.json", sphere_scene(kDefaultMaterial, 48, R"({"views": 3, "orbit_raise_deg": 30})"));
    render.out = dir / "ds";
    cmd_render(render);
    SolveCommand cmd;
    cmd.manifest = dir / "ds" / kManifestName;
    cmd.out = dir / "solve";
    cmd.max_points = 4;
    const SolveSummary s = cmd_solve(cmd);
    EXPECT_TRUE(s.result.underdetermined);
    EXPECT_EQ(s.report.get("underdetermined"), "true");
    EXPECT_TRUE(fs::exists(dir / "solve" / "report.txt"));
}

TEST(CmdSolve, AllBackgroundIsNoSignal) {
    const fs::path dir = scratch("solve_empty");
    RenderCommand render;
    render.scene = write_text(dir / "in.json", R"({"scene": {"bounding_radius": 1},
        "cameras": [{"position": [0, 0, 3], "width": 8, "height": 8}], "render": {"views": 4}})");
    render.out = dir / "ds";
    cmd_render(render);
    SolveCommand cmd;
    cmd.manifest = dir / "ds" / kManifestName;
    cmd.out = dir / "solve";
    try {
        cmd_solve(cmd);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::no_signal);
    }
}

TEST(Binary, ErrorLineAndExitCode) {
    const fs::path dir = scratch("binary");
    const fs::path bad = write_text(dir / "bad.json", R"({"scene": {}})");
    const std::string cmd = std::string(POLRECON_CLI) + " render --scene " + bad.string() + " --out " +
                            (dir / "out").string() + " 2> " + (dir / "err.txt").string();
    const int status = std::system(cmd.c_str());
    EXPECT_NE(status, 0);
    EXPECT_EQ(slurp(dir / "err.txt"), "error: schema: field 'scene.bounding_radius': missing\n");
}

TEST(CmdSolve, DifferentSeedsAgreeOnAngle) {
    const fs::path dir = scratch("solve_seeds");
    RenderCommand render;
    render.scene = POLRECON_SPHERE_SCENE;
    render.out = dir / "ds";
    render.pol_angle_deg = 60.0;
    cmd_render(render);
    double angles[2];
    for (int k = 0; k < 2; ++k) {
        SolveCommand cmd;
        cmd.manifest = dir / "ds" / kManifestName;
        cmd.out = dir / ("solve" + std::to_string(k));
        cmd.seed = 100 + k;
        cmd.max_points = 8;
        angles[k] = cmd_solve(cmd).result.state.pol_angle;
    }
    EXPECT_LT(angle_distance_mod_pi(angles[0], angles[1]), 1e-2);
    EXPECT_LT(angle_distance_mod_pi(angles[0], 60.0 * kDeg), 1e-2);
}
