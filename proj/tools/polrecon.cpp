#include <polrecon/commands.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace polrecon;

namespace {

int run(int argc, char** argv) {
    CLI::App app{"Polarimetric SDF rendering, inverse solving and evaluation"};
    app.require_subcommand(1);

    RenderCommand render;
    double render_angle = 0.0;
    std::string render_mode;
    auto* r = app.add_subcommand("render", "Render a scene config into a dataset directory");
    r->add_option("--scene", render.scene, "Scene config (JSON)")->required()->check(CLI::ExistingFile);
    r->add_option("--out", render.out, "Output directory")->required();
    r->add_option("--seed", render.seed, "Seed for stratified sampling");
    r->add_option("--workers", render.workers, "Worker threads")->check(CLI::PositiveNumber);
    auto* angle_opt = r->add_option("--pol-angle-deg", render_angle, "Polarizer angle in degrees");
    auto* mode_opt = r->add_option("--mode", render_mode, "sphere_trace or volume");
    r->add_option("--views", render.views, "Orbit this many cameras around the first configured one");

    SolveCommand solve;
    auto* s = app.add_subcommand("solve", "Recover materials, normals and the polarizer angle of a dataset");
    s->add_option("--manifest", solve.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
    s->add_option("--out", solve.out, "Report directory")->required();
    s->add_option("--seed", solve.seed, "Seed for point sampling and restarts");
    s->add_option("--workers", solve.workers, "Worker threads")->check(CLI::PositiveNumber);
    s->add_flag("--known-geometry", solve.known_geometry, "Fix normals to the recorded ones");
    s->add_option("--max-points", solve.max_points, "Surface points to solve")->check(CLI::PositiveNumber);

    DecomposeCommand decompose;
    std::string decompose_manifest;
    auto* d = app.add_subcommand("decompose", "DoP, AoP, unpolarized and diffuse/specular maps of an SVIM file");
    d->add_option("--svim", decompose.svim, "SVIM image")->required()->check(CLI::ExistingFile);
    d->add_option("--out", decompose.out, "Output directory")->required();
    auto* dm_opt = d->add_option("--manifest", decompose_manifest, "Dataset manifest, for diffuse/specular");
    d->add_option("--view", decompose.view, "View index of the SVIM in the manifest");

    EvalCommand eval;
    std::string svim_a, svim_b, points_a, points_b;
    auto* e = app.add_subcommand("eval", "Image, normal and point-set metrics");
    auto* sa = e->add_option("--svim-a", svim_a, "First SVIM image");
    auto* sb = e->add_option("--svim-b", svim_b, "Second SVIM image");
    auto* pa = e->add_option("--points-a", points_a, "First point list (x y z per line)");
    auto* pb = e->add_option("--points-b", points_b, "Second point list");
    e->add_option("--out", eval.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        std::cerr << "error: usage: " << err.what() << "\n";
        return 64;
    }

    KeyValueFile summary;
    if (*r) {
        if (*angle_opt) render.pol_angle_deg = render_angle;
        if (*mode_opt) render.mode = parse_render_mode(render_mode, "--mode");
        const Manifest m = cmd_render(render);
        summary.set("manifest", (render.out / kManifestName).string());
        summary.set("views", std::to_string(m.cameras.size()));
    } else if (*s) {
        const SolveSummary out = cmd_solve(solve);
        if (out.result.underdetermined)
            std::cerr << "warning: fewer than 4 views; per-point unknowns are under-determined\n";
        for (const char* key : {"points", "pol_angle_identifiable", "pol_angle_deg", "pol_angle_true_deg",
                                "pol_angle_error_deg", "loss", "l1_loss"})
            summary.set(key, out.report.get(key));
        summary.set("report", (solve.out / "report.txt").string());
    } else if (*d) {
        if (*dm_opt) decompose.manifest = decompose_manifest;
        summary = cmd_decompose(decompose);
    } else if (*e) {
        if (*sa) eval.svim_a = svim_a;
        if (*sb) eval.svim_b = svim_b;
        if (*pa) eval.points_a = points_a;
        if (*pb) eval.points_b = points_b;
        summary = cmd_eval(eval);
    }
    std::cout << summary.str();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& err) {
        std::cerr << "error: " << to_string(err.kind()) << ": " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: internal: " << err.what() << "\n";
        return 3;
    }
}
