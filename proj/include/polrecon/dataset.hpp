#pragma once

#include "error.hpp"
#include "image_io.hpp"
#include "inverse.hpp"
#include "scene_config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace polrecon {

/// Line-oriented "key: value" text. Keys keep their insertion order.
class KeyValueFile {
public:
    void set(const std::string& key, const std::string& value) {
        if (!m_index.emplace(key, m_entries.size()).second) fail(ErrorKind::domain, "duplicate key '" + key + "'");
        m_entries.emplace_back(key, value);
    }
    void set(const std::string& key, double value) { set(key, format_number(value)); }
    void set(const std::string& key, const Vec3d& v) {
        set(key, format_number(v.x) + " " + format_number(v.y) + " " + format_number(v.z));
    }

    bool contains(const std::string& key) const { return m_index.count(key) != 0; }

    const std::string& get(const std::string& key) const {
        const auto it = m_index.find(key);
        if (it == m_index.end()) throw SchemaError(key, "missing");
        return m_entries[it->second].second;
    }

    double get_number(const std::string& key) const {
        const std::string& s = get(key);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw SchemaError(key, "expected a number, got '" + s + "'");
        }
        if (used != s.size()) throw SchemaError(key, "expected a number, got '" + s + "'");
        return v;
    }

    Vec3d get_vec3(const std::string& key) const {
        std::istringstream in(get(key));
        Vec3d v;
        std::string extra;
        if (!(in >> v.x >> v.y >> v.z) || (in >> extra)) throw SchemaError(key, "expected three numbers");
        return v;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return m_entries; }

    std::string str() const {
        std::string out;
        for (const auto& [k, v] : m_entries) out += k + ": " + v + "\n";
        return out;
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
        out << str();
        if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
    }

    static KeyValueFile read(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
        KeyValueFile kv;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            const auto colon = line.find(": ");
            if (colon == std::string::npos)
                throw SchemaError("line " + std::to_string(line_no), "expected 'key: value'");
            kv.set(line.substr(0, colon), line.substr(colon + 2));
        }
        return kv;
    }

    /// Shortest round-tripping decimal form, so files are stable and exact.
    static std::string format_number(double v) {
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        if (std::isnan(v)) return "nan";
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    }

private:
    std::vector<std::pair<std::string, std::string>> m_entries;
    std::map<std::string, std::size_t> m_index;
};

/// File names of one rendered view inside a dataset directory.
struct ViewFiles {
    std::string svim, intensity, s0, png;
};

inline ViewFiles view_files(std::size_t k) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "view_%03zu", k);
    const std::string s = stem;
    return {s + ".svim", s + "_intensity.npy", s + "_s0.npy", s + ".png"};
}

inline constexpr const char* kManifestName = "manifest.txt";
inline constexpr const char* kManifestFormat = "polrecon-dataset 1";

/// A rendered dataset: scene, cameras and per-view files. `pol_angle_deg`
/// is the render's true angle, kept for evaluation only.
struct Manifest {
    std::filesystem::path dir;
    std::string scene_file;
    SceneConfig config;
    RenderMode mode = RenderMode::sphere_trace;
    std::uint64_t seed = 0;
    double pol_angle_deg = 0.0;
    std::vector<CameraSpec> cameras;
    std::vector<ViewFiles> files;
};

inline KeyValueFile manifest_entries(const Manifest& m) {
    KeyValueFile kv;
    kv.set("format", kManifestFormat);
    kv.set("scene", m.scene_file);
    kv.set("mode", to_string(m.mode));
    kv.set("seed", std::to_string(m.seed));
    kv.set("pol_angle_deg", m.pol_angle_deg);
    kv.set("views", std::to_string(m.cameras.size()));
    for (std::size_t k = 0; k < m.cameras.size(); ++k) {
        const std::string p = "view." + std::to_string(k) + ".";
        const CameraSpec& c = m.cameras[k];
        kv.set(p + "svim", m.files[k].svim);
        kv.set(p + "intensity", m.files[k].intensity);
        kv.set(p + "s0", m.files[k].s0);
        kv.set(p + "png", m.files[k].png);
        kv.set(p + "camera.position", c.position);
        kv.set(p + "camera.look_at", c.look_at);
        kv.set(p + "camera.up", c.up);
        kv.set(p + "camera.fov_deg", c.fov_deg);
        kv.set(p + "camera.width", std::to_string(c.width));
        kv.set(p + "camera.height", std::to_string(c.height));
    }
    return kv;
}

/// Reads a manifest and checks that every file it references exists and parses.
inline Manifest read_manifest(const std::filesystem::path& path) {
    const KeyValueFile kv = KeyValueFile::read(path);
    if (kv.get("format") != kManifestFormat) throw SchemaError("format", "unsupported manifest format '" + kv.get("format") + "'");
    Manifest m;
    m.dir = path.parent_path();
    m.scene_file = kv.get("scene");
    m.config = load_scene_config(m.dir / m.scene_file);
    m.mode = parse_render_mode(kv.get("mode"), "mode");
    const double seed = kv.get_number("seed");
    if (seed < 0) throw SchemaError("seed", "must be non-negative");
    m.seed = std::stoull(kv.get("seed"));
    m.pol_angle_deg = kv.get_number("pol_angle_deg");
    const double views = kv.get_number("views");
    if (views < 0 || views != std::floor(views)) throw SchemaError("views", "expected a non-negative integer");
    for (std::size_t k = 0; k < std::size_t(views); ++k) {
        const std::string p = "view." + std::to_string(k) + ".";
        CameraSpec c;
        c.position = kv.get_vec3(p + "camera.position");
        c.look_at = kv.get_vec3(p + "camera.look_at");
        c.up = kv.get_vec3(p + "camera.up");
        c.fov_deg = kv.get_number(p + "camera.fov_deg");
        c.width = int(kv.get_number(p + "camera.width"));
        c.height = int(kv.get_number(p + "camera.height"));
        m.cameras.push_back(c);
        m.files.push_back({kv.get(p + "svim"), kv.get(p + "intensity"), kv.get(p + "s0"), kv.get(p + "png")});
        for (const std::string* f : {&m.files.back().svim, &m.files.back().intensity, &m.files.back().s0,
                                     &m.files.back().png})
            if (!std::filesystem::exists(m.dir / *f)) fail(ErrorKind::io, "manifest references missing file '" + *f + "'");
    }
    return m;
}

/// Loads every view of a dataset: camera, SVIM record and captured intensity.
inline std::vector<DatasetView> load_dataset_views(const Manifest& m) {
    std::vector<DatasetView> views;
    for (std::size_t k = 0; k < m.cameras.size(); ++k) {
        DatasetView v;
        v.camera = m.cameras[k].camera();
        v.record = read_stokes_image(m.dir / m.files[k].svim);
        v.intensity = rgb_from_npy(read_npy(m.dir / m.files[k].intensity));
        if (v.record.width != v.camera.width || v.record.height != v.camera.height ||
            v.intensity.width != v.camera.width || v.intensity.height != v.camera.height)
            fail(ErrorKind::inconsistency, "view " + std::to_string(k) + ": image size differs from its camera");
        read_npy(m.dir / m.files[k].s0);
        views.push_back(std::move(v));
    }
    return views;
}

} // namespace polrecon
