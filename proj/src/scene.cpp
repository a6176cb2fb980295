#include "sfs/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sfs/errors.hpp"

namespace sfs {

using json = nlohmann::json;

namespace {

constexpr double kMinClearance = 1e-9;   // speaker-to-point separation
constexpr double kMinSourceMargin = 1e-6;  // primary source outside region

// Distance from p to the axis-aligned bounding box of pts. The convex hull
// of the points is contained in the box, so the box distance is a lower
// bound on the hull distance; requiring it to exceed the margin is a
// stricter test than the hull itself. Grid-shaped regions have hull == box.
double bbox_distance(const Point3& p, const std::vector<Point3>& pts) {
    double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
    double lo_y = lo_x, hi_y = hi_x, lo_z = lo_x, hi_z = hi_x;
    for (const auto& q : pts) {
        lo_x = std::min(lo_x, q.x);
        hi_x = std::max(hi_x, q.x);
        lo_y = std::min(lo_y, q.y);
        hi_y = std::max(hi_y, q.y);
        lo_z = std::min(lo_z, q.z);
        hi_z = std::max(hi_z, q.z);
    }
    const double dx = std::max({lo_x - p.x, 0.0, p.x - hi_x});
    const double dy = std::max({lo_y - p.y, 0.0, p.y - hi_y});
    const double dz = std::max({lo_z - p.z, 0.0, p.z - hi_z});
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::string point_str(const Point3& p) {
    std::ostringstream os;
    os << "(" << p.x << ", " << p.y << ", " << p.z << ")";
    return os.str();
}

}  // namespace

void validate_scene(const Scene& scene) {
    if (scene.loudspeakers.empty())
        throw ValidationError("scene: at least one loudspeaker required");
    if (scene.control_points.empty())
        throw ValidationError("scene: at least one control point required");
    if (!(scene.speed_of_sound > 0.0))
        throw ValidationError("scene: speed_of_sound must be positive");

    auto check_finite = [](const std::vector<Point3>& pts, const char* what) {
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (!is_finite(pts[i]))
                throw ValidationError(std::string("scene: non-finite coordinate in ") +
                                       what + "[" + std::to_string(i) + "]");
    };
    check_finite(scene.loudspeakers, "loudspeakers");
    check_finite(scene.control_points, "control_points");
    check_finite(scene.eval_points, "eval_points");
    if (!is_finite(scene.desired.position))
        throw ValidationError("scene: non-finite desired source position");
    if (!std::isfinite(scene.desired.gain))
        throw ValidationError("scene: non-finite desired source gain");

    auto check_clearance = [&](const std::vector<Point3>& pts, const char* what) {
        for (std::size_t l = 0; l < scene.loudspeakers.size(); ++l) {
            for (std::size_t n = 0; n < pts.size(); ++n) {
                if (distance(scene.loudspeakers[l], pts[n]) <= kMinClearance) {
                    throw ValidationError(
                        "scene: loudspeaker[" + std::to_string(l) + "] at " +
                        point_str(scene.loudspeakers[l]) + " coincides with " + what +
                        "[" + std::to_string(n) + "] at " + point_str(pts[n]));
                }
            }
        }
    };
    check_clearance(scene.control_points, "control_points");
    check_clearance(scene.eval_points, "eval_points");

    if (bbox_distance(scene.desired.position, scene.control_points) < kMinSourceMargin) {
        throw ValidationError(
            "scene: desired source at " + point_str(scene.desired.position) +
            " lies inside or within 1e-6 m of the control region");
    }
}

std::vector<Point3> ring_square(double side, int count_per_ring,
                                const std::vector<double>& z_levels) {
    if (!(side > 0.0)) throw ValidationError("ring_square: side must be positive");
    if (count_per_ring < 1) throw ValidationError("ring_square: count must be >= 1");

    const double half = side / 2.0;
    const double perimeter = 4.0 * side;
    const double step = perimeter / count_per_ring;

    std::vector<Point3> pts;
    pts.reserve(z_levels.size() * static_cast<std::size_t>(count_per_ring));
    for (double z : z_levels) {
        for (int i = 0; i < count_per_ring; ++i) {
            // Walk the perimeter counterclockwise from corner (-half, -half),
            // offset by half a step so corners are never hit.
            double s = (i + 0.5) * step;
            Point3 p{0.0, 0.0, z};
            if (s < side) {
                p.x = -half + s;
                p.y = -half;
            } else if (s < 2.0 * side) {
                p.x = half;
                p.y = -half + (s - side);
            } else if (s < 3.0 * side) {
                p.x = half - (s - 2.0 * side);
                p.y = half;
            } else {
                p.x = -half;
                p.y = half - (s - 3.0 * side);
            }
            pts.push_back(p);
        }
    }
    return pts;
}

std::vector<Point3> grid_points(const Point3& center, const Point3& extent,
                                int nx, int ny, int nz) {
    if (nx < 1 || ny < 1 || nz < 1)
        throw ValidationError("grid: counts must be >= 1");
    if (extent.x < 0 || extent.y < 0 || extent.z < 0)
        throw ValidationError("grid: extent must be nonnegative");

    auto axis = [](double c, double e, int n, int i) {
        if (n == 1) return c;
        return c - e / 2.0 + e * static_cast<double>(i) / (n - 1);
    };

    std::vector<Point3> pts;
    pts.reserve(static_cast<std::size_t>(nx) * ny * nz);
    for (int iz = 0; iz < nz; ++iz)
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                pts.push_back({axis(center.x, extent.x, nx, ix),
                               axis(center.y, extent.y, ny, iy),
                               axis(center.z, extent.z, nz, iz)});
    return pts;
}

Scene build_paper_scene() {
    Scene scene;
    scene.loudspeakers = ring_square(2.0, 16, {0.1, -0.1});
    scene.control_points = grid_points({0, 0, 0}, {1.0, 1.0, 0.04}, 24, 24, 2);
    scene.eval_points = grid_points({0, 0, 0}, {1.0, 1.0, 0.0}, 5, 5, 1);
    scene.desired = DesiredField{DesiredField::Kind::PointSource, {2.0, 0.0, 0.0}, 1.0};
    scene.speed_of_sound = 343.0;
    validate_scene(scene);
    return scene;
}

namespace {

Point3 parse_point(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
        !j[2].is_number())
        throw ParseError("scene config: " + field + " must be a [x, y, z] number triple");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<Point3> parse_point_set(const json& j, const std::string& field,
                                    bool allow_generators) {
    if (j.is_array()) {
        std::vector<Point3> pts;
        pts.reserve(j.size());
        for (std::size_t i = 0; i < j.size(); ++i)
            pts.push_back(parse_point(j[i], field + "[" + std::to_string(i) + "]"));
        return pts;
    }
    if (j.is_object() && allow_generators) {
        if (j.contains("ring_square")) {
            const json& g = j.at("ring_square");
            for (const auto& [key, _] : g.items())
                if (key != "side" && key != "count" && key != "z_levels")
                    throw ParseError("scene config: unknown key '" + key + "' in " +
                                     field + ".ring_square");
            if (!g.contains("side") || !g.contains("count") || !g.contains("z_levels"))
                throw ParseError("scene config: " + field +
                                 ".ring_square requires side, count, z_levels");
            std::vector<double> zs;
            for (const auto& z : g.at("z_levels")) zs.push_back(z.get<double>());
            return ring_square(g.at("side").get<double>(), g.at("count").get<int>(), zs);
        }
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            for (const auto& [key, _] : g.items())
                if (key != "origin" && key != "extent" && key != "counts")
                    throw ParseError("scene config: unknown key '" + key + "' in " +
                                     field + ".grid");
            if (!g.contains("origin") || !g.contains("extent") || !g.contains("counts"))
                throw ParseError("scene config: " + field +
                                 ".grid requires origin, extent, counts");
            const Point3 origin = parse_point(g.at("origin"), field + ".grid.origin");
            const Point3 extent = parse_point(g.at("extent"), field + ".grid.extent");
            const json& counts = g.at("counts");
            if (!counts.is_array() || counts.size() != 3)
                throw ParseError("scene config: " + field +
                                 ".grid.counts must be [nx, ny, nz]");
            return grid_points(origin, extent, counts[0].get<int>(),
                               counts[1].get<int>(), counts[2].get<int>());
        }
        throw ParseError("scene config: " + field +
                         " must be a point list or a ring_square/grid generator");
    }
    throw ParseError("scene config: " + field + " must be a point list" +
                     (allow_generators ? " or generator object" : ""));
}

}  // namespace

Scene parse_scene(const std::string& config_text) {
    json j;
    try {
        j = json::parse(config_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scene config: ") + e.what());
    }

    if (!j.is_object()) throw ParseError("scene config: top level must be an object");

    static const char* known[] = {"format",      "loudspeakers", "control_points",
                                  "eval_points", "desired",      "speed_of_sound",
                                  "solver"};
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
                return key == k;
            }) == std::end(known))
            throw ParseError("scene config: unknown key '" + key + "'");
    }

    if (!j.contains("format") || !j.at("format").is_number_integer() ||
        j.at("format").get<int>() != 1)
        throw ParseError("scene config: missing or unsupported 'format' (expected 1)");
    if (!j.contains("loudspeakers"))
        throw ParseError("scene config: missing 'loudspeakers'");
    if (!j.contains("control_points"))
        throw ParseError("scene config: missing 'control_points'");
    if (!j.contains("desired")) throw ParseError("scene config: missing 'desired'");

    Scene scene;
    scene.loudspeakers = parse_point_set(j.at("loudspeakers"), "loudspeakers", true);
    scene.control_points = parse_point_set(j.at("control_points"), "control_points", true);
    if (j.contains("eval_points"))
        scene.eval_points = parse_point_set(j.at("eval_points"), "eval_points", true);

    const json& d = j.at("desired");
    if (!d.is_object()) throw ParseError("scene config: 'desired' must be an object");
    for (const auto& [key, _] : d.items())
        if (key != "kind" && key != "position" && key != "gain")
            throw ParseError("scene config: unknown key '" + key + "' in desired");
    if (!d.contains("kind") || !d.at("kind").is_string() ||
        d.at("kind").get<std::string>() != "point_source")
        throw ParseError("scene config: desired.kind must be \"point_source\"");
    if (!d.contains("position"))
        throw ParseError("scene config: desired.position is required");
    scene.desired.kind = DesiredField::Kind::PointSource;
    scene.desired.position = parse_point(d.at("position"), "desired.position");
    if (d.contains("gain")) {
        if (!d.at("gain").is_number())
            throw ParseError("scene config: desired.gain must be a number");
        scene.desired.gain = d.at("gain").get<double>();
    }

    if (j.contains("speed_of_sound")) {
        if (!j.at("speed_of_sound").is_number())
            throw ParseError("scene config: speed_of_sound must be a number");
        scene.speed_of_sound = j.at("speed_of_sound").get<double>();
    }

    validate_scene(scene);
    return scene;
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scene file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scene(buf.str());
}

std::string serialize_scene(const Scene& scene) {
    auto points_json = [](const std::vector<Point3>& pts) {
        json arr = json::array();
        for (const auto& p : pts) arr.push_back({p.x, p.y, p.z});
        return arr;
    };

    json j;
    j["format"] = 1;
    j["loudspeakers"] = points_json(scene.loudspeakers);
    j["control_points"] = points_json(scene.control_points);
    if (!scene.eval_points.empty()) j["eval_points"] = points_json(scene.eval_points);
    j["desired"] = {{"kind", "point_source"},
                    {"position", {scene.desired.position.x, scene.desired.position.y,
                                  scene.desired.position.z}},
                    {"gain", scene.desired.gain}};
    j["speed_of_sound"] = scene.speed_of_sound;
    return j.dump(2) + "\n";
}

}  // namespace sfs
