#ifndef SFS_SCENE_HPP
#define SFS_SCENE_HPP

#include <string>
#include <vector>

#include "sfs/geometry.hpp"

namespace sfs {

/// Primary source whose field the array reproduces.
struct DesiredField {
    enum class Kind { PointSource };

    Kind kind = Kind::PointSource;
    Point3 position;
    double gain = 1.0;

    friend bool operator==(const DesiredField&, const DesiredField&) = default;
};

/// Array geometry, control/evaluation grids and the desired primary source.
/// Immutable after construction; validate() is called by every factory.
struct Scene {
    std::vector<Point3> loudspeakers;
    std::vector<Point3> control_points;
    std::vector<Point3> eval_points;
    DesiredField desired;
    double speed_of_sound = 343.0;

    std::size_t num_loudspeakers() const { return loudspeakers.size(); }
    std::size_t num_control_points() const { return control_points.size(); }
    std::size_t num_eval_points() const { return eval_points.size(); }

    friend bool operator==(const Scene&, const Scene&) = default;
};

/// Checks all scene invariants; throws ValidationError naming the offending
/// points. Minimum speaker-to-point clearance is 1e-9 m (singular kernel),
/// the primary source must sit at least 1e-6 m outside the control region.
void validate_scene(const Scene& scene);

/// 16 loudspeakers on the border of a 2 m x 2 m square at z = +0.1 and
/// z = -0.1 (L = 32), 24 x 24 x 2 control points spanning the
/// 1 m x 1 m x 0.04 m cuboid at the origin (N = 1152), a 5 x 5 evaluation
/// grid at z = 0 and a unit point source at (2, 0, 0).
Scene build_paper_scene();

/// Evenly spaced points along the border of an axis-aligned square in the
/// x-y plane, one ring per z level. Spacing starts half a step away from a
/// corner so no point lies exactly on a corner.
std::vector<Point3> ring_square(double side, int count_per_ring,
                                const std::vector<double>& z_levels);

/// Regular lattice spanning a cuboid: counts[i] points per axis placed
/// endpoint-inclusive over [center - extent/2, center + extent/2]. A count
/// of 1 places the point at the center.
std::vector<Point3> grid_points(const Point3& center, const Point3& extent,
                                int nx, int ny, int nz);

/// Parses the versioned scenario config (JSON, `format: 1`); see README for
/// the schema. Throws ParseError on malformed input and ValidationError when
/// a scene invariant fails.
Scene parse_scene(const std::string& config_text);

/// Reads the file and delegates to parse_scene.
Scene load_scene(const std::string& path);

/// Serializes to the config format with explicit point lists. Coordinates
/// round-trip exactly: parse_scene(serialize_scene(s)) == s.
std::string serialize_scene(const Scene& scene);

}  // namespace sfs

#endif  // SFS_SCENE_HPP
