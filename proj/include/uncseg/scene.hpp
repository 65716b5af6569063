#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "uncseg/mask.hpp"
#include "uncseg/rng.hpp"

namespace uncseg {

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  bool operator==(const Pose2&) const = default;
};

/// Box in body frame: footprint centered at `center` with full `extents`,
/// occupying heights [base, base + height].
struct Part {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d extents = Eigen::Vector2d::Zero();
  double base = 0.0;
  double height = 0.0;

  double top() const { return base + height; }
  bool operator==(const Part&) const = default;
};

struct RigidBody {
  int id = 0;
  Pose2 pose;
  std::vector<Part> parts;

  bool operator==(const RigidBody&) const = default;
};

struct TableBounds {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.5;
  double y1 = 0.5;
  bool operator==(const TableBounds&) const = default;
};

struct Scene {
  TableBounds table;
  std::vector<RigidBody> bodies;

  const RigidBody* find(int id) const;
  bool operator==(const Scene&) const = default;
};

/// Throws if any Scene invariant is violated.
void validate(const Scene& scene);

struct FrameHandle {
  std::uint64_t id = 0;
  bool operator==(const FrameHandle&) const = default;
  auto operator<=>(const FrameHandle&) const = default;
};

/// Top-down orthographic frame. Row r, column c has its center at
/// (origin.x + (c + 0.5) * resolution, origin.y + (r + 0.5) * resolution).
///
/// `labels` is ground truth for oracles and evaluators; the segmentation
/// pipeline reads only depth and cloud.
struct Observation {
  GridShape shape;
  double resolution = 0.0;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  std::vector<double> depth;
  std::vector<int> labels;
  std::vector<Eigen::Vector3d> cloud;
  FrameHandle handle;

  Eigen::Vector2d pixel_center(int index) const;
  /// Pixel whose cell contains (x, y), if inside the grid.
  std::optional<int> pixel_at(double x, double y) const;
  TableBounds bounds() const;
  Mask foreground() const;
  /// Visible footprint of every labelled body, ordered by id.
  std::vector<std::pair<int, Mask>> body_masks() const;
};

struct PushAction {
  Eigen::Vector2d target = Eigen::Vector2d::Zero();
  Eigen::Vector2d direction = Eigen::Vector2d::UnitX();
  double distance = 0.0;
};

void validate(const PushAction& action);

struct SceneGenConfig {
  int min_bodies = 3;
  int max_bodies = 6;
  int min_parts = 1;
  int max_parts = 2;
  double min_extent = 0.04;
  double max_extent = 0.08;
  double min_height = 0.03;
  double max_height = 0.09;
  double clutter = 0.5;
  double table_size = 0.5;
  /// Placement margin to the table edge and free-placement clearance, meters.
  double margin = 0.06;
  double clearance = 0.03;
  /// Geometry snaps to this grid, keeping pixel centers off part edges.
  double quantum = 0.005;
  int max_retries = 200;
};

Scene generate_scene(const SceneGenConfig& config, Rng& rng);

struct Raster {
  std::vector<double> depth;
  std::vector<int> labels;
  /// Index of the topmost part within the labelled body, -1 on background.
  std::vector<int> parts;
};

Raster rasterize(const Scene& scene, GridShape shape, Eigen::Vector2d origin, double resolution);
Observation render(const Scene& scene, double resolution);

struct PushOutcome {
  Scene scene;
  bool contact = false;
  int contacted_id = 0;
  /// Displacement along the push direction per body id (0 for untouched).
  std::vector<std::pair<int, double>> displacements;
};

/// Quasi-static translation with contact-chain propagation. The pusher is a
/// point at `contact_height` approaching from the target along the direction;
/// the first body it meets within `distance` is displaced by the full
/// distance. A body reached through a chain with accumulated free gap g moves
/// distance - g. Motion is clipped so that no body in the chain leaves the
/// table.
PushOutcome apply_push(const Scene& scene, const PushAction& action, double contact_height = 0.01);

/// Forward pixel map: for every foreground pixel of `before`, the pixel of
/// `after` showing the same body-frame surface point (or, at a body edge,
/// the nearest pixel showing the body), or -1 if it is occluded or leaves
/// the grid. Background pixels map to -1. Not necessarily injective.
std::vector<int> correspondence_map(const Scene& scene_before, const Scene& scene_after,
                                    const Observation& before, const Observation& after);

// Contact geometry, exposed for the generator, tests and planner.
bool interpenetrates(const RigidBody& a, const RigidBody& b, double eps = 1e-9);
bool in_contact(const RigidBody& a, const RigidBody& b, double eps = 1e-9);
bool inside_table(const RigidBody& body, const TableBounds& table, double eps = 1e-9);
/// Travel of `mover` along unit `direction` before it would penetrate `obstacle`;
/// +inf if it never does.
double travel_until_contact(const RigidBody& mover, const RigidBody& obstacle,
                            const Eigen::Vector2d& direction, double eps = 1e-9);

}  // namespace uncseg
