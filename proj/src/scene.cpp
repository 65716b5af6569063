#include "uncseg/scene.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <tuple>

#include "uncseg/error.hpp"

namespace uncseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PartGeom {
  std::array<Eigen::Vector2d, 4> corners;
  Eigen::Vector2d lo, hi;  // AABB
  double base = 0.0;
  double top = 0.0;
};

struct BodyGeom {
  std::vector<PartGeom> parts;
  std::array<Eigen::Vector2d, 2> axes;
  Eigen::Vector2d lo, hi;
};

Eigen::Matrix2d rotation(double yaw) { return Eigen::Rotation2Dd(yaw).toRotationMatrix(); }

BodyGeom body_geometry(const RigidBody& body) {
  BodyGeom g;
  const Eigen::Matrix2d rot = rotation(body.pose.yaw);
  const Eigen::Vector2d t(body.pose.x, body.pose.y);
  g.axes = {rot.col(0), rot.col(1)};
  g.lo = Eigen::Vector2d::Constant(kInf);
  g.hi = Eigen::Vector2d::Constant(-kInf);
  for (const Part& p : body.parts) {
    PartGeom pg;
    const Eigen::Vector2d h = 0.5 * p.extents;
    const std::array<Eigen::Vector2d, 4> local = {
        Eigen::Vector2d(-h.x(), -h.y()), Eigen::Vector2d(h.x(), -h.y()),
        Eigen::Vector2d(h.x(), h.y()), Eigen::Vector2d(-h.x(), h.y())};
    pg.lo = Eigen::Vector2d::Constant(kInf);
    pg.hi = Eigen::Vector2d::Constant(-kInf);
    for (int k = 0; k < 4; ++k) {
      pg.corners[k] = rot * (p.center + local[k]) + t;
      pg.lo = pg.lo.cwiseMin(pg.corners[k]);
      pg.hi = pg.hi.cwiseMax(pg.corners[k]);
    }
    pg.base = p.base;
    pg.top = p.top();
    g.lo = g.lo.cwiseMin(pg.lo);
    g.hi = g.hi.cwiseMax(pg.hi);
    g.parts.push_back(pg);
  }
  return g;
}

std::pair<double, double> project(const PartGeom& p, const Eigen::Vector2d& axis) {
  double lo = kInf, hi = -kInf;
  for (const auto& c : p.corners) {
    const double v = c.dot(axis);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

bool z_overlap(const PartGeom& a, const PartGeom& b, double eps) {
  return std::max(a.base, b.base) < std::min(a.top, b.top) - eps;
}

/// Largest separating gap over the candidate axes; negative means overlap
/// on every axis (interpenetration depth along the best axis).
double separation(const PartGeom& a, const PartGeom& b, const BodyGeom& ga, const BodyGeom& gb) {
  double best = -kInf;
  for (const auto* axes : {&ga.axes, &gb.axes}) {
    for (const auto& axis : *axes) {
      auto [a0, a1] = project(a, axis);
      auto [b0, b1] = project(b, axis);
      best = std::max(best, std::max(b0 - a1, a0 - b1));
    }
  }
  return best;
}

double part_travel(const PartGeom& a, const PartGeom& b, const BodyGeom& ga, const BodyGeom& gb,
                   const Eigen::Vector2d& d, double eps) {
  // The eps-shrunk intervals decide whether penetration ever happens; the
  // unshrunk ones give the time of first touch.
  double enter = -kInf, exit = kInf, touch = -kInf;
  for (const auto* axes : {&ga.axes, &gb.axes}) {
    for (const auto& axis : *axes) {
      auto [a0, a1] = project(a, axis);
      auto [b0, b1] = project(b, axis);
      const double v = d.dot(axis);
      if (std::abs(v) < 1e-15) {
        if (!(a0 < b1 - eps && a1 > b0 + eps)) return kInf;
        continue;
      }
      double t1 = (b0 + eps - a1) / v;
      double t2 = (b1 - eps - a0) / v;
      double c1 = (b0 - a1) / v;
      double c2 = (b1 - a0) / v;
      if (v < 0) {
        std::swap(t1, t2);
        std::swap(c1, c2);
      }
      enter = std::max(enter, t1);
      exit = std::min(exit, t2);
      touch = std::max(touch, c1);
    }
  }
  if (enter >= exit || exit <= 0.0) return kInf;
  return std::max(touch, 0.0);
}

double body_travel(const BodyGeom& mover, const BodyGeom& obstacle, const Eigen::Vector2d& d,
                   double limit, double eps) {
  // Swept AABB rejection.
  const Eigen::Vector2d swept_lo = mover.lo.cwiseMin(mover.lo + limit * d);
  const Eigen::Vector2d swept_hi = mover.hi.cwiseMax(mover.hi + limit * d);
  if ((swept_hi.array() < obstacle.lo.array() - eps).any() ||
      (swept_lo.array() > obstacle.hi.array() + eps).any())
    return kInf;
  double best = kInf;
  for (const auto& pa : mover.parts) {
    const Eigen::Vector2d plo = pa.lo.cwiseMin(pa.lo + limit * d);
    const Eigen::Vector2d phi = pa.hi.cwiseMax(pa.hi + limit * d);
    for (const auto& pb : obstacle.parts) {
      if (!z_overlap(pa, pb, eps)) continue;
      if ((phi.array() < pb.lo.array() - eps).any() || (plo.array() > pb.hi.array() + eps).any())
        continue;
      best = std::min(best, part_travel(pa, pb, mover, obstacle, d, eps));
    }
  }
  return best;
}

double travel_to_bounds(const BodyGeom& g, const TableBounds& table, const Eigen::Vector2d& d) {
  double limit = kInf;
  for (const auto& p : g.parts) {
    for (const auto& c : p.corners) {
      if (d.x() > 1e-15) limit = std::min(limit, (table.x1 - c.x()) / d.x());
      if (d.x() < -1e-15) limit = std::min(limit, (table.x0 - c.x()) / d.x());
      if (d.y() > 1e-15) limit = std::min(limit, (table.y1 - c.y()) / d.y());
      if (d.y() < -1e-15) limit = std::min(limit, (table.y0 - c.y()) / d.y());
    }
  }
  return std::max(limit, 0.0);
}

/// Ray parameter at which the pusher enters the part, or +inf.
double ray_hit(const RigidBody& body, const Part& part, const Eigen::Vector2d& origin,
               const Eigen::Vector2d& d) {
  const Eigen::Matrix2d rt = rotation(body.pose.yaw).transpose();
  const Eigen::Vector2d o = rt * (origin - Eigen::Vector2d(body.pose.x, body.pose.y)) - part.center;
  const Eigen::Vector2d dir = rt * d;
  double tmin = -kInf, tmax = kInf;
  for (int k = 0; k < 2; ++k) {
    const double h = 0.5 * part.extents[k];
    if (std::abs(dir[k]) < 1e-15) {
      if (o[k] < -h || o[k] > h) return kInf;
      continue;
    }
    double t1 = (-h - o[k]) / dir[k];
    double t2 = (h - o[k]) / dir[k];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
  }
  const double start = std::max(tmin, 0.0);
  if (tmax <= start + 1e-12) return kInf;
  return start;
}

double quantize(double v, double q) { return q > 0 ? std::round(v / q) * q : v; }

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace

const RigidBody* Scene::find(int id) const {
  for (const auto& b : bodies)
    if (b.id == id) return &b;
  return nullptr;
}

void validate(const Scene& scene) {
  for (std::size_t i = 0; i < scene.bodies.size(); ++i) {
    const RigidBody& b = scene.bodies[i];
    if (b.id <= 0) throw Error("body ids must be positive");
    if (b.parts.empty()) throw Error("body has no parts");
    for (const Part& p : b.parts)
      if (!(p.extents.x() > 0 && p.extents.y() > 0 && p.height > 0))
        throw Error("part extents and height must be positive");
    if (!inside_table(b, scene.table)) throw Error("body footprint leaves the table");
    for (std::size_t j = 0; j < i; ++j) {
      if (scene.bodies[j].id == b.id) throw Error("duplicate body id");
      if (interpenetrates(b, scene.bodies[j])) throw Error("bodies interpenetrate");
    }
  }
}

void validate(const PushAction& action) {
  if (!(action.distance > 0)) throw Error("push distance must be positive");
  if (std::abs(action.direction.norm() - 1.0) > 1e-9) throw Error("push direction must be unit");
}

bool interpenetrates(const RigidBody& a, const RigidBody& b, double eps) {
  const BodyGeom ga = body_geometry(a), gb = body_geometry(b);
  for (const auto& pa : ga.parts)
    for (const auto& pb : gb.parts)
      if (z_overlap(pa, pb, eps) && separation(pa, pb, ga, gb) < -eps) return true;
  return false;
}

bool in_contact(const RigidBody& a, const RigidBody& b, double eps) {
  const BodyGeom ga = body_geometry(a), gb = body_geometry(b);
  bool touching = false;
  for (const auto& pa : ga.parts)
    for (const auto& pb : gb.parts) {
      if (!z_overlap(pa, pb, eps)) continue;
      const double s = separation(pa, pb, ga, gb);
      if (s < -eps) return false;
      if (s <= eps) touching = true;
    }
  return touching;
}

bool inside_table(const RigidBody& body, const TableBounds& table, double eps) {
  const BodyGeom g = body_geometry(body);
  return g.lo.x() >= table.x0 - eps && g.lo.y() >= table.y0 - eps && g.hi.x() <= table.x1 + eps &&
         g.hi.y() <= table.y1 + eps;
}

double travel_until_contact(const RigidBody& mover, const RigidBody& obstacle,
                            const Eigen::Vector2d& direction, double eps) {
  return body_travel(body_geometry(mover), body_geometry(obstacle), direction, 1e6, eps);
}

// ---------------------------------------------------------------------------
// Observation

Eigen::Vector2d Observation::pixel_center(int index) const {
  const int r = index / shape.cols, c = index % shape.cols;
  return {origin.x() + (c + 0.5) * resolution, origin.y() + (r + 0.5) * resolution};
}

std::optional<int> Observation::pixel_at(double x, double y) const {
  const int c = static_cast<int>(std::floor((x - origin.x()) / resolution));
  const int r = static_cast<int>(std::floor((y - origin.y()) / resolution));
  if (!shape.contains(r, c)) return std::nullopt;
  return shape.index(r, c);
}

TableBounds Observation::bounds() const {
  return {origin.x(), origin.y(), origin.x() + shape.cols * resolution,
          origin.y() + shape.rows * resolution};
}

Mask Observation::foreground() const {
  std::vector<int> idx;
  for (int i = 0; i < shape.size(); ++i)
    if (labels[i] != 0) idx.push_back(i);
  return Mask(shape, std::move(idx));
}

std::vector<std::pair<int, Mask>> Observation::body_masks() const {
  std::map<int, std::vector<int>> pixels;
  for (int i = 0; i < shape.size(); ++i)
    if (labels[i] != 0) pixels[labels[i]].push_back(i);
  std::vector<std::pair<int, Mask>> out;
  for (auto& [id, idx] : pixels) out.emplace_back(id, Mask(shape, std::move(idx)));
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

Raster rasterize(const Scene& scene, GridShape shape, Eigen::Vector2d origin, double resolution) {
  Raster out;
  out.depth.assign(shape.size(), 0.0);
  out.labels.assign(shape.size(), 0);
  out.parts.assign(shape.size(), -1);
  for (const RigidBody& body : scene.bodies) {
    const Eigen::Matrix2d rt = rotation(body.pose.yaw).transpose();
    const Eigen::Vector2d t(body.pose.x, body.pose.y);
    const BodyGeom g = body_geometry(body);
    for (std::size_t k = 0; k < body.parts.size(); ++k) {
      const Part& part = body.parts[k];
      const PartGeom& pg = g.parts[k];
      const int c0 = std::max(0, static_cast<int>(std::floor((pg.lo.x() - origin.x()) / resolution - 0.5)));
      const int c1 = std::min(shape.cols - 1, static_cast<int>(std::ceil((pg.hi.x() - origin.x()) / resolution)));
      const int r0 = std::max(0, static_cast<int>(std::floor((pg.lo.y() - origin.y()) / resolution - 0.5)));
      const int r1 = std::min(shape.rows - 1, static_cast<int>(std::ceil((pg.hi.y() - origin.y()) / resolution)));
      const Eigen::Vector2d h = 0.5 * part.extents;
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          const Eigen::Vector2d center(origin.x() + (c + 0.5) * resolution,
                                       origin.y() + (r + 0.5) * resolution);
          const Eigen::Vector2d local = rt * (center - t) - part.center;
          if (local.x() < -h.x() || local.x() >= h.x() || local.y() < -h.y() || local.y() >= h.y())
            continue;
          const int idx = shape.index(r, c);
          const double top = part.top();
          const int label = out.labels[idx];
          const bool wins = top > out.depth[idx] ||
                            (top == out.depth[idx] && label != 0 && body.id < label);
          if (wins) {
            out.depth[idx] = top;
            out.labels[idx] = body.id;
            out.parts[idx] = static_cast<int>(k);
          }
        }
      }
    }
  }
  return out;
}

Observation render(const Scene& scene, double resolution) {
  if (!(resolution > 0)) throw Error("resolution must be positive");
  Observation obs;
  obs.resolution = resolution;
  obs.origin = {scene.table.x0, scene.table.y0};
  obs.shape.cols = static_cast<int>(std::ceil((scene.table.x1 - scene.table.x0) / resolution - 1e-9));
  obs.shape.rows = static_cast<int>(std::ceil((scene.table.y1 - scene.table.y0) / resolution - 1e-9));
  Raster raster = rasterize(scene, obs.shape, obs.origin, resolution);
  obs.depth = std::move(raster.depth);
  obs.labels = std::move(raster.labels);
  obs.cloud.resize(obs.shape.size());
  for (int i = 0; i < obs.shape.size(); ++i) {
    const Eigen::Vector2d c = obs.pixel_center(i);
    obs.cloud[i] = {c.x(), c.y(), obs.depth[i]};
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Dynamics

PushOutcome apply_push(const Scene& scene, const PushAction& action, double contact_height) {
  validate(action);
  PushOutcome out;
  out.scene = scene;
  const Eigen::Vector2d d = action.direction;

  // First body met by the pusher.
  double best_t = kInf;
  int first = -1;
  for (std::size_t i = 0; i < scene.bodies.size(); ++i) {
    const RigidBody& b = scene.bodies[i];
    for (const Part& p : b.parts) {
      if (!(p.base <= contact_height && contact_height < p.top())) continue;
      const double t = ray_hit(b, p, action.target, d);
      if (t > action.distance) continue;
      if (t < best_t || (t == best_t && first >= 0 && b.id < scene.bodies[first].id)) {
        best_t = t;
        first = static_cast<int>(i);
      }
    }
  }
  for (const auto& b : scene.bodies) out.displacements.emplace_back(b.id, 0.0);
  if (first < 0) return out;
  out.contact = true;
  out.contacted_id = scene.bodies[first].id;

  const std::size_t n = scene.bodies.size();
  std::vector<BodyGeom> geoms;
  geoms.reserve(n);
  for (const auto& b : scene.bodies) geoms.push_back(body_geometry(b));

  // Shortest chain gap from the contacted body; a body at chain gap g moves
  // max(0, s - g) when the pusher travels s.
  std::vector<double> gap(n, kInf);
  std::vector<bool> done(n, false);
  using Entry = std::tuple<double, int, std::size_t>;  // (gap, body id, index)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  gap[first] = 0.0;
  queue.emplace(0.0, scene.bodies[first].id, static_cast<std::size_t>(first));
  while (!queue.empty()) {
    auto [g, id, u] = queue.top();
    queue.pop();
    if (done[u] || g > gap[u]) continue;
    done[u] = true;
    const double remaining = action.distance - g;
    for (std::size_t v = 0; v < n; ++v) {
      if (done[v]) continue;
      const double step = body_travel(geoms[u], geoms[v], d, remaining, 1e-9);
      if (step >= remaining) continue;
      if (g + step < gap[v]) {
        gap[v] = g + step;
        queue.emplace(gap[v], scene.bodies[v].id, v);
      }
    }
  }

  double travel = action.distance;
  for (std::size_t v = 0; v < n; ++v)
    if (gap[v] < action.distance)
      travel = std::min(travel, gap[v] + travel_to_bounds(geoms[v], scene.table, d));

  for (std::size_t v = 0; v < n; ++v) {
    const double disp = gap[v] < travel ? travel - gap[v] : 0.0;
    out.displacements[v].second = disp;
    if (disp > 0) {
      out.scene.bodies[v].pose.x += disp * d.x();
      out.scene.bodies[v].pose.y += disp * d.y();
    }
  }
  return out;
}

std::vector<int> correspondence_map(const Scene& scene_before, const Scene& scene_after,
                                    const Observation& before, const Observation& after) {
  std::vector<int> map(before.shape.size(), -1);
  for (int i = 0; i < before.shape.size(); ++i) {
    const int label = before.labels[i];
    if (label == 0) continue;
    const RigidBody* b0 = scene_before.find(label);
    const RigidBody* b1 = scene_after.find(label);
    if (!b0 || !b1) continue;
    const Eigen::Vector2d world = before.pixel_center(i);
    const Eigen::Vector2d local =
        rotation(b0->pose.yaw).transpose() * (world - Eigen::Vector2d(b0->pose.x, b0->pose.y));
    const Eigen::Vector2d moved = rotation(b1->pose.yaw) * local + Eigen::Vector2d(b1->pose.x, b1->pose.y);
    const auto j = after.pixel_at(moved.x(), moved.y());
    if (!j) continue;
    if (after.labels[*j] == label) {
      map[i] = *j;
      continue;
    }
    // A point just inside the body's edge can fall in a pixel whose center is
    // just outside it; take the nearest neighbour showing the body unless a
    // higher surface covers the point.
    if (after.depth[*j] > before.depth[i] + 1e-9) continue;
    const int r = *j / after.shape.cols, c = *j % after.shape.cols;
    double best = std::numeric_limits<double>::infinity();
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || cc < 0 || rr >= after.shape.rows || cc >= after.shape.cols) continue;
        const int k = rr * after.shape.cols + cc;
        if (after.labels[k] != label) continue;
        const double d = (after.pixel_center(k) - moved).squaredNorm();
        if (d < best) {
          best = d;
          map[i] = k;
        }
      }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

RigidBody make_body(const SceneGenConfig& cfg, Rng& rng) {
  RigidBody body;
  const int nparts = uniform_int(rng, cfg.min_parts, cfg.max_parts);
  auto extent = [&] { return quantize(uniform(rng, cfg.min_extent, cfg.max_extent), cfg.quantum); };
  auto height = [&] { return quantize(uniform(rng, cfg.min_height, cfg.max_height), cfg.quantum); };
  Part first;
  first.extents = {extent(), extent()};
  first.height = height();
  body.parts.push_back(first);
  for (int attempt = 0; static_cast<int>(body.parts.size()) < nparts && attempt < 50; ++attempt) {
    const Part& anchor = body.parts[uniform_index(rng, body.parts.size())];
    Part p;
    p.extents = {extent(), extent()};
    p.height = height();
    const int axis = static_cast<int>(uniform_index(rng, 2));
    const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    const int lateral = 1 - axis;
    // Keep at least half the smaller lateral extent shared so the union stays connected.
    const double shared = 0.5 * std::min(anchor.extents[lateral], p.extents[lateral]);
    const double span = 0.5 * (anchor.extents[lateral] + p.extents[lateral]) - shared;
    p.center[axis] = anchor.center[axis] + sign * 0.5 * (anchor.extents[axis] + p.extents[axis]);
    p.center[lateral] = anchor.center[lateral] + quantize(uniform(rng, -span, span), cfg.quantum);
    bool clash = false;
    for (const Part& q : body.parts) {
      const Eigen::Vector2d gap = (p.center - q.center).cwiseAbs() - 0.5 * (p.extents + q.extents);
      if (gap.x() < -1e-9 && gap.y() < -1e-9) clash = true;
    }
    if (!clash) body.parts.push_back(p);
  }
  return body;
}

void move_to(RigidBody& body, double x, double y) {
  body.pose.x = x;
  body.pose.y = y;
}

}  // namespace

Scene generate_scene(const SceneGenConfig& cfg, Rng& rng) {
  Scene scene;
  scene.table = {0.0, 0.0, cfg.table_size, cfg.table_size};
  const int count = uniform_int(rng, cfg.min_bodies, cfg.max_bodies);
  const double lo = cfg.margin, hi = cfg.table_size - cfg.margin;

  for (int id = 1; id <= count; ++id) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      RigidBody body = make_body(cfg, rng);
      body.id = id;
      const bool touch = !scene.bodies.empty() && uniform01(rng) < cfg.clutter;
      if (touch) {
        const RigidBody& anchor = scene.bodies[uniform_index(rng, scene.bodies.size())];
        const int axis = static_cast<int>(uniform_index(rng, 2));
        const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        Eigen::Vector2d dir = Eigen::Vector2d::Zero();
        dir[axis] = sign;
        Eigen::Vector2d start(anchor.pose.x, anchor.pose.y);
        start[axis] += sign * 0.35;
        start[1 - axis] += quantize(uniform(rng, -0.05, 0.05), cfg.quantum);
        move_to(body, start.x(), start.y());
        double travel = kInf;
        for (const auto& other : scene.bodies)
          travel = std::min(travel, travel_until_contact(body, other, -dir));
        if (!std::isfinite(travel)) continue;
        move_to(body, body.pose.x - travel * dir.x(), body.pose.y - travel * dir.y());
      } else {
        move_to(body, quantize(uniform(rng, lo, hi), cfg.quantum),
                quantize(uniform(rng, lo, hi), cfg.quantum));
      }
      if (!inside_table(body, scene.table)) continue;
      const BodyGeom g = body_geometry(body);
      if (g.lo.x() < lo - 0.5 * cfg.margin || g.hi.x() > hi + 0.5 * cfg.margin ||
          g.lo.y() < lo - 0.5 * cfg.margin || g.hi.y() > hi + 0.5 * cfg.margin)
        continue;
      bool ok = true;
      bool touching_any = false;
      for (const auto& other : scene.bodies) {
        if (interpenetrates(body, other)) {
          ok = false;
          break;
        }
        const bool contact = in_contact(body, other);
        touching_any = touching_any || contact;
        if (!touch && !contact) {
          const BodyGeom go = body_geometry(other);
          const Eigen::Vector2d gap = (g.lo - go.hi).cwiseMax(go.lo - g.hi);
          if (gap.maxCoeff() < cfg.clearance) ok = false;
        }
        if (!touch && contact) ok = false;
      }
      if (!ok || (touch && !touching_any)) continue;
      scene.bodies.push_back(body);
      placed = true;
    }
    if (!placed) throw Error("scene generation saturated");
  }
  return scene;
}

}  // namespace uncseg
