#pragma once

// Hand-built scenes shared by the test binaries.

#include "uncseg/scene.hpp"

namespace testscenes {

inline uncseg::Part box_part(double cx, double cy, double ex, double ey, double height,
                             double base = 0.0) {
  uncseg::Part p;
  p.center = {cx, cy};
  p.extents = {ex, ey};
  p.height = height;
  p.base = base;
  return p;
}

inline uncseg::RigidBody box(int id, double x, double y, double ex, double ey, double height) {
  uncseg::RigidBody b;
  b.id = id;
  b.pose = {x, y, 0.0};
  b.parts.push_back(box_part(0, 0, ex, ey, height));
  return b;
}

inline uncseg::Scene scene_of(std::vector<uncseg::RigidBody> bodies) {
  uncseg::Scene s;
  s.bodies = std::move(bodies);
  return s;
}

/// Two boxes sharing the face x = 0.25: left 0.06 wide, right 0.04 wide,
/// both 0.05 deep and tall, so their footprints split 0.6 / 0.4.
inline uncseg::Scene touching_pair() {
  return scene_of({box(1, 0.22, 0.25, 0.06, 0.05, 0.05), box(2, 0.27, 0.25, 0.04, 0.05, 0.05)});
}

/// Two equal touching boxes (0.05 x 0.05 x 0.05) sharing the face x = 0.25.
inline uncseg::Scene equal_pair() {
  return scene_of({box(1, 0.225, 0.25, 0.05, 0.05, 0.05), box(2, 0.275, 0.25, 0.05, 0.05, 0.05)});
}

}  // namespace testscenes
