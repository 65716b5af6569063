#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "uncseg/mask.hpp"
#include "uncseg/scene.hpp"

namespace uncseg {

/// Line-oriented text form:
///   table <x0> <y0> <x1> <y1>
///   body <id> <x> <y> <yaw>
///   part <cx> <cy> <ex> <ey> <base> <height>   (belongs to the preceding body)
/// Doubles are written in shortest round-trip form, so parse(serialize(s)) == s.
std::string serialize_scene(const Scene& scene);
Scene parse_scene(std::string_view text);

Scene load_scene(const std::string& path);
void save_scene(const Scene& scene, const std::string& path);

struct LabelImage {
  GridShape shape;
  std::vector<int> labels;
};

/// ASCII PGM (P2), one value per pixel, row 0 first.
void write_label_pgm(const std::string& path, GridShape shape, const std::vector<int>& labels);
LabelImage read_label_pgm(const std::string& path);
/// Heights are stored as round(depth * scale); the scale is declared in a
/// "# scale <value>" comment line.
void write_depth_pgm(const std::string& path, GridShape shape, const std::vector<double>& depth,
                     double scale = 10000.0);

/// Label map of disjoint masks: mask i gets label i + 1; later masks do not
/// overwrite earlier ones.
std::vector<int> masks_to_labels(GridShape shape, const std::vector<Mask>& masks);
/// One mask per distinct nonzero label, ordered by label.
std::vector<Mask> labels_to_masks(GridShape shape, const std::vector<int>& labels);

std::string format_double(double value);

}  // namespace uncseg
