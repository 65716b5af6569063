#include "uncseg/scene_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "uncseg/error.hpp"

namespace uncseg {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

namespace {

double parse_double(const std::string& token, int line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw Error("scene line " + std::to_string(line) + ": bad number '" + token + "'");
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string serialize_scene(const Scene& scene) {
  std::ostringstream out;
  const auto& t = scene.table;
  out << "table " << format_double(t.x0) << ' ' << format_double(t.y0) << ' '
      << format_double(t.x1) << ' ' << format_double(t.y1) << '\n';
  for (const auto& b : scene.bodies) {
    out << "body " << b.id << ' ' << format_double(b.pose.x) << ' ' << format_double(b.pose.y)
        << ' ' << format_double(b.pose.yaw) << '\n';
    for (const auto& p : b.parts)
      out << "part " << format_double(p.center.x()) << ' ' << format_double(p.center.y()) << ' '
          << format_double(p.extents.x()) << ' ' << format_double(p.extents.y()) << ' '
          << format_double(p.base) << ' ' << format_double(p.height) << '\n';
  }
  return out.str();
}

Scene parse_scene(std::string_view text) {
  Scene scene;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  bool have_table = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    auto expect = [&](std::size_t n) {
      if (tok.size() != n)
        throw Error("scene line " + std::to_string(lineno) + ": expected " + std::to_string(n - 1) +
                    " fields after '" + tok[0] + "'");
    };
    if (tok[0] == "table") {
      expect(5);
      scene.table = {parse_double(tok[1], lineno), parse_double(tok[2], lineno),
                     parse_double(tok[3], lineno), parse_double(tok[4], lineno)};
      have_table = true;
    } else if (tok[0] == "body") {
      expect(5);
      RigidBody b;
      b.id = std::stoi(tok[1]);
      b.pose = {parse_double(tok[2], lineno), parse_double(tok[3], lineno),
                parse_double(tok[4], lineno)};
      scene.bodies.push_back(b);
    } else if (tok[0] == "part") {
      expect(7);
      if (scene.bodies.empty())
        throw Error("scene line " + std::to_string(lineno) + ": part before any body");
      Part p;
      p.center = {parse_double(tok[1], lineno), parse_double(tok[2], lineno)};
      p.extents = {parse_double(tok[3], lineno), parse_double(tok[4], lineno)};
      p.base = parse_double(tok[5], lineno);
      p.height = parse_double(tok[6], lineno);
      scene.bodies.back().parts.push_back(p);
    } else {
      throw Error("scene line " + std::to_string(lineno) + ": unknown record '" + tok[0] + "'");
    }
  }
  if (!have_table) throw Error("scene has no table record");
  validate(scene);
  return scene;
}

Scene load_scene(const std::string& path) { return parse_scene(read_file(path)); }

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << serialize_scene(scene);
}

void write_label_pgm(const std::string& path, GridShape shape, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  int maxval = 1;
  for (int v : labels) maxval = std::max(maxval, v);
  out << "P2\n" << shape.cols << ' ' << shape.rows << '\n' << maxval << '\n';
  for (int r = 0; r < shape.rows; ++r) {
    for (int c = 0; c < shape.cols; ++c) out << (c ? " " : "") << labels[shape.index(r, c)];
    out << '\n';
  }
}

LabelImage read_label_pgm(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto& t : split_ws(line)) tokens.push_back(t);
  }
  if (tokens.size() < 4 || tokens[0] != "P2") throw Error(path + ": not an ASCII PGM (P2)");
  LabelImage img;
  img.shape.cols = std::stoi(tokens[1]);
  img.shape.rows = std::stoi(tokens[2]);
  if (tokens.size() != 4 + static_cast<std::size_t>(img.shape.size()))
    throw Error(path + ": pixel count does not match header");
  img.labels.reserve(img.shape.size());
  for (std::size_t i = 4; i < tokens.size(); ++i) img.labels.push_back(std::stoi(tokens[i]));
  return img;
}

void write_depth_pgm(const std::string& path, GridShape shape, const std::vector<double>& depth,
                     double scale) {
  std::vector<int> values(depth.size());
  int maxval = 1;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    values[i] = static_cast<int>(std::lround(depth[i] * scale));
    maxval = std::max(maxval, values[i]);
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "P2\n# scale " << format_double(scale) << '\n'
      << shape.cols << ' ' << shape.rows << '\n'
      << maxval << '\n';
  for (int r = 0; r < shape.rows; ++r) {
    for (int c = 0; c < shape.cols; ++c) out << (c ? " " : "") << values[shape.index(r, c)];
    out << '\n';
  }
}

std::vector<int> masks_to_labels(GridShape shape, const std::vector<Mask>& masks) {
  std::vector<int> labels(shape.size(), 0);
  for (std::size_t k = 0; k < masks.size(); ++k)
    for (int i : masks[k].indices())
      if (labels[i] == 0) labels[i] = static_cast<int>(k) + 1;
  return labels;
}

std::vector<Mask> labels_to_masks(GridShape shape, const std::vector<int>& labels) {
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < shape.size(); ++i)
    if (labels[i] != 0) groups[labels[i]].push_back(i);
  std::vector<Mask> out;
  for (auto& [label, idx] : groups) out.emplace_back(shape, std::move(idx));
  return out;
}

}  // namespace uncseg
