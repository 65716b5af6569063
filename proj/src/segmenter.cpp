#include "uncseg/segmenter.hpp"

#include <set>

#include "uncseg/error.hpp"

namespace uncseg {

void validate(const OracleConfig& c) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(c.p_part) || !prob(c.p_merge) || !prob(c.td_recall) || !prob(c.td_merge))
    throw Error("oracle probabilities must lie in [0, 1]");
  if (c.p_part + c.p_merge > 1.0 + 1e-12) throw Error("oracle p_part + p_merge must not exceed 1");
  if (c.boundary_noise < 0) throw Error("oracle boundary_noise must be non-negative");
  if (c.seeds_per_body < 1) throw Error("oracle seeds_per_body must be at least 1");
}

struct OracleSegmenter::FrameData {
  GridShape shape;
  std::vector<int> labels;
  std::vector<int> parts;
  std::map<int, Mask> bodies;
  std::map<std::pair<int, int>, Mask> part_masks;
  /// Bodies whose visible footprints share a 4-neighbour pixel edge.
  std::map<int, std::vector<int>> neighbors;
  Mask background;
};

OracleSegmenter::OracleSegmenter(std::shared_ptr<const FrameStore> store, OracleConfig config)
    : store_(std::move(store)), config_(config) {
  validate(config_);
}

void OracleSegmenter::set_config(const OracleConfig& config) {
  validate(config);
  config_ = config;
}

void OracleSegmenter::forget(FrameHandle handle) {
  std::lock_guard lock(mutex_);
  cache_.erase(handle);
}

std::shared_ptr<const OracleSegmenter::FrameData> OracleSegmenter::data(FrameHandle handle) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(handle); it != cache_.end()) return it->second;
  }
  auto frame = store_->get(handle);
  const Observation& obs = frame->obs;
  auto d = std::make_shared<FrameData>();
  d->shape = obs.shape;
  d->labels = obs.labels;
  d->parts = rasterize(frame->scene, obs.shape, obs.origin, obs.resolution).parts;

  std::map<int, std::vector<int>> body_px;
  std::map<std::pair<int, int>, std::vector<int>> part_px;
  std::vector<int> bg;
  std::map<int, std::set<int>> adjacent;
  const GridShape g = obs.shape;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const int i = g.index(r, c);
      const int label = obs.labels[i];
      if (label == 0) {
        bg.push_back(i);
        continue;
      }
      body_px[label].push_back(i);
      part_px[{label, d->parts[i]}].push_back(i);
      for (auto [dr, dc] : {std::pair{0, 1}, std::pair{1, 0}}) {
        if (!g.contains(r + dr, c + dc)) continue;
        const int other = obs.labels[g.index(r + dr, c + dc)];
        if (other != 0 && other != label) {
          adjacent[label].insert(other);
          adjacent[other].insert(label);
        }
      }
    }
  }
  for (auto& [id, px] : body_px) d->bodies.emplace(id, Mask(g, std::move(px)));
  for (auto& [key, px] : part_px) d->part_masks.emplace(key, Mask(g, std::move(px)));
  for (auto& [id, set] : adjacent) d->neighbors[id] = std::vector<int>(set.begin(), set.end());
  d->background = Mask(g, std::move(bg));

  std::lock_guard lock(mutex_);
  return cache_.emplace(handle, std::move(d)).first->second;
}

Mask OracleSegmenter::jitter(const Mask& mask, Rng& local, int protected_pixel) const {
  if (config_.boundary_noise <= 0) return mask;
  const int radius = static_cast<int>(uniform_index(local, config_.boundary_noise + 1));
  const bool grow = uniform01(local) < 0.5;
  if (radius == 0) return mask;
  Mask out = grow ? dilate(mask, radius) : erode(mask, radius);
  if (protected_pixel >= 0 && !out.contains(protected_pixel))
    out = mask_union(out, Mask(mask.shape(), {protected_pixel}));
  return out;
}

Mask OracleSegmenter::prompt(const FrameData& d, int pixel, Rng& local) const {
  const int label = d.labels[pixel];
  if (events_) ++events_->prompts;
  if (label == 0) return d.background;
  if (events_) ++events_->foreground;

  const double u = uniform01(local);
  Mask out;
  if (u < config_.p_part) {
    out = d.part_masks.at({label, d.parts[pixel]});
    if (events_) ++events_->part;
  } else if (u < config_.p_part + config_.p_merge) {
    auto it = d.neighbors.find(label);
    if (it != d.neighbors.end() && !it->second.empty()) {
      const int other = it->second[uniform_index(local, it->second.size())];
      out = mask_union(d.bodies.at(label), d.bodies.at(other));
      if (events_) ++events_->merge;
    } else {
      out = d.bodies.at(label);
      if (events_) ++events_->merge_fallback;
    }
  } else {
    out = d.bodies.at(label);
    if (events_) ++events_->exact;
  }
  return jitter(out, local, pixel);
}

Mask OracleSegmenter::prompt_point(FrameHandle handle, int pixel, Rng& rng) {
  return prompt_point_seeded(handle, pixel, draw_seed(rng));
}

Mask OracleSegmenter::prompt_point_seeded(FrameHandle handle, int pixel, std::uint64_t seed) {
  Rng local(seed);
  auto d = data(handle);
  if (pixel < 0 || pixel >= d->shape.size()) throw Error("prompt pixel outside grid");
  Mask m = prompt(*d, pixel, local);
  m.set_source(MaskSource::bottom_up);
  return m;
}

std::vector<Mask> OracleSegmenter::seed_all(FrameHandle handle, Rng& rng) {
  return seed_all_seeded(handle, draw_seed(rng));
}

std::vector<Mask> OracleSegmenter::seed_all_seeded(FrameHandle handle, std::uint64_t seed) {
  Rng local(seed);
  auto d = data(handle);
  std::vector<Mask> out;
  for (const auto& [id, body] : d->bodies) {
    for (int k = 0; k < config_.seeds_per_body; ++k) {
      const int pixel = body.indices()[uniform_index(local, body.size())];
      out.push_back(prompt(*d, pixel, local));
      out.back().set_source(MaskSource::bottom_up);
    }
  }
  return out;
}

std::vector<Mask> OracleSegmenter::high_precision(FrameHandle handle, Rng& rng) {
  return high_precision_seeded(handle, draw_seed(rng));
}

std::vector<Mask> OracleSegmenter::high_precision_seeded(FrameHandle handle, std::uint64_t seed) {
  Rng local(seed);
  auto d = data(handle);
  std::vector<Mask> out;
  for (const auto& [id, body] : d->bodies) {
    if (uniform01(local) >= config_.td_recall) continue;
    Mask m = body;
    if (uniform01(local) < config_.td_merge) {
      auto it = d->neighbors.find(id);
      if (it != d->neighbors.end() && !it->second.empty())
        m = mask_union(m, d->bodies.at(it->second[uniform_index(local, it->second.size())]));
    }
    m = jitter(m, local, -1);
    if (m.empty()) continue;
    m.set_source(MaskSource::top_down);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace uncseg
