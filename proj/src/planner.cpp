#include "uncseg/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <tuple>

#include "uncseg/error.hpp"

namespace uncseg {

namespace {

// Observed surfaces this far below an object's top rule the object out there.
constexpr double kFreeSpaceTol = 1e-3;

Mask region_area_mask(const BeliefRegion& region) {
  Mask out;
  for (const auto& h : region.hypotheses)
    for (const auto& o : h.objects) out = out.shape().size() == 0 ? o.mask : mask_union(out, o.mask);
  return out;
}

Eigen::Vector2d mask_centroid(const Mask& mask, const Observation& obs) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (int i : mask.indices()) c += obs.pixel_center(i);
  return c / static_cast<double>(mask.size());
}

}  // namespace

void validate(const PlannerParams& p) {
  if (p.k < 1) throw Error("planner k must be positive");
  if (p.world_cap < 1) throw Error("planner world_cap must be positive");
  if (!(p.push_distance >= 0)) throw Error("planner push_distance must be non-negative");
  if (!(p.standoff_px >= 0)) throw Error("planner standoff_px must be non-negative");
}

int region_uncertainty(const BeliefRegion& region, double lambda, double delta) {
  int k = 0;
  for (double s : region_scores(region, lambda)) k += s > delta;
  return k;
}

std::optional<std::size_t> select_target_region(const Belief& belief) {
  std::optional<std::size_t> best;
  int best_k = 0;
  std::size_t best_area = 0;
  for (std::size_t i = 0; i < belief.regions.size(); ++i) {
    const int k = region_uncertainty(belief.regions[i], belief.params.lambda, belief.params.delta);
    const std::size_t area = region_area_mask(belief.regions[i]).size();
    if (!best || k > best_k || (k == best_k && area > best_area)) {
      best = i;
      best_k = k;
      best_area = area;
    }
  }
  if (!best || best_k <= 1) return std::nullopt;
  return best;
}

std::optional<RigidBody> complete_object(const ObjectHypothesis& object, const Observation& obs, int id) {
  std::map<int, double> top;
  for (const auto& p : object.cloud) {
    if (!(p.z() > 0)) continue;
    auto px = obs.pixel_at(p.x(), p.y());
    if (!px) continue;
    auto [it, fresh] = top.emplace(*px, p.z());
    if (!fresh) it->second = std::max(it->second, p.z());
  }
  for (auto it = top.begin(); it != top.end();)
    it = obs.depth[it->first] < it->second - kFreeSpaceTol ? top.erase(it) : std::next(it);
  if (top.empty()) return std::nullopt;

  // Row runs of equal height, stacked into rectangles when consecutive rows
  // repeat the same run.
  struct Run {
    int c0, c1;
    double h;
    bool operator<(const Run& o) const { return std::tie(c0, c1, h) < std::tie(o.c0, o.c1, o.h); }
  };
  const int cols = obs.shape.cols;
  std::map<Run, int> open;  // run -> first row
  std::vector<std::tuple<int, int, Run>> boxes;
  auto close = [&](const Run& run, int r0, int r1) { boxes.emplace_back(r0, r1, run); };
  std::vector<Run> runs;
  // Group pixels by row.
  std::map<int, std::vector<std::pair<int, double>>> rows;
  for (const auto& [idx, h] : top) rows[idx / cols].emplace_back(idx % cols, h);
  int prev_row = -2;
  for (auto& [r, cells] : rows) {
    runs.clear();
    for (std::size_t i = 0; i < cells.size();) {
      std::size_t j = i;
      while (j + 1 < cells.size() && cells[j + 1].first == cells[j].first + 1 && cells[j + 1].second == cells[i].second)
        ++j;
      runs.push_back({cells[i].first, cells[j].first, cells[i].second});
      i = j + 1;
    }
    std::map<Run, int> next;
    for (const Run& run : runs) {
      auto it = open.find(run);
      next.emplace(run, it != open.end() && prev_row == r - 1 ? it->second : r);
    }
    for (const auto& [run, r0] : open) {
      auto it = next.find(run);
      if (it == next.end() || it->second != r0) close(run, r0, prev_row);
    }
    open = std::move(next);
    prev_row = r;
  }
  for (const auto& [run, r0] : open) close(run, r0, prev_row);

  RigidBody body;
  body.id = id;
  const double res = obs.resolution;
  for (const auto& [r0, r1, run] : boxes) {
    Part part;
    const double x0 = obs.origin.x() + run.c0 * res, x1 = obs.origin.x() + (run.c1 + 1) * res;
    const double y0 = obs.origin.y() + r0 * res, y1 = obs.origin.y() + (r1 + 1) * res;
    part.center = {0.5 * (x0 + x1), 0.5 * (y0 + y1)};
    part.extents = {x1 - x0, y1 - y0};
    part.height = run.h;
    body.parts.push_back(part);
  }
  return body;
}

std::vector<World> construct_worlds(const Belief& belief, const Observation& obs, int world_cap) {
  if (world_cap < 1) throw Error("world_cap must be positive");
  const BeliefParams& bp = belief.params;

  // Likely hypotheses per region, best score first.
  std::vector<std::vector<std::pair<double, std::size_t>>> options;
  for (const auto& region : belief.regions) {
    const auto scores = region_scores(region, bp.lambda);
    std::vector<std::pair<double, std::size_t>> opts;
    for (std::size_t h = 0; h < scores.size(); ++h)
      if (scores[h] > bp.delta) opts.emplace_back(scores[h], h);
    if (opts.empty()) {
      const std::size_t h = most_likely_index(region, bp);
      opts.emplace_back(scores[h], h);
    }
    std::stable_sort(opts.begin(), opts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    options.push_back(std::move(opts));
  }

  // Best-first enumeration of the product by summed score.
  using Index = std::vector<std::size_t>;
  auto total = [&](const Index& ix) {
    double s = 0;
    for (std::size_t r = 0; r < ix.size(); ++r) s += options[r][ix[r]].first;
    return s;
  };
  auto worse = [](const std::pair<double, Index>& a, const std::pair<double, Index>& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second > b.second;
  };
  std::priority_queue<std::pair<double, Index>, std::vector<std::pair<double, Index>>, decltype(worse)> queue(worse);
  std::set<Index> seen;
  Index start(options.size(), 0);
  queue.emplace(total(start), start);
  seen.insert(start);
  std::vector<std::pair<double, Index>> picked;
  while (!queue.empty() && static_cast<int>(picked.size()) < world_cap) {
    auto top = queue.top();
    queue.pop();
    for (std::size_t r = 0; r < options.size(); ++r) {
      if (top.second[r] + 1 >= options[r].size()) continue;
      Index next = top.second;
      ++next[r];
      if (seen.insert(next).second) queue.emplace(total(next), next);
    }
    picked.push_back(std::move(top));
  }

  // Complete every object once.
  int next_id = 1;
  std::vector<RigidBody> confident;
  for (const auto& o : belief.confident)
    if (auto b = complete_object(o, obs, next_id)) {
      confident.push_back(std::move(*b));
      ++next_id;
    }
  std::map<std::pair<std::size_t, std::size_t>, std::vector<RigidBody>> completed;
  auto bodies_of = [&](std::size_t r, std::size_t h) -> const std::vector<RigidBody>& {
    auto it = completed.find({r, h});
    if (it != completed.end()) return it->second;
    std::vector<RigidBody> out;
    for (const auto& o : belief.regions[r].hypotheses[h].objects)
      if (auto b = complete_object(o, obs, 0)) out.push_back(std::move(*b));
    return completed.emplace(std::pair{r, h}, std::move(out)).first->second;
  };

  std::vector<World> worlds;
  for (const auto& [score, ix] : picked) {
    World w;
    w.scene.table = obs.bounds();
    w.scene.bodies = confident;
    int id = next_id;
    for (std::size_t r = 0; r < ix.size(); ++r) {
      const std::size_t h = options[r][ix[r]].second;
      w.choice.push_back(h);
      for (RigidBody b : bodies_of(r, h)) {
        b.id = id++;
        w.scene.bodies.push_back(std::move(b));
      }
    }
    w.score = score;
    worlds.push_back(std::move(w));
  }
  return worlds;
}

double default_push_distance(const Belief& belief, const Observation& obs) {
  std::vector<double> radii;
  for (const auto& o : most_likely(belief))
    if (!o.mask.empty()) radii.push_back(std::sqrt(static_cast<double>(o.mask.size()) / std::numbers::pi) * obs.resolution);
  if (radii.empty()) return 0.05;
  std::sort(radii.begin(), radii.end());
  const std::size_t n = radii.size();
  const double median = n % 2 ? radii[n / 2] : 0.5 * (radii[n / 2 - 1] + radii[n / 2]);
  return 2.0 * median;
}

PushAction push_through(const Mask& mask, const Observation& obs, const Eigen::Vector2d& direction,
                        double distance, double standoff_px) {
  if (mask.empty()) throw Error("empty mask");
  const Eigen::Vector2d c = mask_centroid(mask, obs);
  const double step = 0.25 * obs.resolution;
  // Walk backwards from the centroid until the mask is left for good.
  const double reach = std::hypot(obs.shape.rows, obs.shape.cols) * obs.resolution;
  double exit_t = 0;
  for (double t = 0; t <= reach; t += step) {
    auto px = obs.pixel_at(c.x() - t * direction.x(), c.y() - t * direction.y());
    if (!px) break;
    if (mask.contains(*px)) exit_t = t + step;
  }
  PushAction a;
  a.direction = direction;
  a.target = c - (exit_t + standoff_px * obs.resolution) * direction;
  a.distance = distance;
  return a;
}

std::vector<ActionCandidate> sample_actions(const Belief& belief, std::size_t region, const Observation& obs,
                                            const PlannerParams& params, double push_distance, Rng& rng) {
  validate(params);
  if (region >= belief.regions.size()) throw Error("region index out of range");
  if (!(push_distance > 0)) throw Error("push distance must be positive");
  std::vector<std::array<std::size_t, 2>> pool;
  const auto& hyps = belief.regions[region].hypotheses;
  for (std::size_t h = 0; h < hyps.size(); ++h)
    for (std::size_t j = 0; j < hyps[h].objects.size(); ++j)
      if (!hyps[h].objects[j].mask.empty()) pool.push_back({h, j});
  std::vector<ActionCandidate> out;
  if (pool.empty()) return out;
  for (int i = 0; i < params.k; ++i) {
    const auto [h, j] = pool[uniform_index(rng, pool.size())];
    const double theta = 2.0 * std::numbers::pi * uniform01(rng);
    const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
    ActionCandidate c;
    c.action = push_through(hyps[h].objects[j].mask, obs, dir, push_distance, params.standoff_px);
    c.region = region;
    c.hypothesis = h;
    c.object = j;
    out.push_back(c);
  }
  return out;
}

double disagreement(const std::vector<World>& worlds, const PushAction& action, const Observation& obs) {
  if (worlds.empty()) throw Error("no worlds");
  const int n = obs.shape.size();
  std::vector<std::vector<double>> depths;
  std::vector<std::uint8_t> active(n, 0);
  for (const auto& w : worlds) {
    const Raster before = rasterize(w.scene, obs.shape, obs.origin, obs.resolution);
    const Raster after = rasterize(apply_push(w.scene, action).scene, obs.shape, obs.origin, obs.resolution);
    for (int i = 0; i < n; ++i)
      if (before.labels[i] || after.labels[i]) active[i] = 1;
    depths.push_back(after.depth);
  }
  double total = 0;
  std::size_t count = 0;
  const double nw = static_cast<double>(worlds.size());
  for (int i = 0; i < n; ++i) {
    if (!active[i]) continue;
    ++count;
    // Exact zero where every world agrees; the mean would round.
    if (std::all_of(depths.begin(), depths.end(), [&](const auto& d) { return d[i] == depths[0][i]; })) continue;
    double mean = 0;
    for (const auto& d : depths) mean += d[i];
    mean /= nw;
    for (const auto& d : depths) total += std::abs(d[i] - mean);
  }
  return count ? total / (nw * static_cast<double>(count)) : 0.0;
}

ActionChoice select_action(const std::vector<World>& worlds, const std::vector<ActionCandidate>& candidates,
                           const Observation& obs) {
  if (worlds.empty() || candidates.empty()) throw Error("select_action needs worlds and candidates");
  ActionChoice choice;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    choice.objectives.push_back(disagreement(worlds, candidates[i].action, obs));
    if (choice.objectives[i] > choice.objectives[choice.index]) choice.index = i;
  }
  return choice;
}

}  // namespace uncseg
