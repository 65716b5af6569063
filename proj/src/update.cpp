#include "uncseg/update.hpp"

#include <array>
#include <cmath>
#include <string_view>
#include <unordered_set>

#include "uncseg/error.hpp"
#include "uncseg/geometry.hpp"

namespace uncseg {

void validate(const TrackerConfig& c) {
  if (!(c.dropout >= 0 && c.dropout < 1)) throw Error("tracker dropout must lie in [0, 1)");
  if (c.jitter < 0) throw Error("tracker jitter must be non-negative");
}

void validate(const UpdateParams& p) {
  if (p.reg_iters < 1) throw Error("update reg_iters must be positive");
  if (!(p.inlier_dist >= 0) || !(p.voxel >= 0)) throw Error("update distances must be non-negative");
}

SimTracker::SimTracker(std::shared_ptr<const FrameStore> frames, TrackerConfig config)
    : frames_(std::move(frames)), config_(config) {
  validate(config_);
}

std::shared_ptr<const SimTracker::Maps> SimTracker::maps(const Observation& prev, const Observation& next) {
  std::lock_guard lock(mutex_);
  const std::pair key{prev.handle, next.handle};
  if (!cached_ || cached_key_ != key) {
    auto a = frames_->get(prev.handle);
    auto b = frames_->get(next.handle);
    cached_ = std::make_shared<const Maps>(Maps{correspondence_map(a->scene, b->scene, a->obs, b->obs),
                                                correspondence_map(b->scene, a->scene, b->obs, a->obs)});
    cached_key_ = key;
  }
  return cached_;
}

std::optional<TrackResult> SimTracker::track(const Observation& prev, const Mask& prev_mask,
                                             const Observation& next, Rng& rng) {
  Rng local(draw_seed(rng));
  if (prev_mask.empty()) return std::nullopt;
  const auto m = maps(prev, next);
  // One source pixel per tracked pixel: the forward image first, then pixels
  // whose preimage lies in the mask.
  std::vector<int> source(next.shape.size(), -1);
  for (int p : prev_mask.indices())
    if (const int q = m->forward[p]; q >= 0 && source[q] < 0) source[q] = p;
  for (int q = 0; q < next.shape.size(); ++q)
    if (const int p = m->backward[q]; p >= 0 && source[q] < 0 && prev_mask.contains(p)) source[q] = p;
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> idx;
  for (int q = 0; q < next.shape.size(); ++q) {
    if (source[q] < 0) continue;
    if (config_.dropout > 0 && uniform01(local) < config_.dropout) continue;
    pairs.emplace_back(source[q], q);
    idx.push_back(q);
  }
  if (idx.empty()) return std::nullopt;
  Mask mask(next.shape, idx, MaskSource::tracked);
  if (config_.jitter > 0) {
    const int radius = static_cast<int>(uniform_index(local, config_.jitter + 1));
    const bool grow = uniform01(local) < 0.5;
    if (radius > 0) mask = grow ? dilate(mask, radius) : erode(mask, radius);
    mask.set_source(MaskSource::tracked);
    if (mask.empty()) return std::nullopt;
    std::erase_if(pairs, [&](const auto& pq) { return !mask.contains(pq.second); });
  }
  return TrackResult{std::move(mask), std::move(pairs)};
}

std::vector<Eigen::Vector3d> voxel_dedup(const std::vector<Eigen::Vector3d>& points, double cell) {
  if (!(cell > 0)) throw Error("voxel cell must be positive");
  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
      std::size_t h = 1469598103934665603ull;
      for (auto v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
      return h;
    }
  };
  std::unordered_set<std::array<std::int64_t, 3>, KeyHash> seen;
  std::vector<Eigen::Vector3d> out;
  for (const auto& p : points) {
    const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                                          static_cast<std::int64_t>(std::floor(p.y() / cell)),
                                          static_cast<std::int64_t>(std::floor(p.z() / cell))};
    if (seen.insert(key).second) out.push_back(p);
  }
  return out;
}

namespace {

void update_object(ObjectHypothesis& o, const Observation& prev, const Observation& next, Tracker& tracker,
                   const UpdateParams& params, const BeliefParams& bp, int step, Rng& rng) {
  Rng local(draw_seed(rng));
  auto tracked = tracker.track(prev, o.mask, next, local);
  if (!tracked) {
    o.history.push_back({step, o.wholeness, bp.eps_w});
    o.wholeness = wholeness_from_history(o.history, bp);
    o.mask = Mask(next.shape, {}, MaskSource::tracked);
    return;
  }
  const double inlier = params.inlier_dist > 0 ? params.inlier_dist : next.resolution;
  const double cell = params.voxel > 0 ? params.voxel : 0.5 * next.resolution;

  PointSet src, dst;
  std::vector<std::pair<int, int>> corr;
  for (const auto& [p, q] : tracked->provenance) {
    corr.emplace_back(static_cast<int>(src.points.size()), static_cast<int>(dst.points.size()));
    src.points.push_back(prev.cloud[p]);
    src.pixels.push_back(p);
    dst.points.push_back(next.cloud[q]);
    dst.pixels.push_back(q);
  }
  std::vector<Eigen::Vector3d> observed = extract_points(next, tracked->mask).points;
  o.mask = tracked->mask;

  std::optional<Registration> reg;
  try {
    reg = register_rigid_ransac(src, dst, corr, params.reg_iters, inlier, local);
  } catch (const Error& e) {
    if (std::string_view(e.what()) != "underdetermined") throw;
  }
  if (!reg) {
    o.history.push_back({step, 0.0, bp.eps_w});
    o.wholeness = wholeness_from_history(o.history, bp);
    return;
  }
  std::vector<Eigen::Vector3d> merged;
  merged.reserve(o.cloud.size() + observed.size());
  for (const auto& p : o.cloud) merged.push_back(reg->transform.apply(p));
  merged.insert(merged.end(), observed.begin(), observed.end());
  o.cloud = voxel_dedup(merged, cell);
  // Mean correspondence motion catches objects whose best rigid fit is the
  // part that stayed put.
  double moved = 0;
  for (std::size_t i = 0; i < src.points.size(); ++i) moved += (dst.points[i] - src.points[i]).norm();
  moved /= static_cast<double>(src.points.size());
  const double d =
      std::max(reg->transform.translation.norm() + bp.kappa_rot * reg->transform.angle(), moved);
  o.history.push_back({step, reg->inlier_fraction, std::max(d, bp.eps_w)});
  o.wholeness = wholeness_from_history(o.history, bp);
}

}  // namespace

Belief update_belief(const Belief& belief, const Observation& prev, const Observation& next, Tracker& tracker,
                     const UpdateParams& params, int step, Rng& rng) {
  validate(params);
  if (prev.shape != next.shape) throw Error("frames are on different grids");
  Belief out = belief;
  for (auto& o : out.confident) update_object(o, prev, next, tracker, params, out.params, step, rng);
  for (auto& r : out.regions)
    for (auto& h : r.hypotheses)
      for (auto& o : h.objects) update_object(o, prev, next, tracker, params, out.params, step, rng);
  return out;
}

}  // namespace uncseg
