#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "uncseg/belief.hpp"
#include "uncseg/frame.hpp"

namespace uncseg {

struct TrackResult {
  Mask mask;
  /// (pixel on the previous frame, pixel on the new frame) for every tracked
  /// pixel whose origin is known.
  std::vector<std::pair<int, int>> provenance;
};

class Tracker {
 public:
  virtual ~Tracker() = default;
  /// Follows `prev_mask` from `prev` into `next`; nullopt when nothing of it
  /// can be found.
  virtual std::optional<TrackResult> track(const Observation& prev, const Mask& prev_mask,
                                           const Observation& next, Rng& rng) = 0;
};

struct TrackerConfig {
  /// Probability that a tracked pixel is lost.
  double dropout = 0.0;
  /// Maximum boundary noise radius in pixels.
  int jitter = 0;
};

void validate(const TrackerConfig& config);

/// Tracker backed by the simulator's pixel correspondence in both
/// directions, so rasterization of a moved body leaves no holes. Each call
/// draws exactly one seed from the caller's stream.
class SimTracker : public Tracker {
 public:
  SimTracker(std::shared_ptr<const FrameStore> frames, TrackerConfig config);

  std::optional<TrackResult> track(const Observation& prev, const Mask& prev_mask, const Observation& next,
                                   Rng& rng) override;

 private:
  struct Maps {
    std::vector<int> forward;
    std::vector<int> backward;
  };
  std::shared_ptr<const Maps> maps(const Observation& prev, const Observation& next);

  std::shared_ptr<const FrameStore> frames_;
  TrackerConfig config_;
  std::mutex mutex_;
  std::pair<FrameHandle, FrameHandle> cached_key_{};
  std::shared_ptr<const Maps> cached_;
};

struct UpdateParams {
  int reg_iters = 128;
  /// Registration inlier distance in meters; 0 selects the grid resolution.
  double inlier_dist = 0.0;
  /// Cloud deduplication cell in meters; 0 selects half the resolution.
  double voxel = 0.0;
};

void validate(const UpdateParams& params);

/// Keeps the first point of every occupied voxel.
std::vector<Eigen::Vector3d> voxel_dedup(const std::vector<Eigen::Vector3d>& points, double cell);

/// Tracks and re-scores every object of the belief after one action.
/// `step` labels the appended history entries. The structure of the belief
/// (regions, hypotheses, objects) is unchanged.
Belief update_belief(const Belief& belief, const Observation& prev, const Observation& next, Tracker& tracker,
                     const UpdateParams& params, int step, Rng& rng);

}  // namespace uncseg
