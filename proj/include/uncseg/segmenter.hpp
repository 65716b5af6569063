#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "uncseg/frame.hpp"
#include "uncseg/mask.hpp"
#include "uncseg/rng.hpp"

namespace uncseg {

/// Promptable segmenter capability. Every query consumes exactly one draw
/// from the caller's stream (see draw_seed), so two implementations fed the
/// same stream stay in step.
class Segmenter {
 public:
  virtual ~Segmenter() = default;

  /// Makes a frame queryable by handle. In-process implementations may read
  /// it from a shared store instead, so the default does nothing.
  virtual void load_frame(const Frame& frame) { (void)frame; }

  /// Dense automatic mask generation.
  virtual std::vector<Mask> seed_all(FrameHandle handle, Rng& rng) = 0;
  /// Point-prompted segmentation; the result contains `pixel`.
  virtual Mask prompt_point(FrameHandle handle, int pixel, Rng& rng) = 0;
  /// Detector-guided high-precision segmentation of the whole frame.
  virtual std::vector<Mask> high_precision(FrameHandle handle, Rng& rng) = 0;
};

struct OracleConfig {
  double p_part = 0.2;
  double p_merge = 0.3;
  int boundary_noise = 1;
  double td_recall = 0.8;
  double td_merge = 0.05;
  int seeds_per_body = 3;

  static OracleConfig noise_free() { return {0.0, 0.0, 0, 1.0, 0.0, 3}; }
};

void validate(const OracleConfig& config);

/// Realized outcomes of foreground point prompts, for calibration checks.
struct OracleEvents {
  std::atomic<long> prompts{0};
  std::atomic<long> foreground{0};
  std::atomic<long> part{0};
  std::atomic<long> merge{0};
  /// Merge draws on a body without visible neighbours (returned whole).
  std::atomic<long> merge_fallback{0};
  std::atomic<long> exact{0};
};

/// Stochastic stand-in for a large promptable model, answering from the
/// ground-truth labels of frames in a FrameStore.
class OracleSegmenter : public Segmenter {
 public:
  OracleSegmenter(std::shared_ptr<const FrameStore> store, OracleConfig config);

  std::vector<Mask> seed_all(FrameHandle handle, Rng& rng) override;
  Mask prompt_point(FrameHandle handle, int pixel, Rng& rng) override;
  std::vector<Mask> high_precision(FrameHandle handle, Rng& rng) override;

  // The same queries given the per-query seed the stream would supply.
  std::vector<Mask> seed_all_seeded(FrameHandle handle, std::uint64_t seed);
  Mask prompt_point_seeded(FrameHandle handle, int pixel, std::uint64_t seed);
  std::vector<Mask> high_precision_seeded(FrameHandle handle, std::uint64_t seed);

  const OracleConfig& config() const { return config_; }
  void set_config(const OracleConfig& config);
  void set_events(OracleEvents* events) { events_ = events; }
  /// Drops cached per-frame data for released frames.
  void forget(FrameHandle handle);

  struct FrameData;

 private:
  std::shared_ptr<const FrameData> data(FrameHandle handle);
  Mask prompt(const FrameData& data, int pixel, Rng& local) const;
  Mask jitter(const Mask& mask, Rng& local, int protected_pixel) const;

  std::shared_ptr<const FrameStore> store_;
  OracleConfig config_;
  OracleEvents* events_ = nullptr;
  std::mutex mutex_;
  std::map<FrameHandle, std::shared_ptr<const FrameData>> cache_;
};

}  // namespace uncseg
