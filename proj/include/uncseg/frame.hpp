#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "uncseg/scene.hpp"

namespace uncseg {

/// A rendered frame together with the world state it was rendered from.
/// Only simulated stand-ins for external models (oracle segmenter, tracker)
/// and evaluators look at `scene`.
struct Frame {
  Scene scene;
  Observation obs;
};

/// Registry that turns rendered frames into opaque handles. Lookups of
/// unknown or released handles fail with "stale frame".
class FrameStore {
 public:
  std::shared_ptr<const Frame> add(const Scene& scene, double resolution);
  std::shared_ptr<const Frame> get(FrameHandle handle) const;
  bool contains(FrameHandle handle) const;
  void release(FrameHandle handle);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::uint64_t next_id_ = 1;
  std::map<FrameHandle, std::shared_ptr<const Frame>> frames_;
};

}  // namespace uncseg
