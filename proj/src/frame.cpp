#include "uncseg/frame.hpp"

#include "uncseg/error.hpp"

namespace uncseg {

std::shared_ptr<const Frame> FrameStore::add(const Scene& scene, double resolution) {
  auto frame = std::make_shared<Frame>();
  frame->scene = scene;
  frame->obs = render(scene, resolution);
  std::lock_guard lock(mutex_);
  frame->obs.handle = FrameHandle{next_id_++};
  frames_[frame->obs.handle] = frame;
  return frame;
}

std::shared_ptr<const Frame> FrameStore::get(FrameHandle handle) const {
  std::lock_guard lock(mutex_);
  auto it = frames_.find(handle);
  if (it == frames_.end()) throw Error("stale frame");
  return it->second;
}

bool FrameStore::contains(FrameHandle handle) const {
  std::lock_guard lock(mutex_);
  return frames_.count(handle) > 0;
}

void FrameStore::release(FrameHandle handle) {
  std::lock_guard lock(mutex_);
  frames_.erase(handle);
}

std::size_t FrameStore::size() const {
  std::lock_guard lock(mutex_);
  return frames_.size();
}

}  // namespace uncseg
