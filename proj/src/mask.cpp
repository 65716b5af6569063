#include "uncseg/mask.hpp"

#include <algorithm>
#include <charconv>

#include "uncseg/error.hpp"

namespace uncseg {

std::string_view to_string(MaskSource source) {
  switch (source) {
    case MaskSource::bottom_up: return "bottom-up";
    case MaskSource::top_down: return "top-down";
    case MaskSource::tracked: return "tracked";
  }
  return "bottom-up";
}

MaskSource mask_source_from_string(std::string_view text) {
  if (text == "bottom-up") return MaskSource::bottom_up;
  if (text == "top-down") return MaskSource::top_down;
  if (text == "tracked") return MaskSource::tracked;
  throw Error("unknown mask source: " + std::string(text));
}

Mask::Mask(GridShape shape, std::vector<int> indices, MaskSource source)
    : shape_(shape), indices_(std::move(indices)), source_(source) {
  if (!std::is_sorted(indices_.begin(), indices_.end())) std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
  if (!indices_.empty() && (indices_.front() < 0 || indices_.back() >= shape_.size()))
    throw Error("mask pixel outside grid");
}

Mask Mask::from_bitmap(GridShape shape, const std::vector<std::uint8_t>& bits, MaskSource source) {
  std::vector<int> idx;
  for (int i = 0; i < shape.size(); ++i)
    if (bits[i]) idx.push_back(i);
  Mask m;
  m.shape_ = shape;
  m.indices_ = std::move(idx);
  m.source_ = source;
  return m;
}

Mask Mask::full(GridShape shape, MaskSource source) {
  return from_bitmap(shape, std::vector<std::uint8_t>(shape.size(), 1), source);
}

bool Mask::contains(int index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

std::vector<std::uint8_t> Mask::to_bitmap() const {
  std::vector<std::uint8_t> bits(shape_.size(), 0);
  for (int i : indices_) bits[i] = 1;
  return bits;
}

bool Mask::operator<(const Mask& other) const {
  if (shape_.rows != other.shape_.rows) return shape_.rows < other.shape_.rows;
  if (shape_.cols != other.shape_.cols) return shape_.cols < other.shape_.cols;
  return indices_ < other.indices_;
}

std::size_t intersection_size(const Mask& a, const Mask& b) {
  auto ia = a.indices();
  auto ib = b.indices();
  std::size_t count = 0;
  auto pa = ia.begin();
  auto pb = ib.begin();
  while (pa != ia.end() && pb != ib.end()) {
    if (*pa < *pb) {
      ++pa;
    } else if (*pb < *pa) {
      ++pb;
    } else {
      ++count;
      ++pa;
      ++pb;
    }
  }
  return count;
}

Mask mask_union(const Mask& a, const Mask& b) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.indices().begin(), a.indices().end(), b.indices().begin(), b.indices().end(),
                 std::back_inserter(out));
  return Mask(a.shape(), std::move(out), a.source());
}

Mask mask_intersection(const Mask& a, const Mask& b) {
  std::vector<int> out;
  std::set_intersection(a.indices().begin(), a.indices().end(), b.indices().begin(),
                        b.indices().end(), std::back_inserter(out));
  return Mask(a.shape(), std::move(out), a.source());
}

Mask mask_difference(const Mask& a, const Mask& b) {
  std::vector<int> out;
  std::set_difference(a.indices().begin(), a.indices().end(), b.indices().begin(),
                      b.indices().end(), std::back_inserter(out));
  return Mask(a.shape(), std::move(out), a.source());
}

Mask dilate(const Mask& mask, int radius) {
  if (radius <= 0 || mask.empty()) return mask;
  const GridShape& g = mask.shape();
  std::vector<std::uint8_t> bits(g.size(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    Pixel p = mask.pixel(i);
    for (int r = std::max(0, p.row - radius); r <= std::min(g.rows - 1, p.row + radius); ++r)
      for (int c = std::max(0, p.col - radius); c <= std::min(g.cols - 1, p.col + radius); ++c)
        bits[g.index(r, c)] = 1;
  }
  return Mask::from_bitmap(g, bits, mask.source());
}

Mask erode(const Mask& mask, int radius) {
  if (radius <= 0 || mask.empty()) return mask;
  const GridShape& g = mask.shape();
  auto bits = mask.to_bitmap();
  std::vector<int> kept;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    Pixel p = mask.pixel(i);
    bool keep = true;
    for (int r = p.row - radius; keep && r <= p.row + radius; ++r)
      for (int c = p.col - radius; c <= p.col + radius; ++c)
        if (!g.contains(r, c) || !bits[g.index(r, c)]) {
          keep = false;
          break;
        }
    if (keep) kept.push_back(mask.indices()[i]);
  }
  return Mask(g, std::move(kept), mask.source());
}

Mask opening(const Mask& mask, int radius) {
  return mask_intersection(dilate(erode(mask, radius), radius), mask);
}

std::string encode_rle(const Mask& mask) {
  std::string out;
  int cursor = 0;
  bool first = true;
  auto emit = [&](int run) {
    if (!first) out.push_back(',');
    out += std::to_string(run);
    first = false;
  };
  auto idx = mask.indices();
  std::size_t i = 0;
  while (i < idx.size()) {
    emit(idx[i] - cursor);  // background run
    std::size_t j = i;
    while (j + 1 < idx.size() && idx[j + 1] == idx[j] + 1) ++j;
    emit(static_cast<int>(j - i + 1));
    cursor = idx[j] + 1;
    i = j + 1;
  }
  if (cursor < mask.shape().size() || first) emit(mask.shape().size() - cursor);
  return out;
}

Mask decode_rle(std::string_view rle, GridShape shape, MaskSource source) {
  std::vector<int> idx;
  int cursor = 0;
  bool foreground = false;
  std::size_t pos = 0;
  while (pos <= rle.size()) {
    std::size_t end = rle.find(',', pos);
    if (end == std::string_view::npos) end = rle.size();
    std::string_view token = rle.substr(pos, end - pos);
    int run = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), run);
    if (ec != std::errc() || ptr != token.data() + token.size() || run < 0)
      throw Error("malformed RLE token: '" + std::string(token) + "'");
    if (cursor + run > shape.size()) throw Error("RLE runs exceed grid size");
    if (foreground)
      for (int k = 0; k < run; ++k) idx.push_back(cursor + k);
    cursor += run;
    foreground = !foreground;
    pos = end + 1;
  }
  if (cursor != shape.size()) throw Error("RLE runs do not cover the grid");
  return Mask(shape, std::move(idx), source);
}

}  // namespace uncseg
