#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uncseg {

struct GridShape {
  int rows = 0;
  int cols = 0;

  int size() const { return rows * cols; }
  bool contains(int row, int col) const { return row >= 0 && col >= 0 && row < rows && col < cols; }
  int index(int row, int col) const { return row * cols + col; }
  bool operator==(const GridShape&) const = default;
};

struct Pixel {
  int row = 0;
  int col = 0;
  bool operator==(const Pixel&) const = default;
};

enum class MaskSource { bottom_up, top_down, tracked };

std::string_view to_string(MaskSource source);
MaskSource mask_source_from_string(std::string_view text);

/// A set of pixels on an observation grid, stored as sorted row-major indices.
///
/// The type itself admits the empty set because residuals and clipped masks are
/// routinely empty; producers that promise a non-empty mask (segmenters) check
/// that themselves.
class Mask {
 public:
  Mask() = default;
  Mask(GridShape shape, std::vector<int> indices, MaskSource source = MaskSource::bottom_up);

  static Mask from_bitmap(GridShape shape, const std::vector<std::uint8_t>& bits,
                          MaskSource source = MaskSource::bottom_up);
  static Mask full(GridShape shape, MaskSource source = MaskSource::bottom_up);

  const GridShape& shape() const { return shape_; }
  std::span<const int> indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(int index) const;
  MaskSource source() const { return source_; }
  void set_source(MaskSource source) { source_ = source; }
  Pixel pixel(std::size_t i) const { return {indices_[i] / shape_.cols, indices_[i] % shape_.cols}; }

  std::vector<std::uint8_t> to_bitmap() const;

  /// Pixel-set equality; the source tag is ignored.
  bool same_pixels(const Mask& other) const {
    return shape_ == other.shape_ && indices_ == other.indices_;
  }
  bool operator==(const Mask&) const = default;
  /// Lexicographic order on (shape, indices); used for canonical ordering.
  bool operator<(const Mask& other) const;

 private:
  GridShape shape_{};
  std::vector<int> indices_;
  MaskSource source_ = MaskSource::bottom_up;
};

std::size_t intersection_size(const Mask& a, const Mask& b);
Mask mask_union(const Mask& a, const Mask& b);
Mask mask_intersection(const Mask& a, const Mask& b);
Mask mask_difference(const Mask& a, const Mask& b);

/// Square (Chebyshev) structuring element of the given radius.
Mask dilate(const Mask& mask, int radius);
/// Pixels outside the grid count as outside the mask.
Mask erode(const Mask& mask, int radius);
Mask opening(const Mask& mask, int radius);

/// Row-major run-length code: comma-separated alternating run lengths,
/// starting with a (possibly zero-length) background run. Runs sum to rows*cols.
std::string encode_rle(const Mask& mask);
Mask decode_rle(std::string_view rle, GridShape shape, MaskSource source = MaskSource::bottom_up);

}  // namespace uncseg
