#pragma once

#include <vector>

#include "uncseg/mask.hpp"

namespace uncseg {

struct PairScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// Precision and recall of `pred` measured against `gt`.
PairScore pair_score(const Mask& pred, const Mask& gt);

/// Injective matching maximizing the summed pair F-score. Entry i is the gt
/// index matched to pred i, or -1. Pairs with zero overlap are never matched.
std::vector<int> match_segments(const std::vector<Mask>& pred, const std::vector<Mask>& gt);

struct SegEval {
  double osn_precision = 0.0;
  double osn_recall = 0.0;
  double osn_f = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  std::vector<int> matching;
  /// Set when there was nothing to score (no predictions or no ground truth).
  bool empty = false;
};

/// Object-size-normalized scores plus pixel scores over the matched pairs.
SegEval evaluate(const std::vector<Mask>& pred, const std::vector<Mask>& gt);

struct OsnScores {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  bool empty = false;
};

OsnScores osn_scores(const std::vector<Mask>& pred, const std::vector<Mask>& gt,
                     const std::vector<int>& matching);
OsnScores osn_scores(const std::vector<Mask>& pred, const std::vector<Mask>& gt);

/// Pixel precision/recall/F summed over matched pairs: overlap pixels are
/// true positives, the matched masks' sizes are the denominators.
OsnScores pixel_scores(const std::vector<Mask>& pred, const std::vector<Mask>& gt,
                       const std::vector<int>& matching);
OsnScores pixel_scores(const std::vector<Mask>& pred, const std::vector<Mask>& gt);

}  // namespace uncseg
