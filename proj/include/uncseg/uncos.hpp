#pragma once

#include <string>
#include <vector>

#include "uncseg/geometry.hpp"
#include "uncseg/mask.hpp"
#include "uncseg/rng.hpp"
#include "uncseg/scene.hpp"
#include "uncseg/segmenter.hpp"

namespace uncseg {

struct UncosParams {
  /// Seed-mask selection: |m ∩ u| / |m| > gamma.
  double gamma = 0.5;
  /// Overlap-graph edge threshold on IoM.
  double sigma_m = 0.5;
  /// Verification: a prompt response with IoU below this demotes a candidate.
  double sigma_u = 0.7;
  int verify_prompts = 3;
  int num_hypotheses = 20;
  /// Episodes stop once the residual is at most alpha_frac * |region|.
  double alpha_frac = 0.05;
  /// Acceptance: |m ∩ r| / |m| > beta.
  double beta = 0.7;
  double dup_iou = 0.9;
  /// Masks spanning less height than this above the table are rejected.
  double thickness = 0.01;
  /// Dense seeds with IoU above this are collapsed before building the
  /// overlap graph (dense seeding returns many near-copies of one mask).
  double seed_nms_iou = 0.75;
  /// Prompts per episode before it is declared partial.
  int attempt_budget = 30;
  int plane_iters = 256;
  /// Plane inlier distance in meters; 0 selects 0.5 * resolution * sqrt(2).
  double plane_inlier_dist = 0.0;
  /// A seed is background when at least this fraction of it is background.
  double background_fraction = 0.5;
};

void validate(const UncosParams& params);

enum class RegionKind { confident, uncertain };

struct Region {
  Mask footprint;
  RegionKind kind = RegionKind::uncertain;
};

struct RegionHypothesis {
  std::vector<Mask> masks;
  double weight = 0.0;
  /// Some episode in this class ran out of prompts before covering the region.
  bool partial = false;
};

struct UncertainRegion {
  Region region;
  std::vector<RegionHypothesis> hypotheses;
};

struct UncosResult {
  std::vector<Mask> confident;
  std::vector<UncertainRegion> uncertain;
};

/// Table plane and the pixels treated as background (plane inliers and
/// everything below the plane).
struct Background {
  Plane plane;
  Mask mask;
};

Background estimate_background(const Observation& obs, const UncosParams& params, Rng& rng);

struct Partition {
  std::vector<Mask> confident;
  std::vector<Region> uncertain;
};

Partition partition_regions(const Observation& obs, Segmenter& segmenter, const Background& background,
                            const UncosParams& params, Rng& rng);

/// Same number of masks and a maximum-IoU one-to-one matching whose mean
/// IoU exceeds dup_iou.
bool duplicate_test(const std::vector<Mask>& a, const std::vector<Mask>& b, double dup_iou);

std::vector<RegionHypothesis> generate_region_hypotheses(const Mask& region,
                                                         const std::vector<Mask>& seed_masks,
                                                         const Observation& obs, Segmenter& segmenter,
                                                         const Background& background,
                                                         const UncosParams& params, Rng& rng);

UncosResult uncos(const Observation& obs, Segmenter& segmenter, const UncosParams& params, Rng& rng);

/// Confident masks plus the highest-weight hypothesis of every region (ties:
/// fewer masks, then lexicographic mask order).
std::vector<Mask> most_likely_masks(const UncosResult& result);

std::string to_json(const UncosResult& result);
UncosResult uncos_result_from_json(const std::string& text, GridShape shape);

}  // namespace uncseg
