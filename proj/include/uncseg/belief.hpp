#pragma once

#include <string>
#include <vector>

#include "uncseg/geometry.hpp"
#include "uncseg/mask.hpp"
#include "uncseg/scene.hpp"
#include "uncseg/uncos.hpp"

namespace uncseg {

struct BeliefParams {
  /// Penalty per object beyond the region's minimal hypothesis size.
  double lambda = 0.1;
  /// Score threshold for a hypothesis to count as likely.
  double delta = 0.5;
  /// Initial wholeness of every object.
  double p0 = 0.7;
  /// Floor on the displacement weight of one observation, meters.
  double eps_w = 1e-3;
  /// Meters of displacement credited per radian of rotation.
  double kappa_rot = 0.1;
  /// Weight of the initial wholeness in the displacement-weighted average.
  double prior_weight = 1e-3;
  /// A moved object whose inlier fraction falls below this breaks rigidity.
  double rigid_fraction = 0.9;
};

void validate(const BeliefParams& params);

struct ScoreEntry {
  int step = 0;
  double score = 0.0;
  double displacement = 0.0;
};

struct ObjectHypothesis {
  std::vector<Eigen::Vector3d> cloud;
  double wholeness = 0.0;
  std::vector<ScoreEntry> history;
  /// Projection on the most recent frame; empty once the object is lost.
  Mask mask;
};

struct BeliefHypothesis {
  std::vector<ObjectHypothesis> objects;
  double weight = 0.0;
};

struct BeliefRegion {
  std::vector<BeliefHypothesis> hypotheses;
};

struct Belief {
  std::vector<ObjectHypothesis> confident;
  std::vector<BeliefRegion> regions;
  BeliefParams params;
};

/// Lifts every mask to its above-table points in `obs.cloud`. Objects
/// without such points are dropped, hypotheses left empty are dropped and the region's weights
/// renormalized, and regions left empty are dropped.
Belief init_belief(const UncosResult& result, const Observation& obs, const BeliefParams& params);

/// Mean wholeness minus lambda per object beyond min_count.
double hypothesis_score(const BeliefHypothesis& h, double lambda, std::size_t min_count);

/// Hypothesis scores of every hypothesis of the region.
std::vector<double> region_scores(const BeliefRegion& region, double lambda);

/// Whether some observation with displacement above the floor registered
/// with an inlier fraction below rigid_fraction.
bool violates_rigidity(const ObjectHypothesis& object, const BeliefParams& params);

/// Index of the region's most likely hypothesis. The bootstrap favourite
/// (highest weight; ties: fewer objects, then lexicographic masks) holds
/// until one of its objects violates rigidity; from then on the highest
/// hypothesis score wins (ties: weight, fewer objects, masks).
std::size_t most_likely_index(const BeliefRegion& region, const BeliefParams& params);

/// Confident objects plus the most likely hypothesis of every region.
std::vector<ObjectHypothesis> most_likely(const Belief& belief);

/// Visible masks of the selected objects on `obs`. A pixel is dropped from an
/// object when a surface higher than the object's cloud covers it; pixels
/// claimed by several objects go to the one whose cloud best explains the
/// observed height. Objects left without pixels are omitted.
std::vector<Mask> project_to_masks(const std::vector<ObjectHypothesis>& selection, const Observation& obs);

/// Displacement-weighted wholeness over the initial value and the history.
double wholeness_from_history(const std::vector<ScoreEntry>& history, const BeliefParams& params);

std::string to_json(const Belief& belief);

}  // namespace uncseg
