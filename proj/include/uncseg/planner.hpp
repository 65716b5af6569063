#pragma once

#include <optional>
#include <vector>

#include "uncseg/belief.hpp"
#include "uncseg/scene.hpp"

namespace uncseg {

struct PlannerParams {
  /// Candidate pushes per step.
  int k = 8;
  int world_cap = 32;
  /// Push length in meters; 0 selects twice the median object radius.
  double push_distance = 0.0;
  /// Standoff of the push start from the object boundary, in pixels.
  double standoff_px = 1.0;
};

void validate(const PlannerParams& params);

/// Number of hypotheses scoring above delta.
int region_uncertainty(const BeliefRegion& region, double lambda, double delta);

/// Region with the largest uncertainty (ties: larger area, then lower
/// index), or nullopt when no region has more than one likely hypothesis.
std::optional<std::size_t> select_target_region(const Belief& belief);

struct World {
  Scene scene;
  /// Hypothesis index chosen in every region.
  std::vector<std::size_t> choice;
  double score = 0.0;
};

/// Simulable stand-in for an object: its cloud footprint extruded down to
/// the table, split into pixel-aligned boxes. Footprint cells where the
/// observation sees a surface clearly below the object's top are dropped.
/// nullopt when nothing remains.
std::optional<RigidBody> complete_object(const ObjectHypothesis& object, const Observation& obs, int id);

/// Confident objects combined with every product of the regions' likely
/// hypotheses (score above delta, else the single most likely one), keeping
/// the world_cap products with the highest summed score.
std::vector<World> construct_worlds(const Belief& belief, const Observation& obs, int world_cap);

struct ActionCandidate {
  PushAction action;
  std::size_t region = 0;
  std::size_t hypothesis = 0;
  std::size_t object = 0;
};

/// Twice the median equivalent-disc radius of the most likely objects.
double default_push_distance(const Belief& belief, const Observation& obs);

/// Push along `direction` through the centroid of `mask`, starting just
/// outside the mask on the far side.
PushAction push_through(const Mask& mask, const Observation& obs, const Eigen::Vector2d& direction,
                        double distance, double standoff_px);

std::vector<ActionCandidate> sample_actions(const Belief& belief, std::size_t region, const Observation& obs,
                                            const PlannerParams& params, double push_distance, Rng& rng);

struct ActionChoice {
  std::size_t index = 0;
  std::vector<double> objectives;
};

/// Mean over worlds of the mean absolute deviation of each world's
/// post-push depth from the across-world mean, over the pixels any world
/// occupies before or after the push.
double disagreement(const std::vector<World>& worlds, const PushAction& action, const Observation& obs);

/// Candidate with the highest disagreement; ties go to the lowest index.
ActionChoice select_action(const std::vector<World>& worlds, const std::vector<ActionCandidate>& candidates,
                           const Observation& obs);

}  // namespace uncseg
