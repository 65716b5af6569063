#include <algorithm>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "scenes.hpp"
#include "uncseg/belief.hpp"
#include "uncseg/error.hpp"
#include "uncseg/frame.hpp"
#include "uncseg/segmenter.hpp"

using namespace uncseg;
using namespace testscenes;

namespace {

constexpr double kRes = 0.0025;
const GridShape kGrid{8, 8};

ObjectHypothesis object(double wholeness, std::vector<int> pixels = {0}) {
  ObjectHypothesis o;
  o.wholeness = wholeness;
  o.cloud = {Eigen::Vector3d::Zero()};
  o.mask = Mask(kGrid, std::move(pixels));
  return o;
}

BeliefHypothesis hypothesis(std::vector<double> wholeness, double weight) {
  BeliefHypothesis h;
  h.weight = weight;
  int px = 0;
  for (double s : wholeness) h.objects.push_back(object(s, {px++}));
  return h;
}

/// Marks the object as having moved and broken rigidity.
void break_rigidity(ObjectHypothesis& o) { o.history.push_back({1, 0.5, 0.05}); }
/// Marks the object as having moved rigidly.
void move_rigidly(ObjectHypothesis& o) { o.history.push_back({1, 1.0, 0.05}); }

Belief region_belief(std::vector<BeliefHypothesis> hs, BeliefParams params = {}) {
  Belief b;
  b.params = params;
  b.regions.push_back({std::move(hs)});
  return b;
}

}  // namespace

TEST_CASE("hypothesis score worked examples") {
  CHECK(hypothesis_score(hypothesis({0.8, 0.6}, 1), 0.1, 2) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(hypothesis_score(hypothesis({0.9, 0.9, 0.9}, 1), 0.1, 2) == doctest::Approx(0.8).epsilon(1e-15));
  const auto h = hypothesis({0.3, 0.9, 0.6, 0.2}, 1);
  CHECK(hypothesis_score(h, 0.0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(hypothesis_score(BeliefHypothesis{}, 0.1, 0), Error);
}

TEST_CASE("hypothesis scores stay within their bounds") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    BeliefRegion r;
    const int n = 1 + static_cast<int>(rng() % 4);
    std::size_t lo = 100, hi = 0;
    for (int h = 0; h < n; ++h) {
      std::vector<double> s(1 + rng() % 5);
      for (auto& x : s) x = u(rng);
      r.hypotheses.push_back(hypothesis(s, 1.0 / n));
      lo = std::min(lo, s.size());
      hi = std::max(hi, s.size());
    }
    const double lambda = 2 * u(rng);
    for (double s : region_scores(r, lambda)) {
      CHECK(s <= 1.0);
      CHECK(s >= -lambda * static_cast<double>(hi - lo) - 1e-12);
    }
  }
}

TEST_CASE("init lifts masks to their points") {
  FrameStore store;
  auto f = store.add(equal_pair(), kRes);
  const auto bodies = f->obs.body_masks();
  REQUIRE(bodies.size() == 2);

  SUBCASE("one confident mask") {
    UncosResult r;
    r.confident.push_back(bodies[0].second);
    const Belief b = init_belief(r, f->obs, {});
    REQUIRE(b.confident.size() == 1);
    CHECK(b.confident[0].cloud.size() == bodies[0].second.size());
    CHECK(b.confident[0].wholeness == BeliefParams{}.p0);
    CHECK(b.confident[0].mask == bodies[0].second);
    CHECK(b.regions.empty());
  }
  SUBCASE("weights pass through") {
    UncosResult r;
    const Mask both = mask_union(bodies[0].second, bodies[1].second);
    r.uncertain.push_back({{both, RegionKind::uncertain},
                           {{{bodies[0].second, bodies[1].second}, 0.7, false}, {{both}, 0.3, false}}});
    const Belief b = init_belief(r, f->obs, {});
    REQUIRE(b.regions.size() == 1);
    REQUIRE(b.regions[0].hypotheses.size() == 2);
    CHECK(b.regions[0].hypotheses[0].weight == 0.7);
    CHECK(b.regions[0].hypotheses[1].weight == 0.3);
    CHECK(b.regions[0].hypotheses[0].objects.size() == 2);
    CHECK(b.regions[0].hypotheses[1].objects[0].cloud.size() == both.size());
  }
  SUBCASE("objects without points are dropped and weights renormalized") {
    // Pixels in the grid corner are bare table.
    const Mask table(f->obs.shape, {0, 1, 2});
    REQUIRE(f->obs.depth[0] == 0.0);
    UncosResult r;
    r.confident.push_back(table);
    r.uncertain.push_back({{bodies[0].second, RegionKind::uncertain},
                           {{{bodies[0].second}, 0.6, false}, {{table}, 0.3, false}, {{table, bodies[0].second}, 0.1, false}}});
    const Belief b = init_belief(r, f->obs, {});
    CHECK(b.confident.empty());
    REQUIRE(b.regions[0].hypotheses.size() == 2);
    CHECK(b.regions[0].hypotheses[0].weight == doctest::Approx(6.0 / 7.0));
    CHECK(b.regions[0].hypotheses[1].weight == doctest::Approx(1.0 / 7.0));
    CHECK(b.regions[0].hypotheses[1].objects.size() == 1);
  }
}

TEST_CASE("most likely before any interaction follows the bootstrap weight") {
  SUBCASE("equal scores, weights 0.6 and 0.4") {
    const Belief b = region_belief({hypothesis({0.7}, 0.4), hypothesis({0.7}, 0.6)});
    CHECK(most_likely_index(b.regions[0], b.params) == 1);
  }
  SUBCASE("the weight favourite wins even against a better score") {
    const Belief b = region_belief({hypothesis({0.7, 0.7}, 0.6), hypothesis({0.7}, 0.4)});
    CHECK(most_likely_index(b.regions[0], b.params) == 0);
  }
  SUBCASE("equal weights prefer fewer objects") {
    const Belief b = region_belief({hypothesis({0.7, 0.7}, 0.5), hypothesis({0.7}, 0.5)});
    CHECK(most_likely_index(b.regions[0], b.params) == 1);
  }
  SUBCASE("rigid motion alone does not unseat the favourite") {
    auto merged = hypothesis({0.98}, 0.3);
    move_rigidly(merged.objects[0]);
    const Belief b = region_belief({hypothesis({0.7, 0.7}, 0.7), merged});
    CHECK(most_likely_index(b.regions[0], b.params) == 0);
  }
}

TEST_CASE("most likely after a rigidity violation follows the score") {
  SUBCASE("scores 0.7 and 0.4") {
    auto broken = hypothesis({0.4}, 0.6);
    break_rigidity(broken.objects[0]);
    const Belief b = region_belief({hypothesis({0.7}, 0.4), broken});
    CHECK(region_scores(b.regions[0], b.params.lambda)[0] == doctest::Approx(0.7));
    CHECK(region_scores(b.regions[0], b.params.lambda)[1] == doctest::Approx(0.4));
    CHECK(most_likely_index(b.regions[0], b.params) == 0);
  }
  SUBCASE("equal scores fall back to weight") {
    auto broken = hypothesis({0.6}, 0.5);
    break_rigidity(broken.objects[0]);
    const Belief b = region_belief({hypothesis({0.6}, 0.2), broken, hypothesis({0.6}, 0.3)});
    CHECK(most_likely_index(b.regions[0], b.params) == 1);
  }
  SUBCASE("a small move is not evidence") {
    auto h = hypothesis({0.4}, 0.6);
    h.objects[0].history.push_back({1, 0.1, BeliefParams{}.eps_w});
    const Belief b = region_belief({hypothesis({0.7}, 0.4), h});
    CHECK_FALSE(violates_rigidity(h.objects[0], b.params));
    CHECK(most_likely_index(b.regions[0], b.params) == 1);
  }
}

TEST_CASE("most likely is the confident set plus one hypothesis per region") {
  Belief b = region_belief({hypothesis({0.7}, 0.2), hypothesis({0.7, 0.7}, 0.8)});
  b.confident.push_back(object(0.9, {5}));
  const auto ml = most_likely(b);
  REQUIRE(ml.size() == 3);
  CHECK(ml[0].wholeness == 0.9);

  Belief only;
  only.confident.push_back(object(0.9, {5}));
  only.confident.push_back(object(0.8, {6}));
  CHECK(most_likely(only).size() == 2);
}

TEST_CASE("argmax is invariant to a common wholeness shift") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BeliefHypothesis> hs;
    const int n = 2 + static_cast<int>(rng() % 3), count = 1 + static_cast<int>(rng() % 3);
    for (int h = 0; h < n; ++h) {
      std::vector<double> s(count);
      for (auto& x : s) x = u(rng);
      hs.push_back(hypothesis(s, 1.0 / n));
    }
    break_rigidity(hs[0].objects[0]);
    Belief b = region_belief(hs);
    const std::size_t before = most_likely_index(b.regions[0], b.params);
    const double shift = u(rng);
    for (auto& h : b.regions[0].hypotheses)
      for (auto& o : h.objects) o.wholeness += shift;
    CHECK(most_likely_index(b.regions[0], b.params) == before);
  }
}

TEST_CASE("a large penalty selects a minimal hypothesis once evidence is in") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  BeliefParams params;
  params.lambda = 1.01;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BeliefHypothesis> hs;
    const int n = 2 + static_cast<int>(rng() % 4);
    for (int h = 0; h < n; ++h) {
      std::vector<double> s(1 + rng() % 4);
      for (auto& x : s) x = u(rng);
      hs.push_back(hypothesis(s, u(rng)));
    }
    for (auto& h : hs) break_rigidity(h.objects[0]);
    const Belief b = region_belief(hs, params);
    std::size_t lo = 100;
    for (const auto& h : hs) lo = std::min(lo, h.objects.size());
    CHECK(hs[most_likely_index(b.regions[0], b.params)].objects.size() == lo);
  }
}

TEST_CASE("wholeness is the displacement-weighted average including the prior") {
  BeliefParams p;
  CHECK(wholeness_from_history({}, p) == doctest::Approx(p.p0));
  // Oracle: explicit weighted sum with the floor applied by hand.
  const std::vector<ScoreEntry> h{{1, 1.0, 0.0}, {2, 0.6, 0.04}, {3, 0.9, 0.01}};
  const double num = p.prior_weight * p.p0 + p.eps_w * 1.0 + 0.04 * 0.6 + 0.01 * 0.9;
  const double den = p.prior_weight + p.eps_w + 0.04 + 0.01;
  CHECK(wholeness_from_history(h, p) == doctest::Approx(num / den).epsilon(1e-12));
  // Unmoved objects stay between the prior and the observations.
  const double still = wholeness_from_history({{1, 1.0, 0.0}}, p);
  CHECK(still > p.p0);
  CHECK(still < 1.0);
}

TEST_CASE("projection onto a fresh frame returns the lifted masks") {
  FrameStore store;
  auto f = store.add(touching_pair(), kRes);
  UncosResult r;
  for (const auto& [id, m] : f->obs.body_masks()) r.confident.push_back(m);
  const Belief b = init_belief(r, f->obs, {});
  const auto masks = project_to_masks(most_likely(b), f->obs);
  REQUIRE(masks.size() == r.confident.size());
  for (std::size_t i = 0; i < masks.size(); ++i) CHECK(masks[i].same_pixels(r.confident[i]));
}

TEST_CASE("projection drops covered pixels") {
  RigidBody shelf;
  shelf.id = 2;
  shelf.pose = {0.32, 0.25, 0.0};
  shelf.parts.push_back(box_part(0, 0, 0.04, 0.1, 0.1));
  shelf.parts.push_back(box_part(-0.06, 0, 0.08, 0.1, 0.02, 0.06));

  auto lifted_alone = [](const RigidBody& low, const Observation& with_shelf) {
    const Observation alone = render(scene_of({low}), kRes);
    UncosResult r;
    r.confident.push_back(alone.body_masks().at(0).second);
    Belief b = init_belief(r, alone, {});
    return project_to_masks(b.confident, with_shelf);
  };

  SUBCASE("partially under the overhang") {
    const RigidBody low = box(1, 0.23, 0.25, 0.04, 0.04, 0.03);
    const Observation obs = render(scene_of({low, shelf}), kRes);
    const auto masks = lifted_alone(low, obs);
    REQUIRE(masks.size() == 1);
    // Oracle: the renderer's topmost labels.
    const Mask visible = obs.body_masks().at(0).second;
    const Mask footprint = render(scene_of({low}), kRes).body_masks().at(0).second;
    CHECK(masks[0].same_pixels(visible));
    CHECK(masks[0].size() < footprint.size());
  }
  SUBCASE("fully under the overhang") {
    const RigidBody low = box(1, 0.26, 0.25, 0.04, 0.04, 0.03);
    const Observation obs = render(scene_of({low, shelf}), kRes);
    CHECK(lifted_alone(low, obs).empty());
  }
}

TEST_CASE("noise-free lifting then most likely reproduces the ground truth") {
  FrameStore store;
  auto f = store.add(equal_pair(), kRes);
  UncosResult r;
  const auto bodies = f->obs.body_masks();
  const Mask both = mask_union(bodies[0].second, bodies[1].second);
  r.uncertain.push_back({{both, RegionKind::uncertain},
                         {{{bodies[0].second, bodies[1].second}, 0.9, false}, {{both}, 0.1, false}}});
  const auto masks = project_to_masks(most_likely(init_belief(r, f->obs, {})), f->obs);
  REQUIRE(masks.size() == 2);
  CHECK(masks[0].same_pixels(bodies[0].second));
  CHECK(masks[1].same_pixels(bodies[1].second));
}

TEST_CASE("belief serialization names the selected hypothesis") {
  auto broken = hypothesis({0.4}, 0.6);
  break_rigidity(broken.objects[0]);
  const Belief b = region_belief({hypothesis({0.7}, 0.4), broken});
  const auto j = nlohmann::json::parse(to_json(b));
  CHECK(j["regions"][0]["most_likely"] == 0);
  CHECK(j["regions"][0]["hypotheses"].size() == 2);
  CHECK(j["regions"][0]["hypotheses"][1]["objects"][0]["history"][0][1] == 0.5);
}

TEST_CASE("belief parameters are validated") {
  BeliefParams p;
  p.lambda = -1;
  CHECK_THROWS_AS(validate(p), Error);
  p = {};
  p.p0 = 1.5;
  CHECK_THROWS_AS(validate(p), Error);
  p = {};
  p.eps_w = 0;
  CHECK_THROWS_AS(validate(p), Error);
  p = {};
  p.rigid_fraction = 2;
  CHECK_THROWS_AS(validate(p), Error);
}
