#include "uncseg/belief.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "json.hpp"
#include "uncseg/error.hpp"

namespace uncseg {

namespace {

constexpr double kCoverTolerance = 1e-3;

std::vector<Mask> sorted_masks(const BeliefHypothesis& h) {
  std::vector<Mask> out;
  for (const auto& o : h.objects) out.push_back(o.mask);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t min_count(const BeliefRegion& region) {
  std::size_t m = std::numeric_limits<std::size_t>::max();
  for (const auto& h : region.hypotheses) m = std::min(m, h.objects.size());
  return m;
}

std::optional<ObjectHypothesis> lift(const Mask& mask, const Observation& obs, double p0) {
  ObjectHypothesis o;
  for (int i : mask.indices())
    if (obs.depth[i] > 0) o.cloud.push_back(obs.cloud[i]);
  if (o.cloud.empty()) return std::nullopt;
  o.wholeness = p0;
  o.mask = mask;
  return o;
}

}  // namespace

void validate(const BeliefParams& p) {
  if (!(p.lambda >= 0)) throw Error("belief lambda must be non-negative");
  if (!(p.p0 >= 0 && p.p0 <= 1)) throw Error("belief p0 must lie in [0, 1]");
  if (!(p.eps_w > 0)) throw Error("belief eps_w must be positive");
  if (!(p.kappa_rot >= 0)) throw Error("belief kappa_rot must be non-negative");
  if (!(p.prior_weight > 0)) throw Error("belief prior_weight must be positive");
  if (!(p.rigid_fraction >= 0 && p.rigid_fraction <= 1)) throw Error("belief rigid_fraction must lie in [0, 1]");
  if (!std::isfinite(p.delta)) throw Error("belief delta must be finite");
}

Belief init_belief(const UncosResult& result, const Observation& obs, const BeliefParams& params) {
  validate(params);
  Belief b;
  b.params = params;
  for (const auto& m : result.confident)
    if (auto o = lift(m, obs, params.p0)) b.confident.push_back(std::move(*o));
  for (const auto& u : result.uncertain) {
    BeliefRegion region;
    double total = 0;
    for (const auto& h : u.hypotheses) {
      BeliefHypothesis bh;
      bh.weight = h.weight;
      for (const auto& m : h.masks)
        if (auto o = lift(m, obs, params.p0)) bh.objects.push_back(std::move(*o));
      if (bh.objects.empty()) continue;
      total += bh.weight;
      region.hypotheses.push_back(std::move(bh));
    }
    if (region.hypotheses.empty()) continue;
    if (total > 0)
      for (auto& h : region.hypotheses) h.weight /= total;
    b.regions.push_back(std::move(region));
  }
  return b;
}

double hypothesis_score(const BeliefHypothesis& h, double lambda, std::size_t min_count) {
  if (h.objects.empty()) throw Error("hypothesis without objects");
  double sum = 0;
  for (const auto& o : h.objects) sum += o.wholeness;
  const double extra = static_cast<double>(h.objects.size()) - static_cast<double>(min_count);
  return sum / static_cast<double>(h.objects.size()) - lambda * extra;
}

std::vector<double> region_scores(const BeliefRegion& region, double lambda) {
  const std::size_t m = min_count(region);
  std::vector<double> out;
  for (const auto& h : region.hypotheses) out.push_back(hypothesis_score(h, lambda, m));
  return out;
}

bool violates_rigidity(const ObjectHypothesis& object, const BeliefParams& params) {
  for (const auto& e : object.history)
    if (e.displacement > params.eps_w && e.score < params.rigid_fraction) return true;
  return false;
}

std::size_t most_likely_index(const BeliefRegion& region, const BeliefParams& params) {
  if (region.hypotheses.empty()) throw Error("region without hypotheses");
  const auto& hs = region.hypotheses;
  const std::vector<double> scores = region_scores(region, params.lambda);
  // Fewer objects, then lexicographic masks.
  auto simpler = [&](std::size_t i, std::size_t j) {
    if (hs[i].objects.size() != hs[j].objects.size()) return hs[i].objects.size() < hs[j].objects.size();
    const auto mi = sorted_masks(hs[i]), mj = sorted_masks(hs[j]);
    return std::lexicographical_compare(mi.begin(), mi.end(), mj.begin(), mj.end());
  };
  std::size_t incumbent = 0;
  for (std::size_t i = 1; i < hs.size(); ++i)
    if (hs[i].weight > hs[incumbent].weight || (hs[i].weight == hs[incumbent].weight && simpler(i, incumbent)))
      incumbent = i;

  const auto& objects = hs[incumbent].objects;
  if (std::none_of(objects.begin(), objects.end(),
                   [&](const ObjectHypothesis& o) { return violates_rigidity(o, params); }))
    return incumbent;
  std::size_t best = 0;
  for (std::size_t i = 1; i < hs.size(); ++i)
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] &&
         (hs[i].weight > hs[best].weight || (hs[i].weight == hs[best].weight && simpler(i, best)))))
      best = i;
  return best;
}

std::vector<ObjectHypothesis> most_likely(const Belief& belief) {
  std::vector<ObjectHypothesis> out = belief.confident;
  for (const auto& r : belief.regions) {
    const auto& h = r.hypotheses[most_likely_index(r, belief.params)];
    out.insert(out.end(), h.objects.begin(), h.objects.end());
  }
  return out;
}

std::vector<Mask> project_to_masks(const std::vector<ObjectHypothesis>& selection, const Observation& obs) {
  const int n = obs.shape.size();
  const double none = -std::numeric_limits<double>::infinity();
  std::vector<int> owner(n, -1);
  std::vector<double> owner_err(n, 0.0);
  for (std::size_t k = 0; k < selection.size(); ++k) {
    const ObjectHypothesis& o = selection[k];
    if (o.mask.empty()) continue;
    if (o.mask.shape() != obs.shape) throw Error("mask and observation grids differ");
    // Highest cloud point per cell, only where the mask claims pixels.
    std::unordered_map<int, double> top;
    for (int i : o.mask.indices()) top.emplace(i, none);
    for (const auto& p : o.cloud)
      if (auto px = obs.pixel_at(p.x(), p.y())) {
        auto it = top.find(*px);
        if (it != top.end()) it->second = std::max(it->second, p.z());
      }
    for (int i : o.mask.indices()) {
      if (obs.depth[i] <= 0) continue;
      const double z = top[i];
      // Something higher covers the object here.
      if (z != none && obs.depth[i] > z + kCoverTolerance) continue;
      const double err = z == none ? std::numeric_limits<double>::infinity() : std::abs(z - obs.depth[i]);
      if (owner[i] < 0 || err < owner_err[i]) {
        owner[i] = static_cast<int>(k);
        owner_err[i] = err;
      }
    }
  }
  std::vector<std::vector<int>> idx(selection.size());
  for (int i = 0; i < n; ++i)
    if (owner[i] >= 0) idx[owner[i]].push_back(i);
  std::vector<Mask> out;
  for (std::size_t k = 0; k < selection.size(); ++k)
    if (!idx[k].empty()) out.emplace_back(obs.shape, std::move(idx[k]), selection[k].mask.source());
  return out;
}

double wholeness_from_history(const std::vector<ScoreEntry>& history, const BeliefParams& params) {
  double num = params.prior_weight * params.p0, den = params.prior_weight;
  for (const auto& e : history) {
    const double d = std::max(e.displacement, params.eps_w);
    num += d * e.score;
    den += d;
  }
  return std::clamp(num / den, 0.0, 1.0);
}

std::string to_json(const Belief& belief) {
  using nlohmann::json;
  auto object = [](const ObjectHypothesis& o) {
    json j;
    j["wholeness"] = o.wholeness;
    j["points"] = o.cloud.size();
    j["mask"] = encode_rle(o.mask);
    j["history"] = json::array();
    for (const auto& e : o.history) j["history"].push_back({e.step, e.score, e.displacement});
    return j;
  };
  json j;
  j["params"] = {{"lambda", belief.params.lambda}, {"delta", belief.params.delta}, {"p0", belief.params.p0}};
  j["confident"] = json::array();
  for (const auto& o : belief.confident) j["confident"].push_back(object(o));
  j["regions"] = json::array();
  for (const auto& r : belief.regions) {
    json jr;
    jr["most_likely"] = most_likely_index(r, belief.params);
    jr["scores"] = region_scores(r, belief.params.lambda);
    jr["hypotheses"] = json::array();
    for (const auto& h : r.hypotheses) {
      json jh;
      jh["weight"] = h.weight;
      jh["objects"] = json::array();
      for (const auto& o : h.objects) jh["objects"].push_back(object(o));
      jr["hypotheses"].push_back(jh);
    }
    j["regions"].push_back(jr);
  }
  return j.dump();
}

}  // namespace uncseg
