#include "uncseg/uncos.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "json.hpp"
#include "uncseg/assignment.hpp"
#include "uncseg/error.hpp"

namespace uncseg {

namespace {

int random_pixel(const Mask& m, Rng& rng) { return m.indices()[uniform_index(rng, m.size())]; }

Mask strip(const Mask& m, const Background& bg) {
  Mask out = mask_difference(m, bg.mask);
  out.set_source(m.source());
  return out;
}

/// Disjoint-set forest over node indices.
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

/// Collapses near-identical masks; each cluster is represented by its member
/// with the largest summed IoU to the other members.
std::vector<Mask> collapse_duplicates(const std::vector<Mask>& masks, double iou_threshold) {
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < static_cast<int>(masks.size()); ++i) {
    bool placed = false;
    for (auto& cl : clusters) {
      if (mask_iou(masks[cl.front()], masks[i]) > iou_threshold) {
        cl.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) clusters.push_back({i});
  }
  std::vector<Mask> out;
  for (const auto& cl : clusters) {
    int best = cl.front();
    double best_score = -1.0;
    for (int a : cl) {
      double score = 0.0;
      for (int b : cl)
        if (a != b) score += mask_iou(masks[a], masks[b]);
      if (score > best_score) {
        best_score = score;
        best = a;
      }
    }
    out.push_back(masks[best]);
  }
  return out;
}

/// Makes footprints pairwise disjoint: smaller footprints keep contested
/// pixels. Ties in area keep the original order.
void clip_disjoint(std::vector<Mask*> items) {
  std::stable_sort(items.begin(), items.end(),
                   [](const Mask* a, const Mask* b) { return a->size() < b->size(); });
  if (items.empty()) return;
  std::vector<std::uint8_t> taken(items.front()->shape().size(), 0);
  for (Mask* m : items) {
    std::vector<int> keep;
    for (int i : m->indices())
      if (!taken[i]) {
        keep.push_back(i);
        taken[i] = 1;
      }
    const MaskSource src = m->source();
    *m = Mask(m->shape(), std::move(keep), src);
  }
}

/// Hands leftover region pixels to the nearest mask through the region
/// (4-neighbour breadth-first growth from all masks at once).
void absorb_leftover(std::vector<Mask>& masks, const Mask& region) {
  if (masks.empty()) return;
  const GridShape g = region.shape();
  std::vector<int> owner(g.size(), -2);  // -2 outside region, -1 unclaimed
  for (int i : region.indices()) owner[i] = -1;
  std::deque<int> queue;
  for (int k = 0; k < static_cast<int>(masks.size()); ++k)
    for (int i : masks[k].indices()) {
      owner[i] = k;
      queue.push_back(i);
    }
  std::vector<std::vector<int>> gained(masks.size());
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    const int r = i / g.cols, c = i % g.cols;
    for (auto [dr, dc] : {std::pair{-1, 0}, std::pair{0, -1}, std::pair{0, 1}, std::pair{1, 0}}) {
      if (!g.contains(r + dr, c + dc)) continue;
      const int j = g.index(r + dr, c + dc);
      if (owner[j] != -1) continue;
      owner[j] = owner[i];
      gained[owner[i]].push_back(j);
      queue.push_back(j);
    }
  }
  for (std::size_t k = 0; k < masks.size(); ++k) {
    if (gained[k].empty()) continue;
    std::vector<int> idx(masks[k].indices().begin(), masks[k].indices().end());
    idx.insert(idx.end(), gained[k].begin(), gained[k].end());
    masks[k] = Mask(g, std::move(idx), masks[k].source());
  }
}

struct Episode {
  std::vector<Mask> masks;
  bool partial = false;
};

Episode run_episode(const Mask& region, const Mask* seed, const Observation& obs, Segmenter& segmenter,
                    const Background& bg, const UncosParams& params, Rng& rng) {
  Episode ep;
  Mask residual = region;
  if (seed) {
    Mask s = mask_intersection(*seed, region);
    s.set_source(seed->source());
    if (!s.empty()) {
      residual = mask_difference(residual, s);
      ep.masks.push_back(std::move(s));
    }
  }
  const double alpha = params.alpha_frac * static_cast<double>(region.size());
  int attempts = 0;
  while (true) {
    // One-pixel slivers left between accepted masks are not worth a prompt.
    const Mask effective = opening(residual, 1);
    if (static_cast<double>(effective.size()) <= alpha) break;
    if (attempts >= params.attempt_budget) {
      ep.partial = true;
      break;
    }
    ++attempts;
    Mask m = strip(segmenter.prompt_point(obs.handle, random_pixel(effective, rng), rng), bg);
    if (m.empty()) continue;
    const double contained =
        static_cast<double>(intersection_size(m, residual)) / static_cast<double>(m.size());
    if (contained <= params.beta) continue;
    if (is_degenerate(m, obs, params.thickness, bg.plane)) continue;
    Mask accepted = mask_intersection(m, residual);
    accepted.set_source(m.source());
    residual = mask_difference(residual, accepted);
    ep.masks.push_back(std::move(accepted));
  }
  absorb_leftover(ep.masks, region);
  if (ep.masks.empty()) ep.masks.push_back(region);
  return ep;
}

std::vector<Mask> canonical(std::vector<Mask> masks) {
  std::sort(masks.begin(), masks.end());
  return masks;
}

bool canonical_less(const std::vector<Mask>& a, const std::vector<Mask>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

void validate(const UncosParams& p) {
  auto unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!unit(p.gamma) || !unit(p.sigma_m) || !unit(p.sigma_u) || !unit(p.beta) || !unit(p.dup_iou) ||
      !unit(p.seed_nms_iou))
    throw Error("uncos thresholds must lie in (0, 1)");
  if (p.alpha_frac < 0.0 || p.alpha_frac >= 1.0) throw Error("uncos alpha_frac must lie in [0, 1)");
  if (p.verify_prompts < 1) throw Error("uncos verify_prompts must be at least 1");
  if (p.num_hypotheses < 1) throw Error("uncos num_hypotheses must be at least 1");
  if (p.attempt_budget < 1) throw Error("uncos attempt_budget must be at least 1");
  if (p.plane_iters < 1) throw Error("uncos plane_iters must be at least 1");
  if (p.thickness < 0.0 || p.plane_inlier_dist < 0.0) throw Error("uncos distances must be non-negative");
  if (p.background_fraction <= 0.0 || p.background_fraction > 1.0)
    throw Error("uncos background_fraction must lie in (0, 1]");
}

Background estimate_background(const Observation& obs, const UncosParams& params, Rng& rng) {
  Rng local(draw_seed(rng));
  const double dist =
      params.plane_inlier_dist > 0 ? params.plane_inlier_dist : 0.5 * obs.resolution * std::sqrt(2.0);
  PlaneFit fit = fit_plane_ransac(obs.cloud, params.plane_iters, dist, local);
  std::vector<std::uint8_t> bits = std::move(fit.inliers);
  for (int i = 0; i < obs.shape.size(); ++i)
    if (fit.plane.signed_distance(obs.cloud[i]) < 0) bits[i] = 1;
  return {fit.plane, Mask::from_bitmap(obs.shape, bits)};
}

Partition partition_regions(const Observation& obs, Segmenter& segmenter, const Background& bg,
                            const UncosParams& params, Rng& rng) {
  std::vector<Mask> seeds;
  for (const Mask& m : segmenter.seed_all(obs.handle, rng)) {
    const double bg_share = static_cast<double>(intersection_size(m, bg.mask)) / static_cast<double>(m.size());
    if (bg_share >= params.background_fraction) continue;
    Mask fg = strip(m, bg);
    if (!fg.empty()) seeds.push_back(std::move(fg));
  }
  seeds = collapse_duplicates(seeds, params.seed_nms_iou);

  const int n = static_cast<int>(seeds.size());
  UnionFind uf(n);
  std::vector<int> degree(n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (mask_iom(seeds[i], seeds[j]) > params.sigma_m) {
        uf.unite(i, j);
        ++degree[i];
        ++degree[j];
      }

  Partition out;
  std::vector<Mask> candidates;
  std::map<int, Mask> components;
  for (int i = 0; i < n; ++i) {
    if (degree[i] == 0) {
      candidates.push_back(seeds[i]);
      continue;
    }
    auto [it, fresh] = components.try_emplace(uf.find(i), seeds[i]);
    if (!fresh) it->second = mask_union(it->second, seeds[i]);
  }
  for (auto& [root, footprint] : components) out.uncertain.push_back({footprint, RegionKind::uncertain});

  // Each candidate is verified on its own pre-drawn stream.
  std::vector<std::uint64_t> streams;
  for (std::size_t k = 0; k < candidates.size(); ++k) streams.push_back(draw_seed(rng));
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    Rng local(streams[k]);
    const Mask& c = candidates[k];
    bool demoted = false;
    for (int t = 0; t < params.verify_prompts && !demoted; ++t) {
      Mask m = strip(segmenter.prompt_point(obs.handle, random_pixel(c, local), local), bg);
      if (m.empty() || mask_iou(m, c) < params.sigma_u) demoted = true;
    }
    if (demoted) out.uncertain.push_back({c, RegionKind::uncertain});
    else out.confident.push_back(c);
  }

  std::vector<Mask*> all;
  for (auto& m : out.confident) all.push_back(&m);
  for (auto& r : out.uncertain) all.push_back(&r.footprint);
  clip_disjoint(all);
  std::erase_if(out.confident, [](const Mask& m) { return m.empty(); });
  std::erase_if(out.uncertain, [](const Region& r) { return r.footprint.empty(); });
  return out;
}

bool duplicate_test(const std::vector<Mask>& a, const std::vector<Mask>& b, double dup_iou) {
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  const int n = static_cast<int>(a.size());
  std::vector<double> w(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w[i * n + j] = mask_iou(a[i], b[j]);
  const auto match = max_weight_assignment(w, n, n);
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    if (match[i] >= 0) total += w[i * n + match[i]];
  return total / n > dup_iou;
}

std::vector<RegionHypothesis> generate_region_hypotheses(const Mask& region,
                                                         const std::vector<Mask>& seed_masks,
                                                         const Observation& obs, Segmenter& segmenter,
                                                         const Background& bg, const UncosParams& params,
                                                         Rng& rng) {
  if (region.empty()) throw Error("empty mask");
  const int n = params.num_hypotheses;
  // Two streams per episode: the first run and its one resample.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> streams;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t a = draw_seed(rng);
    streams.emplace_back(a, draw_seed(rng));
  }

  std::vector<Episode> episodes;
  for (int i = 0; i < n; ++i) {
    const Mask* seed = i < static_cast<int>(seed_masks.size()) ? &seed_masks[i] : nullptr;
    Rng first(streams[i].first);
    Episode ep = run_episode(region, seed, obs, segmenter, bg, params, first);
    if (ep.partial) {
      Rng second(streams[i].second);
      ep = run_episode(region, seed, obs, segmenter, bg, params, second);
    }
    ep.masks = canonical(std::move(ep.masks));
    episodes.push_back(std::move(ep));
  }

  // Classes are formed in canonical order, so the outcome does not depend on
  // the order episodes finished in.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return canonical_less(episodes[a].masks, episodes[b].masks); });
  struct Class {
    int representative;
    int count = 0;
    bool partial = false;
  };
  std::vector<Class> classes;
  for (int e : order) {
    bool joined = false;
    for (auto& cl : classes) {
      if (duplicate_test(episodes[cl.representative].masks, episodes[e].masks, params.dup_iou)) {
        ++cl.count;
        cl.partial = cl.partial || episodes[e].partial;
        joined = true;
        break;
      }
    }
    if (!joined) classes.push_back({e, 1, episodes[e].partial});
  }
  std::stable_sort(classes.begin(), classes.end(),
                   [](const Class& a, const Class& b) { return a.count > b.count; });

  std::vector<RegionHypothesis> out;
  for (const auto& cl : classes)
    out.push_back({episodes[cl.representative].masks, static_cast<double>(cl.count) / n, cl.partial});
  return out;
}

UncosResult uncos(const Observation& obs, Segmenter& segmenter, const UncosParams& params, Rng& rng) {
  validate(params);
  const Background bg = estimate_background(obs, params, rng);
  Partition part = partition_regions(obs, segmenter, bg, params, rng);

  std::vector<Mask> top_down;
  for (const Mask& m : segmenter.high_precision(obs.handle, rng)) {
    Mask fg = strip(m, bg);
    if (!fg.empty()) top_down.push_back(std::move(fg));
  }

  UncosResult result;
  result.confident = std::move(part.confident);
  std::vector<std::uint64_t> streams;
  for (std::size_t r = 0; r < part.uncertain.size(); ++r) streams.push_back(draw_seed(rng));
  for (std::size_t r = 0; r < part.uncertain.size(); ++r) {
    const Mask& u = part.uncertain[r].footprint;
    std::vector<Mask> seeds;
    for (const Mask& m : top_down) {
      if (static_cast<double>(intersection_size(m, u)) / static_cast<double>(m.size()) > params.gamma) {
        Mask s = mask_intersection(m, u);
        s.set_source(MaskSource::top_down);
        seeds.push_back(std::move(s));
      }
    }
    Rng local(streams[r]);
    UncertainRegion region{part.uncertain[r],
                           generate_region_hypotheses(u, seeds, obs, segmenter, bg, params, local)};
    result.uncertain.push_back(std::move(region));
  }
  return result;
}

std::vector<Mask> most_likely_masks(const UncosResult& result) {
  std::vector<Mask> out = result.confident;
  for (const auto& region : result.uncertain) {
    const RegionHypothesis* best = nullptr;
    for (const auto& h : region.hypotheses) {
      if (!best || h.weight > best->weight ||
          (h.weight == best->weight && canonical_less(h.masks, best->masks)))
        best = &h;
    }
    if (best) out.insert(out.end(), best->masks.begin(), best->masks.end());
  }
  return out;
}

std::string to_json(const UncosResult& result) {
  using nlohmann::json;
  GridShape shape;
  json j;
  auto rle = [&](const Mask& m) {
    shape = m.shape();
    return json(encode_rle(m));
  };
  j["confident"] = json::array();
  for (const auto& m : result.confident) j["confident"].push_back(rle(m));
  j["uncertain"] = json::array();
  for (const auto& r : result.uncertain) {
    json jr;
    jr["footprint"] = rle(r.region.footprint);
    jr["hypotheses"] = json::array();
    for (const auto& h : r.hypotheses) {
      json jh;
      jh["weight"] = h.weight;
      jh["partial"] = h.partial;
      jh["masks"] = json::array();
      for (const auto& m : h.masks) jh["masks"].push_back(rle(m));
      jr["hypotheses"].push_back(jh);
    }
    j["uncertain"].push_back(jr);
  }
  j["grid"] = {shape.rows, shape.cols};
  return j.dump();
}

UncosResult uncos_result_from_json(const std::string& text, GridShape shape) {
  using nlohmann::json;
  UncosResult out;
  try {
    const json j = json::parse(text);
    for (const auto& m : j.at("confident")) out.confident.push_back(decode_rle(m.get<std::string>(), shape));
    for (const auto& jr : j.at("uncertain")) {
      UncertainRegion r;
      r.region.footprint = decode_rle(jr.at("footprint").get<std::string>(), shape);
      for (const auto& jh : jr.at("hypotheses")) {
        RegionHypothesis h;
        h.weight = jh.at("weight").get<double>();
        h.partial = jh.at("partial").get<bool>();
        for (const auto& m : jh.at("masks")) h.masks.push_back(decode_rle(m.get<std::string>(), shape));
        r.hypotheses.push_back(std::move(h));
      }
      out.uncertain.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed UncOS result: ") + e.what());
  }
  return out;
}

}  // namespace uncseg
