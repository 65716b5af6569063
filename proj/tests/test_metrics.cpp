#include <algorithm>
#include <functional>
#include <random>

#include "doctest.h"
#include "uncseg/metrics.hpp"

using namespace uncseg;

namespace {

const GridShape kGrid{12, 12};

Mask block(int r0, int c0, int rows, int cols) {
  std::vector<int> idx;
  for (int r = r0; r < r0 + rows; ++r)
    for (int c = c0; c < c0 + cols; ++c) idx.push_back(kGrid.index(r, c));
  return Mask(kGrid, idx);
}

struct Brute {
  double best_f = -1;
  // (P_n, R_n) of every assignment reaching best_f.
  std::vector<std::pair<double, double>> optima;
};

// Every injective partial assignment pred -> gt, scored from raw counts.
Brute brute_force(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  Brute out;
  const std::size_t ns = pred.size(), ng = gt.size();
  std::vector<int> assign(ns, -1);
  std::vector<bool> used(ng, false);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == ns) {
      double sp = 0, sr = 0, sf = 0;
      for (std::size_t k = 0; k < ns; ++k) {
        if (assign[k] < 0) continue;
        std::size_t inter = 0;
        for (int px : pred[k].indices()) inter += gt[assign[k]].contains(px);
        const double p = double(inter) / pred[k].size(), r = double(inter) / gt[assign[k]].size();
        sp += p;
        sr += r;
        sf += inter ? 2 * p * r / (p + r) : 0;
      }
      const double f = sf / std::max(ns, ng);
      const std::pair<double, double> pr{sp / ns, sr / ng};
      if (f > out.best_f + 1e-12) {
        out.best_f = f;
        out.optima = {pr};
      } else if (f > out.best_f - 1e-12) {
        out.optima.push_back(pr);
      }
      return;
    }
    rec(i + 1);
    for (std::size_t j = 0; j < ng; ++j) {
      if (used[j]) continue;
      used[j] = true;
      assign[i] = static_cast<int>(j);
      rec(i + 1);
      assign[i] = -1;
      used[j] = false;
    }
  };
  rec(0);
  return out;
}

std::vector<Mask> random_partition(std::mt19937_64& rng, int n, double fill) {
  // Disjoint masks: each pixel goes to one of n labels or to nobody.
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<std::vector<int>> idx(n);
  // Blocky labels so overlaps are structured rather than salt-and-pepper.
  for (int r = 0; r < kGrid.rows; ++r)
    for (int c = 0; c < kGrid.cols; ++c)
      if (u(rng) < fill) idx[pick(rng)].push_back(kGrid.index(r, c));
  std::vector<Mask> out;
  for (auto& v : idx)
    if (!v.empty()) out.emplace_back(kGrid, v);
  return out;
}

}  // namespace

TEST_CASE("perfect prediction") {
  std::vector<Mask> gt{block(0, 0, 3, 3), block(5, 5, 2, 4), block(9, 0, 3, 12), block(0, 8, 2, 2)};
  SegEval e = evaluate(gt, gt);
  CHECK(e.osn_precision == 1.0);
  CHECK(e.osn_recall == 1.0);
  CHECK(e.osn_f == 1.0);
  CHECK(e.f == 1.0);
  CHECK(e.matching == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("disjoint prediction is unmatched") {
  std::vector<Mask> gt{block(0, 0, 3, 3)}, pred{block(6, 6, 2, 2), block(10, 10, 2, 2)};
  SegEval e = evaluate(pred, gt);
  CHECK(e.matching == std::vector<int>{-1, -1});
  CHECK(e.osn_f == 0.0);
  CHECK(e.f == 0.0);
}

TEST_CASE("merge of two equal objects") {
  // Two gt objects of k = 8 pixels, one prediction covering both.
  std::vector<Mask> gt{block(0, 0, 2, 4), block(2, 0, 2, 4)}, pred{block(0, 0, 4, 4)};
  const double p = 0.5, r = 1.0, f = 2 * p * r / (p + r);
  OsnScores o = osn_scores(pred, gt);
  CHECK(o.precision == doctest::Approx(p / 1).epsilon(1e-15));
  CHECK(o.recall == doctest::Approx(r / 2).epsilon(1e-15));
  CHECK(o.f == doctest::Approx(f / 2).epsilon(1e-15));
  CHECK(o.f == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  OsnScores px = pixel_scores(pred, gt);
  CHECK(px.f == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("split of one object into halves") {
  std::vector<Mask> gt{block(0, 0, 4, 4)}, pred{block(0, 0, 2, 4), block(2, 0, 2, 4)};
  OsnScores o = osn_scores(pred, gt);
  CHECK(o.f == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // Over- and under-segmentation are penalized symmetrically.
  CHECK(o.f == doctest::Approx(osn_scores(gt, pred).f).epsilon(1e-15));
}

TEST_CASE("empty prediction is flagged") {
  std::vector<Mask> gt{block(0, 0, 4, 4)};
  SegEval e = evaluate({}, gt);
  CHECK(e.empty);
  CHECK(e.osn_f == 0.0);
  CHECK(e.f == 0.0);
  CHECK(pixel_scores({}, gt).empty);
}

TEST_CASE("3x3 hand-built overlaps match brute force") {
  std::vector<Mask> gt{block(0, 0, 4, 4), block(0, 4, 4, 4), block(4, 0, 4, 8)};
  std::vector<Mask> pred{block(0, 0, 4, 6), block(0, 6, 6, 2), block(5, 0, 3, 5)};
  Brute b = brute_force(pred, gt);
  OsnScores o = osn_scores(pred, gt);
  CHECK(std::abs(o.f - b.best_f) < 1e-12);
}

TEST_CASE("optimal matching equals brute force on random instances") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> count(1, 6);
  for (int t = 0; t < 200; ++t) {
    auto gt = random_partition(rng, count(rng), 0.8);
    auto pred = random_partition(rng, count(rng), 0.8);
    if (gt.empty() || pred.empty()) continue;
    Brute b = brute_force(pred, gt);
    OsnScores o = osn_scores(pred, gt);
    CHECK(std::abs(o.f - b.best_f) < 1e-12);
    bool found = false;
    for (auto [p, r] : b.optima) found = found || (std::abs(p - o.precision) < 1e-12 && std::abs(r - o.recall) < 1e-12);
    CHECK(found);
  }
}

TEST_CASE("duality, permutation invariance and greedy bound") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> count(1, 6);
  for (int t = 0; t < 200; ++t) {
    auto gt = random_partition(rng, count(rng), 0.9);
    auto pred = random_partition(rng, count(rng), 0.9);
    if (gt.empty() || pred.empty()) continue;
    OsnScores a = osn_scores(pred, gt), b = osn_scores(gt, pred);
    CHECK(a.f == doctest::Approx(b.f).epsilon(1e-12));
    CHECK(a.precision == doctest::Approx(b.recall).epsilon(1e-12));
    CHECK(a.recall == doctest::Approx(b.precision).epsilon(1e-12));

    auto shuffled = pred;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(osn_scores(shuffled, gt).f == doctest::Approx(a.f).epsilon(1e-12));

    // Greedy: repeatedly take the best remaining pair.
    std::vector<int> greedy(pred.size(), -1);
    std::vector<bool> pu(pred.size()), gu(gt.size());
    while (true) {
      double best = 0;
      int bi = -1, bj = -1;
      for (std::size_t i = 0; i < pred.size(); ++i)
        for (std::size_t j = 0; j < gt.size(); ++j)
          if (!pu[i] && !gu[j] && pair_score(pred[i], gt[j]).f > best) {
            best = pair_score(pred[i], gt[j]).f;
            bi = static_cast<int>(i);
            bj = static_cast<int>(j);
          }
      if (bi < 0) break;
      greedy[bi] = bj;
      pu[bi] = gu[bj] = true;
    }
    CHECK(osn_scores(pred, gt, greedy).f <= a.f + 1e-12);
    for (double v : {a.precision, a.recall, a.f}) CHECK((v >= 0 && v <= 1));
  }
}

TEST_CASE("F_n is 1 exactly for identical segmentations") {
  std::vector<Mask> gt{block(0, 0, 4, 4), block(0, 4, 4, 4)};
  CHECK(osn_scores(gt, gt).f == 1.0);
  std::vector<Mask> off{block(0, 0, 4, 4), block(0, 4, 4, 3)};
  CHECK(osn_scores(off, gt).f < 1.0);
  std::vector<Mask> extra{block(0, 0, 4, 4), block(0, 4, 4, 4), block(8, 8, 1, 1)};
  CHECK(osn_scores(extra, gt).f < 1.0);
}

TEST_CASE("non-injective matchings are rejected") {
  std::vector<Mask> gt{block(0, 0, 4, 4)}, pred{block(0, 0, 2, 4), block(2, 0, 2, 4)};
  CHECK_THROWS(osn_scores(pred, gt, {0, 0}));
}
