#include "uncseg/metrics.hpp"

#include "uncseg/assignment.hpp"
#include "uncseg/error.hpp"

namespace uncseg {

namespace {

double harmonic(double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; }

void check_matching(const std::vector<Mask>& pred, const std::vector<Mask>& gt,
                    const std::vector<int>& matching) {
  if (matching.size() != pred.size()) throw Error("matching size does not match predictions");
  std::vector<bool> used(gt.size(), false);
  for (int j : matching) {
    if (j < 0) continue;
    if (j >= static_cast<int>(gt.size()) || used[j]) throw Error("matching is not injective");
    used[j] = true;
  }
}

}  // namespace

PairScore pair_score(const Mask& pred, const Mask& gt) {
  if (pred.shape() != gt.shape()) throw Error("masks are on different grids");
  PairScore s;
  const double inter = static_cast<double>(intersection_size(pred, gt));
  if (inter == 0) return s;
  s.precision = inter / pred.size();
  s.recall = inter / gt.size();
  s.f = harmonic(s.precision, s.recall);
  return s;
}

std::vector<int> match_segments(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  const int rows = static_cast<int>(pred.size()), cols = static_cast<int>(gt.size());
  std::vector<int> out(rows, -1);
  if (rows == 0 || cols == 0) return out;
  std::vector<double> w(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) w[i * cols + j] = pair_score(pred[i], gt[j]).f;
  out = max_weight_assignment(w, rows, cols);
  for (int i = 0; i < rows; ++i)
    if (out[i] >= 0 && w[i * cols + out[i]] == 0.0) out[i] = -1;
  return out;
}

OsnScores osn_scores(const std::vector<Mask>& pred, const std::vector<Mask>& gt,
                     const std::vector<int>& matching) {
  check_matching(pred, gt, matching);
  OsnScores s;
  if (pred.empty() || gt.empty()) {
    s.empty = true;
    return s;
  }
  double sp = 0, sr = 0, sf = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (matching[i] < 0) continue;
    const PairScore ps = pair_score(pred[i], gt[matching[i]]);
    sp += ps.precision;
    sr += ps.recall;
    sf += ps.f;
  }
  const double ns = static_cast<double>(pred.size()), ng = static_cast<double>(gt.size());
  s.precision = sp / ns;
  s.recall = sr / ng;
  s.f = sf / std::max(ns, ng);
  return s;
}

OsnScores osn_scores(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  return osn_scores(pred, gt, match_segments(pred, gt));
}

OsnScores pixel_scores(const std::vector<Mask>& pred, const std::vector<Mask>& gt,
                       const std::vector<int>& matching) {
  check_matching(pred, gt, matching);
  OsnScores s;
  double tp = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (matching[i] < 0) continue;
    tp += static_cast<double>(intersection_size(pred[i], gt[matching[i]]));
    np += static_cast<double>(pred[i].size());
    ng += static_cast<double>(gt[matching[i]].size());
  }
  if (np == 0 || ng == 0) {
    s.empty = true;
    return s;
  }
  s.precision = tp / np;
  s.recall = tp / ng;
  s.f = harmonic(s.precision, s.recall);
  return s;
}

OsnScores pixel_scores(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  return pixel_scores(pred, gt, match_segments(pred, gt));
}

SegEval evaluate(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  SegEval e;
  e.matching = match_segments(pred, gt);
  const OsnScores o = osn_scores(pred, gt, e.matching);
  const OsnScores p = pixel_scores(pred, gt, e.matching);
  e.osn_precision = o.precision;
  e.osn_recall = o.recall;
  e.osn_f = o.f;
  e.precision = p.precision;
  e.recall = p.recall;
  e.f = p.f;
  e.empty = o.empty;
  return e;
}

}  // namespace uncseg
