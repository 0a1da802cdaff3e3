#include "rt2v/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "rt2v/error.hpp"

namespace rt2v {

namespace {

void require_ranks(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw Error(ErrorKind::kInvalidArgument, "rank list is empty");
  for (auto r : ranks) {
    if (r == 0) throw Error(ErrorKind::kInvalidArgument, "ranks are 1-based");
  }
}

void require_same_shape(const MaskBitmap& a, const MaskBitmap& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorKind::kDimensionMismatch, "mask dimensions differ");
  }
}

}  // namespace

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  require_ranks(ranks);
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "K must be >= 1");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double median_rank(std::span<const std::size_t> ranks) {
  require_ranks(ranks);
  std::vector<std::size_t> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return static_cast<double>(sorted[n / 2]);
  return (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2])) / 2.0;
}

double mean_rank(std::span<const std::size_t> ranks) {
  require_ranks(ranks);
  const double total = std::accumulate(ranks.begin(), ranks.end(), 0.0,
                                       [](double acc, std::size_t r) { return acc + static_cast<double>(r); });
  return total / static_cast<double>(ranks.size());
}

double ap_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  require_ranks(ranks);
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "K must be >= 1");
  double total = 0.0;
  for (auto r : ranks) {
    if (r <= k) total += 1.0 / static_cast<double>(r);
  }
  return total / static_cast<double>(ranks.size());
}

double mean_average_precision(std::span<const std::size_t> ranks, std::span<const std::size_t> ks) {
  if (ks.empty()) throw Error(ErrorKind::kInvalidArgument, "K set is empty");
  double total = 0.0;
  for (auto k : ks) total += ap_at_k(ranks, k);
  return total / static_cast<double>(ks.size());
}

double region_similarity(const MaskBitmap& pred, const MaskBitmap& gt) {
  require_same_shape(pred, gt);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    const bool a = pred.bits[i] != 0, b = gt.bits[i] != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::uint32_t default_boundary_tolerance(std::uint32_t width, std::uint32_t height) {
  const double diag = std::hypot(static_cast<double>(width), static_cast<double>(height));
  return static_cast<std::uint32_t>(std::ceil(0.008 * diag));
}

MaskBitmap boundary_map(const MaskBitmap& mask) {
  MaskBitmap out(mask.width, mask.height);
  for (std::uint32_t y = 0; y < mask.height; ++y) {
    for (std::uint32_t x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x + 1 == mask.width || y + 1 == mask.height;
      if (edge || !mask.at(x - 1, y) || !mask.at(x + 1, y) || !mask.at(x, y - 1) ||
          !mask.at(x, y + 1)) {
        out.set(x, y);
      }
    }
  }
  return out;
}

namespace {

// Fraction of `from` boundary pixels with a `to` boundary pixel inside the
// tolerance disc, probing only the disc's bounding window.
double matched_fraction(const MaskBitmap& from, const MaskBitmap& to, std::uint32_t tol) {
  std::vector<std::pair<int, int>> disc;
  const int t = static_cast<int>(tol);
  const long long t2 = static_cast<long long>(t) * t;
  for (int dy = -t; dy <= t; ++dy) {
    for (int dx = -t; dx <= t; ++dx) {
      if (static_cast<long long>(dx) * dx + static_cast<long long>(dy) * dy <= t2) {
        disc.emplace_back(dx, dy);
      }
    }
  }
  const int w = static_cast<int>(from.width), h = static_cast<int>(from.height);
  std::size_t total = 0, matched = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!from.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y))) continue;
      ++total;
      for (auto [dx, dy] : disc) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        if (to.at(static_cast<std::uint32_t>(nx), static_cast<std::uint32_t>(ny))) {
          ++matched;
          break;
        }
      }
    }
  }
  return static_cast<double>(matched) / static_cast<double>(total);
}

}  // namespace

double contour_accuracy(const MaskBitmap& pred, const MaskBitmap& gt,
                        std::optional<std::uint32_t> tolerance_px) {
  require_same_shape(pred, gt);
  const std::uint32_t tol = tolerance_px.value_or(default_boundary_tolerance(gt.width, gt.height));
  const MaskBitmap bp = boundary_map(pred);
  const MaskBitmap bg = boundary_map(gt);
  const bool pred_empty = bp.count() == 0, gt_empty = bg.count() == 0;
  if (pred_empty && gt_empty) return 1.0;
  if (pred_empty || gt_empty) return 0.0;
  const double precision = matched_fraction(bp, bg, tol);
  const double recall = matched_fraction(bg, bp, tol);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

JfScore video_jf(const MaskSet& pred, const MaskSet& gt) {
  if (gt.empty()) return {1.0, 1.0};
  double j = 0.0, f = 0.0;
  for (const auto& [key, truth] : gt) {
    auto it = pred.find(key);
    if (it == pred.end()) continue;
    j += region_similarity(it->second, truth);
    f += contour_accuracy(it->second, truth);
  }
  const double n = static_cast<double>(gt.size());
  return {j / n, f / n};
}

MetricReport compute_report(std::span<const QueryOutcome> outcomes, std::span<const std::size_t> ks) {
  if (outcomes.empty()) throw Error(ErrorKind::kInvalidArgument, "no query outcomes");
  MetricReport r;
  r.ks.assign(ks.begin(), ks.end());
  std::vector<std::size_t> ranks;
  double j_total = 0.0, f_total = 0.0;
  for (const auto& o : outcomes) {
    ranks.push_back(o.rank);
    const JfScore jf = video_jf(o.predicted, o.ground_truth);
    j_total += jf.j;
    f_total += jf.f;
    r.queries.push_back({o.query_id, o.rank, jf.j, jf.f});
  }
  for (auto k : ks) {
    r.recall.push_back(recall_at_k(ranks, k));
    r.ap.push_back(ap_at_k(ranks, k));
  }
  r.median_rank = median_rank(ranks);
  r.mean_rank = mean_rank(ranks);
  r.map = mean_average_precision(ranks, ks);
  r.mean_j = j_total / static_cast<double>(outcomes.size());
  r.mean_f = f_total / static_cast<double>(outcomes.size());
  return r;
}

json MetricReport::to_json() const {
  json recall_doc = json::object(), ap_doc = json::object();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    recall_doc["R@" + std::to_string(ks[i])] = recall[i];
    ap_doc["AP@" + std::to_string(ks[i])] = ap[i];
  }
  json rows = json::array();
  for (const auto& q : queries) {
    rows.push_back({{"query_id", q.query_id}, {"rank", q.rank}, {"J", q.j}, {"F", q.f}});
  }
  return {{"ks", ks},          {"recall", recall_doc}, {"average_precision", ap_doc},
          {"MdR", median_rank}, {"MnR", mean_rank},    {"mAP", map},
          {"J", mean_j},       {"F", mean_f},          {"queries", rows}};
}

namespace {

std::string fixed(double v, int precision) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(precision) << v;
  return ss.str();
}

std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += "  ";
      out += std::string(widths[c] - row[c].size(), ' ') + row[c];
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string MetricReport::to_table() const {
  std::vector<std::string> head, vals;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    head.push_back("R@" + std::to_string(ks[i]));
    vals.push_back(fixed(100.0 * recall[i], 1));
  }
  head.insert(head.end(), {"MdR", "MnR"});
  vals.insert(vals.end(), {fixed(median_rank, 1), fixed(mean_rank, 1)});
  for (std::size_t i = 0; i < ks.size(); ++i) {
    head.push_back("AP@" + std::to_string(ks[i]));
    vals.push_back(fixed(100.0 * ap[i], 1));
  }
  head.insert(head.end(), {"mAP", "J", "F"});
  vals.insert(vals.end(), {fixed(100.0 * map, 1), fixed(100.0 * mean_j, 1), fixed(100.0 * mean_f, 1)});

  std::string out = render_rows({head, vals});
  std::vector<std::vector<std::string>> rows = {{"query_id", "rank", "J", "F"}};
  for (const auto& q : queries) {
    rows.push_back({q.query_id, std::to_string(q.rank), fixed(q.j, 3), fixed(q.f, 3)});
  }
  out += '\n';
  out += render_rows(rows);
  return out;
}

}  // namespace rt2v
