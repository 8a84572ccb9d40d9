#include "see/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "see/errors.hpp"

namespace see {

double euclidean(PixelPoint gt, PixelPoint pred) { return std::hypot(gt.x - pred.x, gt.y - pred.y); }

std::size_t valid_count(std::span<const LabeledPrediction> samples) {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.valid ? 1 : 0;
  return n;
}

double pk_accuracy(std::span<const LabeledPrediction> samples, double k) {
  if (!(k > 0)) throw ArgumentError("k must be positive");
  const std::size_t n = valid_count(samples);
  if (n == 0) throw ArgumentError("pk_accuracy needs at least one valid sample");
  std::size_t hit = 0;
  for (const auto& s : samples)
    if (s.valid && euclidean(s.gt, s.pred) < k) ++hit;
  return static_cast<double>(hit) / static_cast<double>(n);
}

double mean_distance(std::span<const LabeledPrediction> samples) {
  const std::size_t n = valid_count(samples);
  if (n == 0) throw ArgumentError("mean_distance needs at least one valid sample");
  double sum = 0.0;
  for (const auto& s : samples)
    if (s.valid) sum += euclidean(s.gt, s.pred);
  return sum / static_cast<double>(n);
}

std::string metric_report(std::span<const LabeledPrediction> samples, std::span<const double> ks) {
  std::string out;
  char buf[64];
  for (const double k : ks) {
    if (k == std::floor(k))
      std::snprintf(buf, sizeof buf, "p%.0f=%.6f ", k, pk_accuracy(samples, k));
    else
      std::snprintf(buf, sizeof buf, "p%g=%.6f ", k, pk_accuracy(samples, k));
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "dist=%.6f n=%zu", mean_distance(samples), valid_count(samples));
  return out + buf;
}

std::vector<IndexedPoint> read_points_csv(std::istream& is) {
  std::vector<IndexedPoint> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("clip_index", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, ',');) f.push_back(field);
    const std::string where = "line " + std::to_string(line_no);
    if (f.size() < 3 || f.size() > 4) throw ArgumentError(where + ": expected clip_index,px,py[,valid]");
    char* end = nullptr;
    IndexedPoint p;
    p.index = std::strtol(f[0].c_str(), &end, 10);
    if (f[0].empty() || *end != '\0' || p.index < 0) throw ArgumentError(where + ": bad clip_index");
    p.point.x = std::strtod(f[1].c_str(), &end);
    if (f[1].empty() || *end != '\0') throw ArgumentError(where + ": bad px");
    p.point.y = std::strtod(f[2].c_str(), &end);
    if (f[2].empty() || *end != '\0') throw ArgumentError(where + ": bad py");
    if (!std::isfinite(p.point.x) || !std::isfinite(p.point.y) || p.point.x < 0 || p.point.y < 0)
      throw ArgumentError(where + ": coordinates must be finite and non-negative");
    if (f.size() == 4) {
      if (f[3] != "0" && f[3] != "1") throw ArgumentError(where + ": valid must be 0 or 1");
      p.valid = f[3] == "1";
    }
    out.push_back(p);
  }
  return out;
}

void write_points_csv(std::ostream& os, std::span<const PixelPoint> points) {
  os << "clip_index,px,py\n";
  char buf[96];
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", i, points[i].x, points[i].y);
    os << buf;
  }
}

std::vector<LabeledPrediction> join_by_index(std::span<const IndexedPoint> pred, std::span<const IndexedPoint> gt) {
  std::map<long, const IndexedPoint*> by_index;
  for (const auto& g : gt)
    if (!by_index.emplace(g.index, &g).second)
      throw ArgumentError("ground truth repeats clip_index " + std::to_string(g.index));
  if (pred.size() != gt.size())
    throw ArgumentError("prediction has " + std::to_string(pred.size()) + " rows, ground truth " +
                        std::to_string(gt.size()));
  std::vector<LabeledPrediction> out;
  std::map<long, bool> used;
  for (const auto& p : pred) {
    const auto it = by_index.find(p.index);
    if (it == by_index.end()) throw ArgumentError("clip_index " + std::to_string(p.index) + " has no ground truth");
    if (used[p.index]) throw ArgumentError("prediction repeats clip_index " + std::to_string(p.index));
    used[p.index] = true;
    out.push_back({it->second->point, p.point, it->second->valid && p.valid});
  }
  return out;
}

}  // namespace see
