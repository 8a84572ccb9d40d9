#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "see/recurrent_head.hpp"

namespace see {

struct LabeledPrediction {
  PixelPoint gt;
  PixelPoint pred;
  bool valid = true;  // false excludes the sample (e.g. during a blink)
};

double euclidean(PixelPoint gt, PixelPoint pred);

/// Fraction of valid samples whose error is strictly below k pixels.
/// Throws ArgumentError when no sample is valid or k is not positive.
double pk_accuracy(std::span<const LabeledPrediction> samples, double k);

/// Mean error over valid samples. Throws ArgumentError when none is valid.
double mean_distance(std::span<const LabeledPrediction> samples);

std::size_t valid_count(std::span<const LabeledPrediction> samples);

/// "p5=<v> p10=<v> dist=<v> n=<count>" with one p-term per entry of `ks`.
std::string metric_report(std::span<const LabeledPrediction> samples, std::span<const double> ks);

struct IndexedPoint {
  long index = 0;
  PixelPoint point;
  bool valid = true;
};

/// Reads "clip_index,px,py[,valid]" rows; the header line is optional.
/// Throws ArgumentError naming the offending line.
std::vector<IndexedPoint> read_points_csv(std::istream& is);
void write_points_csv(std::ostream& os, std::span<const PixelPoint> points);

/// Pairs rows by clip index. Throws ArgumentError on duplicates or unmatched indices.
std::vector<LabeledPrediction> join_by_index(std::span<const IndexedPoint> pred, std::span<const IndexedPoint> gt);

}  // namespace see
