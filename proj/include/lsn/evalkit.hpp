#pragma once

// Skeleton benchmark protocol: threshold sweep over probability maps,
// morphological thinning, distance-tolerant point matching, PR aggregation
// and the ODS / OIS / AP summaries.

#include <cstdint>
#include <string>
#include <vector>

#include "lsn/tensor.hpp"

namespace lsn::evalkit {

struct PRPoint {
  double threshold = 0;
  std::int64_t tp = 0, fp = 0, fn = 0;
  double precision = 1, recall = 1;
};

struct EvalReport {
  std::vector<PRPoint> points;  // dataset-aggregated, ascending threshold
  double best_threshold = 0;
  double f_measure = 0;  // F at the best aggregated point (= ODS)
  double ods = 0, ois = 0, ap = 0;
};

// 2pr/(p+r), 0 when p + r == 0.
double f_measure(double p, double r);

// Iterative 8-connectivity-preserving thinning to unit-width curves.
std::vector<std::uint8_t> thin(const std::vector<std::uint8_t>& mask, int h, int w);

struct MatchCounts {
  std::int64_t tp = 0, fp = 0, fn = 0;
};

// One-to-one greedy nearest matching within Euclidean distance tol_px.
MatchCounts match_counts(const std::vector<std::uint8_t>& pred,
                         const std::vector<std::uint8_t>& gt, int h, int w,
                         double tol_px);

struct EvalImage {
  std::vector<float> prob;      // probability map, row-major
  std::vector<std::uint8_t> gt; // binary mask
  int h = 0, w = 0;
};

// 99 uniform thresholds 0.01..0.99.
std::vector<double> default_thresholds(int count = 99);

// Per threshold: binarize (score > t), thin both operands, match, aggregate.
// tol_frac scales the per-image diagonal into the matching tolerance.
std::vector<PRPoint> pr_sweep(const std::vector<EvalImage>& dataset,
                              const std::vector<double>& thresholds,
                              double tol_frac = 0.0075);

// Same sweep but per image, for the OIS summary.
std::vector<std::vector<PRPoint>> pr_sweep_per_image(const std::vector<EvalImage>& dataset,
                                                     const std::vector<double>& thresholds,
                                                     double tol_frac = 0.0075);

EvalReport summarize(const std::vector<PRPoint>& points,
                     const std::vector<std::vector<PRPoint>>& per_image_points);

std::string report_csv(const EvalReport& report);

}  // namespace lsn::evalkit
