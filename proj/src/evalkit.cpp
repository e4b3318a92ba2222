#include "lsn/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lsn::evalkit {

double f_measure(double p, double r) {
  if (p < 0 || p > 1 || r < 0 || r > 1)
    throw std::invalid_argument("f_measure: precision and recall must lie in [0,1]");
  if (p + r == 0) return 0;
  return 2 * p * r / (p + r);
}

// Zhang-Suen thinning.
std::vector<std::uint8_t> thin(const std::vector<std::uint8_t>& mask, int h, int w) {
  std::vector<std::uint8_t> m(mask);
  for (auto& v : m) v = v ? 1 : 0;
  auto at = [&](int y, int x) -> int {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0;
    return m[static_cast<size_t>(y) * w + x];
  };
  std::vector<size_t> kill;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      kill.clear();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!at(y, x)) continue;
          const int p2 = at(y - 1, x), p3 = at(y - 1, x + 1), p4 = at(y, x + 1),
                    p5 = at(y + 1, x + 1), p6 = at(y + 1, x), p7 = at(y + 1, x - 1),
                    p8 = at(y, x - 1), p9 = at(y - 1, x - 1);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (b < 2 || b > 6) continue;
          const int ring[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
          int a = 0;
          for (int i = 0; i < 8; ++i)
            if (ring[i] == 0 && ring[i + 1] == 1) ++a;
          if (a != 1) continue;
          if (pass == 0) {
            if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
          }
          kill.push_back(static_cast<size_t>(y) * w + x);
        }
      for (size_t i : kill) m[i] = 0;
      if (!kill.empty()) changed = true;
    }
  }
  return m;
}

MatchCounts match_counts(const std::vector<std::uint8_t>& pred,
                         const std::vector<std::uint8_t>& gt, int h, int w,
                         double tol_px) {
  if (pred.size() != gt.size() || pred.size() != static_cast<size_t>(h) * w)
    throw std::invalid_argument("match_counts: operand dims disagree");
  if (tol_px < 0) throw std::invalid_argument("match_counts: tolerance must be >= 0");

  std::vector<std::pair<int, int>> pp, gp;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (pred[static_cast<size_t>(y) * w + x]) pp.emplace_back(y, x);
      if (gt[static_cast<size_t>(y) * w + x]) gp.emplace_back(y, x);
    }

  struct Cand {
    double d2;
    int pi, gi;
  };
  std::vector<Cand> cands;
  const double tol2 = tol_px * tol_px;
  for (int pi = 0; pi < static_cast<int>(pp.size()); ++pi)
    for (int gi = 0; gi < static_cast<int>(gp.size()); ++gi) {
      const double dy = pp[pi].first - gp[gi].first;
      const double dx = pp[pi].second - gp[gi].second;
      const double d2 = dy * dy + dx * dx;
      if (d2 <= tol2) cands.push_back({d2, pi, gi});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.pi != b.pi) return a.pi < b.pi;
    return a.gi < b.gi;
  });

  std::vector<char> pused(pp.size(), 0), gused(gp.size(), 0);
  MatchCounts mc;
  for (const Cand& c : cands) {
    if (pused[static_cast<size_t>(c.pi)] || gused[static_cast<size_t>(c.gi)]) continue;
    pused[static_cast<size_t>(c.pi)] = gused[static_cast<size_t>(c.gi)] = 1;
    ++mc.tp;
  }
  mc.fp = static_cast<std::int64_t>(pp.size()) - mc.tp;
  mc.fn = static_cast<std::int64_t>(gp.size()) - mc.tp;
  return mc;
}

std::vector<double> default_thresholds(int count) {
  std::vector<double> t;
  for (int i = 1; i <= count; ++i) t.push_back(i / static_cast<double>(count + 1));
  return t;
}

namespace {

PRPoint make_point(double threshold, std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  PRPoint p;
  p.threshold = threshold;
  p.tp = tp;
  p.fp = fp;
  p.fn = fn;
  p.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  p.recall = (tp + fn) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  return p;
}

MatchCounts eval_one(const EvalImage& img, double threshold, double tol_frac,
                     const std::vector<std::uint8_t>& gt_thin) {
  std::vector<std::uint8_t> bin(img.prob.size());
  for (size_t i = 0; i < bin.size(); ++i)
    bin[i] = img.prob[i] > threshold ? 1 : 0;
  const std::vector<std::uint8_t> pred = thin(bin, img.h, img.w);
  const double tol = tol_frac * std::hypot(img.h, img.w);
  return match_counts(pred, gt_thin, img.h, img.w, tol);
}

}  // namespace

std::vector<PRPoint> pr_sweep(const std::vector<EvalImage>& dataset,
                              const std::vector<double>& thresholds,
                              double tol_frac) {
  for (size_t i = 1; i < thresholds.size(); ++i)
    if (thresholds[i] < thresholds[i - 1])
      throw std::invalid_argument("pr_sweep: thresholds must be sorted ascending");
  std::vector<PRPoint> out(thresholds.size());
  std::vector<std::vector<std::uint8_t>> gt_thin;
  gt_thin.reserve(dataset.size());
  for (const auto& img : dataset) gt_thin.push_back(thin(img.gt, img.h, img.w));

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t ti = 0; ti < static_cast<std::int64_t>(thresholds.size()); ++ti) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < dataset.size(); ++i) {
      const MatchCounts mc = eval_one(dataset[i], thresholds[static_cast<size_t>(ti)],
                                      tol_frac, gt_thin[i]);
      tp += mc.tp;
      fp += mc.fp;
      fn += mc.fn;
    }
    out[static_cast<size_t>(ti)] = make_point(thresholds[static_cast<size_t>(ti)], tp, fp, fn);
  }
  return out;
}

std::vector<std::vector<PRPoint>> pr_sweep_per_image(const std::vector<EvalImage>& dataset,
                                                     const std::vector<double>& thresholds,
                                                     double tol_frac) {
  std::vector<std::vector<PRPoint>> out(dataset.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(dataset.size()); ++i) {
    const auto& img = dataset[static_cast<size_t>(i)];
    const auto gt_thin = thin(img.gt, img.h, img.w);
    for (double t : thresholds) {
      const MatchCounts mc = eval_one(img, t, tol_frac, gt_thin);
      out[static_cast<size_t>(i)].push_back(make_point(t, mc.tp, mc.fp, mc.fn));
    }
  }
  return out;
}

EvalReport summarize(const std::vector<PRPoint>& points,
                     const std::vector<std::vector<PRPoint>>& per_image_points) {
  if (points.empty()) throw std::invalid_argument("summarize: empty sweep");
  EvalReport r;
  r.points = points;
  for (const PRPoint& p : points) {
    const double f = f_measure(p.precision, p.recall);
    if (f > r.ods) {
      r.ods = f;
      r.best_threshold = p.threshold;
    }
  }
  r.f_measure = r.ods;

  double ois_sum = 0;
  for (const auto& image : per_image_points) {
    double best = 0;
    for (const PRPoint& p : image) best = std::max(best, f_measure(p.precision, p.recall));
    ois_sum += best;
  }
  r.ois = per_image_points.empty() ? 0 : ois_sum / static_cast<double>(per_image_points.size());

  // AP: trapezoidal integral of precision over recall. The sweep yields
  // recall decreasing with threshold; integrate over the sorted recall axis.
  std::vector<std::pair<double, double>> rp;  // (recall, precision)
  for (const PRPoint& p : points) rp.emplace_back(p.recall, p.precision);
  std::sort(rp.begin(), rp.end());
  // Anchor the curve at recall 0 with the lowest-recall precision so a
  // degenerate sweep (all points at the same recall) still integrates to
  // that precision rather than zero.
  rp.insert(rp.begin(), {0.0, rp.front().second});
  double ap = 0;
  for (size_t i = 1; i < rp.size(); ++i)
    ap += (rp[i].first - rp[i - 1].first) * 0.5 * (rp[i].second + rp[i - 1].second);
  r.ap = ap;
  return r;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "threshold,tp,fp,fn,precision,recall,f\n";
  os.precision(9);
  for (const PRPoint& p : report.points)
    os << p.threshold << "," << p.tp << "," << p.fp << "," << p.fn << "," << p.precision << ","
       << p.recall << "," << f_measure(p.precision, p.recall) << "\n";
  os << "ODS=" << report.ods << ",OIS=" << report.ois << ",AP=" << report.ap << "\n";
  return os.str();
}

}  // namespace lsn::evalkit
