#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "lsn/evalkit.hpp"

using namespace lsn;
using namespace lsn::evalkit;

namespace {

// Maximum bipartite matching (Kuhn's algorithm) as the independent oracle for
// the greedy matcher.
struct BipartiteOracle {
  std::vector<std::vector<int>> adj;  // pred -> candidate gt indices
  std::vector<int> match_gt;
  std::vector<char> used;

  bool try_kuhn(int p) {
    for (int gi : adj[static_cast<size_t>(p)]) {
      if (used[static_cast<size_t>(gi)]) continue;
      used[static_cast<size_t>(gi)] = 1;
      if (match_gt[static_cast<size_t>(gi)] < 0 || try_kuhn(match_gt[static_cast<size_t>(gi)])) {
        match_gt[static_cast<size_t>(gi)] = p;
        return true;
      }
    }
    return false;
  }

  int solve(int n_gt) {
    match_gt.assign(static_cast<size_t>(n_gt), -1);
    int total = 0;
    for (int p = 0; p < static_cast<int>(adj.size()); ++p) {
      used.assign(static_cast<size_t>(n_gt), 0);
      if (try_kuhn(p)) ++total;
    }
    return total;
  }
};

std::int64_t optimal_tp(const std::vector<std::uint8_t>& pred,
                        const std::vector<std::uint8_t>& gt, int h, int w, double tol) {
  std::vector<std::pair<int, int>> pp, gp;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (pred[static_cast<size_t>(y) * w + x]) pp.emplace_back(y, x);
      if (gt[static_cast<size_t>(y) * w + x]) gp.emplace_back(y, x);
    }
  BipartiteOracle o;
  o.adj.resize(pp.size());
  for (size_t pi = 0; pi < pp.size(); ++pi)
    for (size_t gi = 0; gi < gp.size(); ++gi) {
      const double dy = pp[pi].first - gp[gi].first, dx = pp[pi].second - gp[gi].second;
      if (dy * dy + dx * dx <= tol * tol) o.adj[pi].push_back(static_cast<int>(gi));
    }
  return o.solve(static_cast<int>(gp.size()));
}

int count_components_8(const std::vector<std::uint8_t>& m, int h, int w) {
  std::vector<char> seen(m.size(), 0);
  int comps = 0;
  for (size_t start = 0; start < m.size(); ++start) {
    if (!m[start] || seen[start]) continue;
    ++comps;
    std::vector<size_t> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      const size_t cur = stack.back();
      stack.pop_back();
      const int y = static_cast<int>(cur) / w, x = static_cast<int>(cur) % w;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const size_t ni = static_cast<size_t>(ny) * w + nx;
          if (m[ni] && !seen[ni]) {
            seen[ni] = 1;
            stack.push_back(ni);
          }
        }
    }
  }
  return comps;
}

std::vector<std::uint8_t> disc_mask(int h, int w, int cy, int cx, int r) {
  std::vector<std::uint8_t> m(static_cast<size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
        m[static_cast<size_t>(y) * w + x] = 1;
  return m;
}

}  // namespace

TEST_CASE("f_measure exact values") {
  CHECK(f_measure(0.5, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(f_measure(1.0, 1.0) == 1.0);
  CHECK(f_measure(0.0, 0.0) == 0.0);
  CHECK(f_measure(0.0, 1.0) == 0.0);
  CHECK(f_measure(0.25, 0.75) == doctest::Approx(2 * 0.25 * 0.75 / 1.0));
  CHECK_THROWS_AS(f_measure(-0.1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(f_measure(0.5, 1.2), std::invalid_argument);
}

TEST_CASE("thinning: subset, idempotent, unit width, connectivity on solid shapes") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 15; ++trial) {
    const int h = 24, w = 24;
    std::vector<std::uint8_t> m(static_cast<size_t>(h) * w, 0);
    const int blobs = 1 + static_cast<int>(rng() % 3);
    for (int b = 0; b < blobs; ++b) {
      const auto d = disc_mask(h, w, 4 + static_cast<int>(rng() % 16),
                               4 + static_cast<int>(rng() % 16), 3 + static_cast<int>(rng() % 3));
      for (size_t i = 0; i < m.size(); ++i) m[i] |= d[i];
    }
    const auto t = thin(m, h, w);
    // subset of the input
    for (size_t i = 0; i < m.size(); ++i)
      if (t[i]) CHECK(m[i] != 0);
    // idempotent
    CHECK(thin(t, h, w) == t);
    // unit width: no fully-set 2x2 block survives
    for (int y = 0; y + 1 < h; ++y)
      for (int x = 0; x + 1 < w; ++x) {
        const bool block = t[static_cast<size_t>(y) * w + x] && t[static_cast<size_t>(y) * w + x + 1] &&
                           t[static_cast<size_t>(y + 1) * w + x] && t[static_cast<size_t>(y + 1) * w + x + 1];
        CHECK(!block);
      }
    // 8-connectivity preserved for solid blobs of this size
    CHECK(count_components_8(t, h, w) == count_components_8(m, h, w));
  }
}

TEST_CASE("greedy matching equals the exact bipartite optimum at sub-pixel tolerance") {
  // with tolerance < 1 only coincident pixels can match, where greedy is
  // trivially optimal
  std::mt19937 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int h = 10, w = 10;
    std::vector<std::uint8_t> pred(100, 0), gt(100, 0);
    for (int k = 0; k < 12; ++k) {
      pred[rng() % 100] = 1;
      gt[rng() % 100] = 1;
    }
    const MatchCounts mc = match_counts(pred, gt, h, w, 0.5);
    CHECK(mc.tp == optimal_tp(pred, gt, h, w, 0.5));
  }
}

TEST_CASE("greedy matching is one-to-one and within the oracle optimum") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = 8, w = 8;
    std::vector<std::uint8_t> pred(64, 0), gt(64, 0);
    for (int k = 0; k < 8; ++k) {
      pred[rng() % 64] = 1;
      gt[rng() % 64] = 1;
    }
    const double tol = 1.0 + (rng() % 3);
    const MatchCounts mc = match_counts(pred, gt, h, w, tol);
    const std::int64_t best = optimal_tp(pred, gt, h, w, tol);
    std::int64_t np = 0, ng = 0;
    for (int i = 0; i < 64; ++i) {
      np += pred[static_cast<size_t>(i)];
      ng += gt[static_cast<size_t>(i)];
    }
    CHECK(mc.tp <= best);
    CHECK(best - mc.tp <= 2);  // greedy nearest-first stays near-optimal on small sets
    CHECK(mc.tp + mc.fp == np);
    CHECK(mc.tp + mc.fn == ng);
  }
}

TEST_CASE("matching tolerance boundary is inclusive") {
  std::vector<std::uint8_t> pred(9, 0), gt(9, 0);
  pred[0] = 1;  // (0,0)
  gt[2] = 1;    // (0,2), distance exactly 2
  CHECK(match_counts(pred, gt, 3, 3, 2.0).tp == 1);
  CHECK(match_counts(pred, gt, 3, 3, 1.999).tp == 0);
  CHECK_THROWS_AS(match_counts(pred, gt, 3, 3, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(match_counts(pred, std::vector<std::uint8_t>(4, 0), 3, 3, 1.0),
                  std::invalid_argument);
}

TEST_CASE("three-image toy set matches full manual enumeration") {
  // 3x3 images, single-pixel skeletons, exact-coincidence tolerance
  auto img = [](std::vector<float> prob, std::vector<std::uint8_t> gt) {
    EvalImage e;
    e.h = e.w = 3;
    e.prob = std::move(prob);
    e.gt = std::move(gt);
    return e;
  };
  std::vector<EvalImage> toy;
  toy.push_back(img({0, 0, 0, 0, 0.9f, 0, 0, 0, 0}, {0, 0, 0, 0, 1, 0, 0, 0, 0}));
  toy.push_back(img({0.6f, 0, 0, 0, 0.4f, 0, 0, 0, 0}, {0, 0, 0, 0, 1, 0, 0, 0, 0}));
  toy.push_back(img({0.7f, 0, 0, 0, 0, 0, 0, 0, 0.2f}, {1, 0, 0, 0, 0, 0, 0, 0, 1}));

  const std::vector<double> thresholds{0.1, 0.3, 0.5, 0.8};
  const auto points = pr_sweep(toy, thresholds, 0.0);
  const auto per_image = pr_sweep_per_image(toy, thresholds, 0.0);
  REQUIRE(points.size() == 4);

  // manual enumeration (binarize prob > t, exact matches only):
  // t=0.1: tp 4 fp 1 fn 0 ; t=0.3: tp 3 fp 1 fn 1
  // t=0.5: tp 2 fp 1 fn 2 ; t=0.8: tp 1 fp 0 fn 3
  const std::int64_t want_tp[] = {4, 3, 2, 1}, want_fp[] = {1, 1, 1, 0}, want_fn[] = {0, 1, 2, 3};
  for (int i = 0; i < 4; ++i) {
    CHECK(points[static_cast<size_t>(i)].tp == want_tp[i]);
    CHECK(points[static_cast<size_t>(i)].fp == want_fp[i]);
    CHECK(points[static_cast<size_t>(i)].fn == want_fn[i]);
  }

  const EvalReport rep = summarize(points, per_image);
  // ODS: best aggregated F is at t=0.1: P=4/5, R=1 -> F=8/9
  CHECK(rep.ods == doctest::Approx(8.0 / 9.0).epsilon(1e-9));
  CHECK(rep.best_threshold == doctest::Approx(0.1));
  CHECK(rep.f_measure == doctest::Approx(rep.ods));
  // OIS: per-image best F = 1, 2/3, 1 -> mean 8/9
  CHECK(rep.ois == doctest::Approx(8.0 / 9.0).epsilon(1e-9));
  CHECK(rep.ois >= rep.ods - 1e-12);
  // AP: recalls .25/.5/.75/1 with precisions 1, 2/3, 3/4, 4/5 plus the
  // recall-0 anchor at precision 1 -> 199/240
  CHECK(rep.ap == doctest::Approx(199.0 / 240.0).epsilon(1e-9));
}

TEST_CASE("perfect predictor scores ODS = OIS = AP = 1") {
  std::mt19937 rng(31);
  std::vector<EvalImage> ds;
  for (int i = 0; i < 3; ++i) {
    EvalImage e;
    e.h = e.w = 16;
    e.gt.assign(256, 0);
    for (int k = 0; k < 10; ++k) e.gt[rng() % 256] = 1;
    const auto gt_thin = thin(e.gt, 16, 16);
    e.gt = gt_thin;
    e.prob.resize(256);
    for (size_t j = 0; j < 256; ++j) e.prob[j] = e.gt[j] ? 1.0f : 0.0f;
    ds.push_back(std::move(e));
  }
  const auto ts = default_thresholds(99);
  const EvalReport rep = summarize(pr_sweep(ds, ts), pr_sweep_per_image(ds, ts));
  CHECK(rep.ods == doctest::Approx(1.0));
  CHECK(rep.ois == doctest::Approx(1.0));
  CHECK(rep.ap == doctest::Approx(1.0));
}

TEST_CASE("default thresholds are the 99 uniform interior points") {
  const auto ts = default_thresholds(99);
  REQUIRE(ts.size() == 99);
  CHECK(ts.front() == doctest::Approx(0.01));
  CHECK(ts.back() == doctest::Approx(0.99));
  CHECK(ts[49] == doctest::Approx(0.50));
}

TEST_CASE("report csv carries one row per threshold plus the summary line") {
  std::vector<EvalImage> ds(1);
  ds[0].h = ds[0].w = 4;
  ds[0].gt.assign(16, 0);
  ds[0].gt[5] = 1;
  ds[0].prob.assign(16, 0.0f);
  ds[0].prob[5] = 0.9f;
  const auto ts = default_thresholds(99);
  const EvalReport rep = summarize(pr_sweep(ds, ts), pr_sweep_per_image(ds, ts));
  const std::string csv = report_csv(rep);
  const size_t rows = static_cast<size_t>(std::count(csv.begin(), csv.end(), '\n'));
  CHECK(rows == 1 + 99 + 1);  // header + thresholds + summary
  CHECK(csv.find("ODS=") != std::string::npos);
  CHECK(csv.rfind("threshold,tp,fp,fn,precision,recall,f\n", 0) == 0);
}
