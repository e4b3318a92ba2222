#pragma once

// The 64-bit finite-difference verification suite: one small randomized
// graph per primitive op plus a full miniature LSN_3, each checked against
// central finite differences.

#include <string>
#include <vector>

namespace lsn {

struct GradCheckEntry {
  std::string op;
  double worst_rel_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst() const;
  bool ok(double tol = 1e-4) const;
};

// corrupt_backward deliberately breaks one backward rule, as a negative
// control proving the checker catches it.
GradCheckReport run_gradcheck_suite(unsigned seed, bool corrupt_backward = false);

}  // namespace lsn
