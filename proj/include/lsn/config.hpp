#pragma once

// Flat key=value run configuration. One key per line, '#' comments, unknown
// keys rejected, missing keys take the documented defaults. Serialization is
// canonical: parse(serialize(c)) == c and serialize is idempotent.

#include <string>

namespace lsn {

struct Config {
  int variant = 3;                    // LSN_k
  double width_multiplier = 1.0;
  double base_lr = 1e-6;
  double lr_multiplier = 100.0;       // from-scratch desk-scale boost
  double momentum = 0.9;
  double weight_decay = 0.002;
  int max_iters = 5000;
  unsigned seed = 1;
  std::string strategy = "end-to-end";  // or "iterative(n)"
  double tolerance_frac = 0.0075;
  int thresholds = 99;
  int lr_decay_period = 10000;
  int batch_size = 1;

  double effective_lr() const { return base_lr * lr_multiplier; }

  // "end-to-end" -> 0; "iterative(n)" -> n
  int iterative_phases() const;
  void validate() const;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);
std::string serialize_config(const Config& c);

// 32 hex chars over the canonical serialization.
std::string config_fingerprint(const Config& c);

}  // namespace lsn
