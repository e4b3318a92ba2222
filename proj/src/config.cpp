#include "lsn/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lsn {

int Config::iterative_phases() const {
  if (strategy == "end-to-end") return 0;
  int n = 0;
  if (std::sscanf(strategy.c_str(), "iterative(%d)", &n) == 1 && n >= 1) return n;
  throw std::invalid_argument("strategy must be \"end-to-end\" or \"iterative(n)\", got \"" +
                              strategy + "\"");
}

void Config::validate() const {
  if (variant < 1 || variant > 4)
    throw std::invalid_argument("variant must be in 1..4");
  if (momentum < 0 || momentum >= 1)
    throw std::invalid_argument("momentum must lie in [0,1)");
  if (weight_decay < 0) throw std::invalid_argument("weight_decay must be >= 0");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
  if (thresholds < 1) throw std::invalid_argument("thresholds must be >= 1");
  if (lr_decay_period < 1) throw std::invalid_argument("lr_decay_period must be >= 1");
  (void)iterative_phases();
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Config parse_config(const std::string& text) {
  Config c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value, got \"" + line + "\"");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const size_t b2 = s.find_first_not_of(" \t");
      const size_t e2 = s.find_last_not_of(" \t");
      s = b2 == std::string::npos ? "" : s.substr(b2, e2 - b2 + 1);
    };
    trim(key);
    trim(val);
    try {
      if (key == "variant") c.variant = std::stoi(val);
      else if (key == "width_multiplier") c.width_multiplier = std::stod(val);
      else if (key == "base_lr") c.base_lr = std::stod(val);
      else if (key == "lr_multiplier") c.lr_multiplier = std::stod(val);
      else if (key == "momentum") c.momentum = std::stod(val);
      else if (key == "weight_decay") c.weight_decay = std::stod(val);
      else if (key == "max_iters") c.max_iters = std::stoi(val);
      else if (key == "seed") c.seed = static_cast<unsigned>(std::stoul(val));
      else if (key == "strategy") c.strategy = val;
      else if (key == "tolerance_frac") c.tolerance_frac = std::stod(val);
      else if (key == "thresholds") c.thresholds = std::stoi(val);
      else if (key == "lr_decay_period") c.lr_decay_period = std::stoi(val);
      else if (key == "batch_size") c.batch_size = std::stoi(val);
      else
        throw std::invalid_argument("unknown key \"" + key + "\"");
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const Config& c) {
  std::ostringstream os;
  os << "variant=" << c.variant << "\n"
     << "width_multiplier=" << fmt_double(c.width_multiplier) << "\n"
     << "base_lr=" << fmt_double(c.base_lr) << "\n"
     << "lr_multiplier=" << fmt_double(c.lr_multiplier) << "\n"
     << "momentum=" << fmt_double(c.momentum) << "\n"
     << "weight_decay=" << fmt_double(c.weight_decay) << "\n"
     << "max_iters=" << c.max_iters << "\n"
     << "seed=" << c.seed << "\n"
     << "strategy=" << c.strategy << "\n"
     << "tolerance_frac=" << fmt_double(c.tolerance_frac) << "\n"
     << "thresholds=" << c.thresholds << "\n"
     << "lr_decay_period=" << c.lr_decay_period << "\n"
     << "batch_size=" << c.batch_size << "\n";
  return os.str();
}

std::string config_fingerprint(const Config& c) {
  const std::string s = serialize_config(c);
  auto fnv = [&](std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    return h;
  };
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(fnv(0xcbf29ce484222325ULL)),
                static_cast<unsigned long long>(fnv(0x9e3779b97f4a7c15ULL)));
  return std::string(buf, 32);
}

}  // namespace lsn
