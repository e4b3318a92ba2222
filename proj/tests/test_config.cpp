#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lsn/config.hpp"

using namespace lsn;

TEST_CASE("defaults") {
  const Config c;
  CHECK(c.variant == 3);
  CHECK(c.base_lr == doctest::Approx(1e-6));
  CHECK(c.momentum == doctest::Approx(0.9));
  CHECK(c.weight_decay == doctest::Approx(0.002));
  CHECK(c.max_iters == 5000);
  CHECK(c.batch_size == 1);
  CHECK(c.lr_decay_period == 10000);
  CHECK(c.strategy == "end-to-end");
  CHECK(c.iterative_phases() == 0);
}

TEST_CASE("parse, comments, and round trip") {
  const Config c = parse_config(
      "# comment\n"
      "variant=2\n"
      "width_multiplier=0.5\n"
      "\n"
      "strategy=iterative(2)\n"
      "seed=42\n");
  CHECK(c.variant == 2);
  CHECK(c.width_multiplier == doctest::Approx(0.5));
  CHECK(c.seed == 42);
  CHECK(c.iterative_phases() == 2);
  // defaults survive a partial file
  CHECK(c.momentum == doctest::Approx(0.9));

  const std::string s = serialize_config(c);
  const Config back = parse_config(s);
  CHECK(serialize_config(back) == s);  // canonical / idempotent
  CHECK(back.variant == c.variant);
  CHECK(back.seed == c.seed);
  CHECK(back.strategy == c.strategy);
}

TEST_CASE("unknown key names its line") {
  CHECK_THROWS_WITH_AS(parse_config("variant=1\nbogus_key=3\n"), doctest::Contains("line 2"),
                       std::invalid_argument);
}

TEST_CASE("malformed values rejected") {
  CHECK_THROWS_AS(parse_config("variant=banana\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("just_a_token\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("variant=7\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("strategy=iterative(0)\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("momentum=1.5\n"), std::invalid_argument);
}

TEST_CASE("fingerprint is stable and sensitive") {
  Config a, b;
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  CHECK(config_fingerprint(a).size() == 32);
  for (char ch : config_fingerprint(a)) CHECK(std::isxdigit(static_cast<unsigned char>(ch)));
  b.seed = 2;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
}
