#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lsn/kernels.hpp"
#include "lsn/lsu.hpp"
#include "lsn/model.hpp"

using namespace lsn;

namespace {

TensorF rand_image(Shape s, unsigned seed) {
  TensorF t(s);
  std::mt19937 rng(seed);
  for (auto& v : t.data) v = static_cast<float>(rng() / 4294967296.0);
  return t;
}

}  // namespace

TEST_CASE("fusion group enumeration per variant") {
  CHECK(fusion_groups(1).empty());

  const auto g2 = fusion_groups(2);
  REQUIRE(g2.size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(g2[i].center == static_cast<int>(i) + 1);
    CHECK(g2[i].members == std::vector<int>{static_cast<int>(i) + 1, static_cast<int>(i) + 2});
    CHECK(g2[i].out_level == static_cast<int>(i) + 1);
  }

  const auto g3 = fusion_groups(3);
  REQUIRE(g3.size() == 5);
  CHECK(g3[0].members == std::vector<int>{1, 2});        // truncated at the shallow end
  CHECK(g3[1].members == std::vector<int>{1, 2, 3});
  CHECK(g3[2].members == std::vector<int>{2, 3, 4});
  CHECK(g3[3].members == std::vector<int>{3, 4, 5});
  CHECK(g3[4].members == std::vector<int>{4, 5});        // truncated at the deep end
  for (const auto& fg : g3) CHECK(fg.out_level == fg.members.front());

  const auto g4 = fusion_groups(4);
  REQUIRE(g4.size() == 5);
  CHECK(g4[0].members == std::vector<int>{1, 2, 3});
  CHECK(g4[1].members == std::vector<int>{1, 2, 3, 4});
  CHECK(g4[2].members == std::vector<int>{2, 3, 4, 5});
  CHECK(g4[3].members == std::vector<int>{3, 4, 5});
  CHECK(g4[4].members == std::vector<int>{4, 5});

  CHECK_THROWS_AS(fusion_groups(0), std::invalid_argument);
  CHECK_THROWS_AS(fusion_groups(5), std::invalid_argument);
}

TEST_CASE("variant specs and parameter-count ordering") {
  for (int k = 1; k <= 4; ++k) {
    const NetworkSpec spec = build_variant(k, 0.5);
    CHECK(spec.variant == k);
    REQUIRE(spec.stages.size() == 5);
    CHECK(!spec.stages[0].pooled);
    for (int s = 1; s < 5; ++s) CHECK(spec.stages[static_cast<size_t>(s)].pooled);
  }
  const std::int64_t p1 = param_count(build_variant(1));
  const std::int64_t p2 = param_count(build_variant(2));
  const std::int64_t p3 = param_count(build_variant(3));
  const std::int64_t p4 = param_count(build_variant(4));
  CHECK(p1 < p2);
  CHECK(p2 < p3);
  CHECK(p3 < p4);
  CHECK_THROWS_AS(build_variant(0), std::invalid_argument);

  // the width multiplier shrinks every stage but never below one channel
  const NetworkSpec tiny = build_variant(3, 1.0 / 64.0);
  for (const auto& st : tiny.stages) CHECK(st.width >= 1);
  CHECK(param_count(tiny) < p3);
}

TEST_CASE("init_params covers the spec and is deterministic") {
  const NetworkSpec spec = build_variant(3, 0.25);
  const auto a = init_params(spec, 5);
  const auto b = init_params(spec, 5);
  REQUIRE(a.size() == b.size());
  std::int64_t total = 0;
  for (const auto& [name, t] : a) {
    total += t.count();
    const TensorF& other = b.at(name);
    REQUIRE(other.shape == t.shape);
    for (std::int64_t i = 0; i < t.count(); ++i) CHECK(other.data[i] == t.data[i]);
  }
  CHECK(total == param_count(spec));
  const auto c = init_params(spec, 6);
  bool any_differs = false;
  for (const auto& [name, t] : a) {
    const TensorF& other = c.at(name);
    for (std::int64_t i = 0; i < t.count(); ++i)
      if (other.data[i] != t.data[i]) any_differs = true;
  }
  CHECK(any_differs);
}

TEST_CASE("forward emits one image-resolution map per supervision point") {
  for (int k : {1, 2, 3}) {
    const NetworkSpec spec = build_variant(k, 0.25);
    const auto params = init_params(spec, 1);
    const TensorF img = rand_image({1, 1, 32, 32}, 3);
    const SideOutputs so = forward(spec, params, img);
    const size_t want = 5 + fusion_groups(k).size();
    CHECK(so.maps.size() == want);
    for (const auto& [name, t] : so.maps) {
      CHECK(t.shape.n == 1);
      CHECK(t.shape.c == 1);
      CHECK(t.shape.h == 32);
      CHECK(t.shape.w == 32);
    }
    CHECK(so.final_prediction.shape.h == 32);
  }
}

TEST_CASE("the final prediction is the shallowest span output") {
  const NetworkSpec spec = build_variant(3, 0.25);
  const auto params = init_params(spec, 2);
  const TensorF img = rand_image({1, 1, 32, 32}, 4);
  const SideOutputs so = forward(spec, params, img);
  const TensorF* g1 = nullptr;
  for (const auto& [name, t] : so.maps)
    if (name == "sspan.g1") g1 = &t;
  REQUIRE(g1 != nullptr);
  for (std::int64_t i = 0; i < g1->count(); ++i)
    CHECK(so.final_prediction.data[i] == g1->data[i]);

  const NetworkSpec spec1 = build_variant(1, 0.25);
  const SideOutputs so1 = forward(spec1, init_params(spec1, 2), img);
  const TensorF* s1 = nullptr;
  for (const auto& [name, t] : so1.maps)
    if (name == "fspan.s1") s1 = &t;
  REQUIRE(s1 != nullptr);
  for (std::int64_t i = 0; i < s1->count(); ++i)
    CHECK(so1.final_prediction.data[i] == s1->data[i]);
}

TEST_CASE("compositional oracle: fspan head recomputed from primitive kernels") {
  // recompute the stage-1 feature-span head of LSN_1 with direct kernel
  // calls and compare against the graph forward
  const NetworkSpec spec = build_variant(1, 0.25);
  const auto params = init_params(spec, 9);
  const TensorF img = rand_image({1, 1, 32, 32}, 10);
  const SideOutputs so = forward(spec, params, img);

  TensorF x = img;
  for (int l = 1; l <= 2; ++l) {
    const std::string p = "backbone.s1.conv" + std::to_string(l);
    const TensorF& w = params.at(p + ".weight");
    const TensorF& b = params.at(p + ".bias");
    TensorF y({1, w.shape.n, 32, 32});
    kernels::conv2d_forward(x, w, b.data.data(), 1, 1, y);
    TensorF act(y.shape);
    kernels::sigmoid_forward(y, act);
    x = act;
  }
  const auto span = lsu_forward<float>({x}, params.at("fspan.s1.lambda"),
                                       params.at("fspan.s1.bias"), {1});
  const TensorF* head = nullptr;
  for (const auto& [name, t] : so.maps)
    if (name == "fspan.s1") head = &t;
  REQUIRE(head != nullptr);
  for (std::int64_t i = 0; i < head->count(); ++i)
    CHECK(head->data[i] == doctest::Approx(span[0].data[i]).epsilon(1e-6));
}

TEST_CASE("zeroed span parameters yield exactly zero prediction maps") {
  const NetworkSpec spec = build_variant(3, 0.25);
  auto params = init_params(spec, 7);
  for (auto& [name, t] : params)
    if (name.rfind("fspan.", 0) == 0 || name.rfind("sspan.", 0) == 0 ||
        name.rfind("align.", 0) == 0 || name.rfind("head.", 0) == 0)
      std::fill(t.data.begin(), t.data.end(), 0.0f);
  const SideOutputs so = forward(spec, params, rand_image({1, 1, 32, 32}, 8));
  for (float v : so.final_prediction.data) CHECK(v == 0.0f);
}

TEST_CASE("forward is bit-deterministic") {
  const NetworkSpec spec = build_variant(2, 0.25);
  const auto params = init_params(spec, 3);
  const TensorF img = rand_image({1, 1, 32, 32}, 5);
  const SideOutputs a = forward(spec, params, img);
  const SideOutputs b = forward(spec, params, img);
  for (std::int64_t i = 0; i < a.final_prediction.count(); ++i)
    CHECK(a.final_prediction.data[i] == b.final_prediction.data[i]);
}

TEST_CASE("infer thresholds strictly: boundary scores classify negative") {
  const NetworkSpec spec = build_variant(1, 0.25);
  auto params = init_params(spec, 7);
  // zero out the final head so every logit is exactly 0 -> sigmoid 0.5
  for (auto& [name, t] : params)
    if (name.rfind("fspan.s1.", 0) == 0) std::fill(t.data.begin(), t.data.end(), 0.0f);
  const TensorF img = rand_image({1, 1, 32, 32}, 6);
  const TensorF at_half = infer(spec, params, img, 0.5);
  for (float v : at_half.data) CHECK(v == 0.0f);  // 0.5 > 0.5 is false
  const TensorF below = infer(spec, params, img, 0.499);
  for (float v : below.data) CHECK(v == 1.0f);
}

TEST_CASE("invalid inputs are rejected") {
  const NetworkSpec spec = build_variant(3, 0.25);
  const auto params = init_params(spec, 1);
  CHECK_THROWS_AS(forward(spec, params, rand_image({1, 1, 30, 30}, 1)),
                  std::invalid_argument);  // not divisible by 16
  CHECK_THROWS_AS(forward(spec, params, rand_image({1, 3, 32, 32}, 1)),
                  std::invalid_argument);  // not grayscale
  ParamStore<float> missing = params;
  missing.erase("sspan.g1.lambda");
  CHECK_THROWS_WITH_AS(forward(spec, missing, rand_image({1, 1, 32, 32}, 1)),
                       doctest::Contains("sspan.g1.lambda"), std::runtime_error);
}
