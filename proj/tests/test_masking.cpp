#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mtm/mask/mask.hpp"

using namespace mtm;
using namespace mtm::mask;
using data::kAction;
using data::kRtg;
using data::kState;

TEST_CASE("random_mask: boundary ratios and exact hidden counts") {
  Rng rng(1);
  auto none = random_mask(4, 0.0, 0.0, rng);
  CHECK(none.hidden_count() == 0);

  MaskDrawInfo info;
  auto half = random_mask(4, 0.5, 0.5, rng, &info);
  CHECK(half.vis.size() == 12);
  CHECK(half.hidden_count() == 6);
  CHECK(info.base_hidden == 6);

  auto all = random_mask(4, 1.0, 1.0, rng);
  CHECK(all.hidden_count() == 12);
}

TEST_CASE("random_mask: empirical mean hidden fraction over the default range") {
  Rng rng(2);
  double total_fraction = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto g = random_mask(4, 0.0, 0.6, rng);
    total_fraction += static_cast<double>(g.hidden_count()) / 12.0;
  }
  CHECK(std::abs(total_fraction / draws - 0.30) < 0.02);
}

TEST_CASE("random_autoregressive_mask: suffix property over 10^4 draws") {
  Rng rng(3);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    MaskDrawInfo info;
    auto g = random_autoregressive_mask(4, 0.0, 0.6, rng, &info);
    const int total = 12;
    // final token hidden
    REQUIRE(!g.visible(3, kAction));
    // some hidden token has no visible successor == the trailing run is hidden
    REQUIRE(!g.vis[total - 1]);
    // everything at/after the pivot is hidden (suffix in sequence order)
    REQUIRE(info.pivot >= 0);
    for (int idx = info.pivot; idx < total; ++idx) REQUIRE(g.vis[idx] == 0);
    // pivot was a hidden candidate or forced
    REQUIRE(info.base_hidden >= 0);
  }
}

TEST_CASE("random_autoregressive_mask: minimal segment still masks the last token") {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    auto g = random_autoregressive_mask(1, 0.0, 0.6, rng);
    CHECK(!g.visible(0, kAction));
  }
}

TEST_CASE("capability masks: FD layout example") {
  auto g = capability_mask(CapabilityKind::FD, 4, 3);
  for (int t = 0; t < 3; ++t) {
    CHECK(g.visible(t, kState));
    CHECK(g.visible(t, kAction));
  }
  for (int t = 0; t < 4; ++t) CHECK(!g.visible(t, kRtg));
  CHECK(!g.visible(3, kState));
  CHECK(!g.visible(3, kAction));
}

TEST_CASE("capability masks: RCBC layout example") {
  auto g = capability_mask(CapabilityKind::RCBC, 4, 4);
  for (int t = 0; t < 4; ++t) {
    CHECK(g.visible(t, kRtg));
    CHECK(g.visible(t, kState));
  }
  for (int t = 0; t < 3; ++t) CHECK(g.visible(t, kAction));
  CHECK(!g.visible(3, kAction));
}

TEST_CASE("capability masks: BC hides all rtg") {
  auto g = capability_mask(CapabilityKind::BC, 4, 2);
  for (int t = 0; t < 4; ++t) CHECK(!g.visible(t, kRtg));
  CHECK(g.visible(0, kState));
  CHECK(g.visible(1, kState));
  CHECK(!g.visible(2, kState));
  CHECK(g.visible(0, kAction));
  CHECK(!g.visible(1, kAction));
}

TEST_CASE("capability masks: ID exposes states through q+1 only") {
  auto g = capability_mask(CapabilityKind::ID, 4, 2);
  for (int t = 0; t < 3; ++t) CHECK(g.visible(t, kState));
  CHECK(!g.visible(3, kState));
  for (int t = 0; t < 4; ++t) {
    CHECK(!g.visible(t, kAction));
    CHECK(!g.visible(t, kRtg));
  }
}

TEST_CASE("capability masks: FULL is all visible; FD/ID at q=L are errors") {
  auto g = capability_mask(CapabilityKind::FULL, 4, 4);
  CHECK(g.hidden_count() == 0);
  CHECK_THROWS_AS(capability_mask(CapabilityKind::FD, 4, 4), std::invalid_argument);
  CHECK_THROWS_AS(capability_mask(CapabilityKind::ID, 4, 4), std::invalid_argument);
  CHECK_THROWS_AS(capability_mask(CapabilityKind::BC, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(capability_mask(CapabilityKind::BC, 4, 5), std::invalid_argument);
}

TEST_CASE("presence intersection never exposes an absent modality") {
  Rng rng(5);
  const bool present[3] = {true, true, false};  // action-free trajectory
  for (int i = 0; i < 200; ++i) {
    auto g = random_autoregressive_mask(4, 0.0, 0.6, rng);
    auto masked = intersect_presence(g, present);
    for (int t = 0; t < 4; ++t) {
      CHECK(!masked.visible(t, kAction));
      // present modalities keep their original visibility
      CHECK(masked.visible(t, kRtg) == g.visible(t, kRtg));
      CHECK(masked.visible(t, kState) == g.visible(t, kState));
    }
  }
}

TEST_CASE("mask generation is a pure function of arguments and rng state") {
  Rng a(77), b(77);
  for (int i = 0; i < 50; ++i) {
    auto ga = random_autoregressive_mask(4, 0.0, 0.6, a);
    auto gb = random_autoregressive_mask(4, 0.0, 0.6, b);
    CHECK(ga.vis == gb.vis);
  }
}

TEST_CASE("hetero stage-1 mask: rtg and states through q, actions hidden") {
  auto g = hetero_stage1_mask(4, 3);
  for (int t = 0; t < 3; ++t) {
    CHECK(g.visible(t, kRtg));
    CHECK(g.visible(t, kState));
  }
  for (int t = 0; t < 4; ++t) CHECK(!g.visible(t, kAction));
  CHECK(!g.visible(3, kState));
  CHECK(!g.visible(3, kRtg));
  CHECK_THROWS(hetero_stage1_mask(4, 4));
}
