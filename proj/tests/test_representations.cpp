#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dpool/error.hpp"
#include "dpool/representations.hpp"
#include "fixtures.hpp"

using namespace dpool;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected dpool::Error");
  return ErrorKind::InvalidArgument;
}

bool all_128(const DynamicImage& img) {
  return std::all_of(img.pixels.begin(), img.pixels.end(), [](std::uint8_t p) { return p == 128; });
}

DepthFrame ramp_frame(std::size_t w, std::size_t h) {
  DepthFrame f(w, h, std::uint16_t{0});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) f.at(x, y) = static_cast<std::uint16_t>(1000 + x);
  }
  return f;
}

}  // namespace

TEST_CASE("normals of a flat plane and a unit ramp") {
  const auto flat = compute_normals(DepthFrame(6, 5, std::uint16_t{1500}));
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(flat.nx[i] == 0.0);
    CHECK(flat.ny[i] == 0.0);
    CHECK(flat.nz[i] == 1.0);
  }
  const auto ramp = compute_normals(ramp_frame(6, 5));
  const double r = 1.0 / std::sqrt(2.0);
  for (std::size_t y = 0; y < 5; ++y) {
    for (std::size_t x = 0; x < 6; ++x) {
      const std::size_t i = y * 6 + x;
      CHECK(ramp.nx[i] == doctest::Approx(-r).epsilon(1e-9));
      CHECK(std::abs(ramp.ny[i]) <= 1e-12);
      CHECK(ramp.nz[i] == doctest::Approx(r).epsilon(1e-9));
    }
  }
}

TEST_CASE("normals vanish at holes and their 4-neighbours and are unit elsewhere") {
  DepthFrame f = ramp_frame(7, 7);
  f.at(3, 3) = 0;
  const auto n = compute_normals(f);
  for (std::size_t y = 0; y < 7; ++y) {
    for (std::size_t x = 0; x < 7; ++x) {
      const std::size_t i = y * 7 + x;
      const bool invalid = (x == 3 && y == 3) || (x == 3 && (y == 2 || y == 4)) || (y == 3 && (x == 2 || x == 4));
      const double len = n.nx[i] * n.nx[i] + n.ny[i] * n.ny[i] + n.nz[i] * n.nz[i];
      if (invalid) {
        CHECK(len == 0.0);
      } else {
        CHECK(std::abs(std::sqrt(len) - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("background removal") {
  SUBCASE("subject at 1000, wall at 3000") {
    DepthFrame f(8, 8, std::uint16_t{3000});
    for (std::size_t y = 2; y < 6; ++y) {
      for (std::size_t x = 2; x < 6; ++x) f.at(x, y) = 1000;
    }
    const DepthSequence seq({f, f});
    const auto threshold = background_threshold(seq, BackgroundParams{});
    REQUIRE(threshold.has_value());
    CHECK(*threshold < 3000.0);
    CHECK(*threshold > 2900.0);
    const auto out = remove_background(seq, BackgroundParams{});
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        const bool subject = x >= 2 && x < 6 && y >= 2 && y < 6;
        CHECK(out[1].at(x, y) == (subject ? 1000 : 0));
      }
    }
  }
  SUBCASE("a single near peak removes nothing") {
    // One stray sample too light to count as a peak.
    DepthFrame f(20, 20, std::uint16_t{900});
    f.at(0, 0) = 905;
    const DepthSequence seq({f});
    CHECK(!background_threshold(seq, BackgroundParams{}).has_value());
    CHECK(remove_background(seq, BackgroundParams{}).frames() == seq.frames());
  }
  SUBCASE("all-zero frames") {
    CHECK(kind_of([] { remove_background(fixture::constant_sequence(3, 4, 4, 0), BackgroundParams{}); }) ==
          ErrorKind::NoForeground);
  }
  SUBCASE("zeroed set grows with the tolerance") {
    DepthFrame f(10, 10, std::uint16_t{2000});
    for (std::size_t i = 0; i < 100; ++i) f.values()[i] = static_cast<std::uint16_t>(i < 30 ? 1000 + 10 * i : 2000);
    const DepthSequence seq({f});
    DepthSequence previous = seq;
    for (double tol : {0.0, 100.0, 500.0, 900.0}) {
      BackgroundParams p;
      p.tolerance = tol;
      const auto threshold = background_threshold(seq, p);
      REQUIRE(threshold.has_value());
      const auto out = remove_background(seq, p);
      for (std::size_t i = 0; i < 100; ++i) {
        if (previous[0].values()[i] == 0) CHECK(out[0].values()[i] == 0);
        if (seq[0].values()[i] <= *threshold) CHECK(out[0].values()[i] == seq[0].values()[i]);
      }
      previous = out;
    }
  }
}

TEST_CASE("GMM foreground on a static scene stays empty") {
  const auto block = fixture::moving_block(16, 16, 5, 25, 0);
  const auto masks = gmm_foreground(block.sequence, GmmParams{});
  REQUIRE(masks.size() == 25);
  for (const auto& m : masks) CHECK(m.count() == 0);
  CHECK(kind_of([] { gmm_foreground(fixture::constant_sequence(1, 4, 4, 100), GmmParams{}); }) ==
        ErrorKind::TooFewFrames);
}

TEST_CASE("GMM foreground tracks a moving block") {
  const auto block = fixture::moving_block(24, 16, 5, 10, 12);
  const auto masks = gmm_foreground(block.sequence, GmmParams{});
  CHECK(masks.front().count() == 0);
  for (std::size_t t = 11; t < block.truth.size(); ++t) {
    // Current block plus the pixels it vacated since the previous frame.
    std::vector<bool> region = block.truth[t];
    for (std::size_t i = 0; i < region.size(); ++i) region[i] = region[i] || block.truth[t - 1][i];
    CHECK(fixture::iou(masks[t].mask, region) >= 0.8);
  }
  for (std::size_t jobs : {2, 5}) {
    const auto again = gmm_foreground(block.sequence, GmmParams{}, jobs);
    for (std::size_t t = 0; t < masks.size(); ++t) CHECK(again[t].mask == masks[t].mask);
  }
}

TEST_CASE("DDI examples") {
  const HierarchyConfig config;
  const RankPoolParams params;
  SUBCASE("static segment renders all-128") {
    const auto pair = build_ddi(fixture::constant_sequence(6, 5, 4, 1234), config, params);
    CHECK(pair.forward.channels == 1);
    CHECK(all_128(pair.forward));
    CHECK(all_128(pair.backward));
  }
  SUBCASE("one ramping pixel carries the extreme value") {
    std::vector<DepthFrame> frames;
    FeatureSequence pixel(1);
    for (int t = 0; t < 7; ++t) {
      DepthFrame f(5, 4, std::uint16_t{1500});
      // Quadratic: a linear ramp gives identical first-layer windows, which
      // the second layer pools to zero.
      f.at(3, 2) = static_cast<std::uint16_t>(1500 + 10 * t * t);
      const double v = f.at(3, 2);
      pixel.push_back(std::span(&v, 1));
      frames.push_back(f);
    }
    const DepthSequence seq(frames);
    const auto pooled = encode_ddi(seq, config, params);
    const auto& w = pooled.forward.values;
    const auto peak = static_cast<std::size_t>(
        std::max_element(w.begin(), w.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) -
        w.begin());
    CHECK(peak == 2 * 5 + 3);
    CHECK(w[peak] == doctest::Approx(hierarchical_rank_pool(pixel, config, params)[0]).epsilon(1e-9));
    const auto img = quantize_field(pooled.forward);
    CHECK((img.at(3, 2) == 0 || img.at(3, 2) == 255));
  }
  SUBCASE("reversing the segment swaps the images") {
    const auto block = fixture::moving_block(12, 10, 3, 2, 6);
    const auto a = build_ddi(block.sequence, config, params);
    const auto b = build_ddi(block.sequence.reversed(), config, params);
    CHECK(a.forward == b.backward);
    CHECK(a.backward == b.forward);
  }
}

TEST_CASE("DDNI examples") {
  const HierarchyConfig config;
  const RankPoolParams params;
  SUBCASE("everything removed") {
    // Two planes 30 apart: the far one is the last peak, and the tolerance
    // of 50 reaches past the near one.
    DepthFrame f(8, 8, std::uint16_t{1030});
    for (std::size_t i = 0; i < 32; ++i) f.values()[i] = 1000;
    const DepthSequence seq({f, f, f});
    CHECK(kind_of([&] { build_ddni(seq, BackgroundParams{}, config, params); }) == ErrorKind::NoForeground);
  }
  SUBCASE("static tilted plane renders all-128") {
    const auto tilted = fixture::tilting_plane(1, 0.0);
    DepthFrame f = tilted[0];
    for (std::size_t y = 4; y < 20; ++y) {
      for (std::size_t x = 4; x < 20; ++x) f.at(x, y) = static_cast<std::uint16_t>(1000 + x + y);
    }
    const auto pair = build_ddni(DepthSequence({f, f, f, f}), BackgroundParams{}, config, params);
    CHECK(pair.forward.channels == 3);
    CHECK(all_128(pair.forward));
    CHECK(all_128(pair.backward));
  }
  SUBCASE("tilt about one axis lands in the matching normal channel") {
    for (bool about_y : {true, false}) {
      const auto pooled = encode_ddni(fixture::tilting_plane(8, 0.8, about_y), BackgroundParams{}, config, params);
      const auto e = fixture::plane_energy(pooled.forward);
      const double moving = about_y ? e[0] : e[1];
      const double still = about_y ? e[1] : e[0];
      CHECK(moving > 0.0);
      CHECK(moving > 10.0 * still);
      CHECK(moving > e[2]);
    }
  }
}

TEST_CASE("DDMNI examples") {
  const HierarchyConfig config;
  const RankPoolParams params;
  SUBCASE("static segment renders all-128") {
    const auto block = fixture::moving_block(12, 12, 4, 8, 0);
    const auto pair = build_ddmni(block.sequence, GmmParams{}, config, params);
    CHECK(all_128(pair.forward));
    CHECK(all_128(pair.backward));
  }
  SUBCASE("one frame is too few") {
    CHECK(kind_of([] { build_ddmni(fixture::constant_sequence(1, 4, 4, 9), GmmParams{}, HierarchyConfig{},
                                   RankPoolParams{}); }) == ErrorKind::TooFewFrames);
  }
  SUBCASE("energy stays inside the motion region") {
    const auto block = fixture::moving_block(24, 16, 5, 6, 10);
    const auto pooled = encode_ddmni(block.sequence, GmmParams{}, config, params);
    std::vector<bool> region(24 * 16, false);
    for (const auto& m : block.truth) {
      for (std::size_t i = 0; i < region.size(); ++i) region[i] = region[i] || m[i];
    }
    for (const Field* f : {&pooled.forward, &pooled.backward}) {
      double inside = 0.0;
      double total = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < region.size(); ++i) {
          const double e = std::abs(f->values[c * region.size() + i]);
          total += e;
          inside += region[i] ? e : 0.0;
        }
      }
      CHECK(total > 0.0);
      CHECK(inside >= 0.8 * total);
    }
  }
  SUBCASE("backward pools the reversed masked features") {
    const auto block = fixture::moving_block(12, 10, 3, 3, 6);
    const auto masks = gmm_foreground(block.sequence, GmmParams{});
    const auto features = normal_features(block.sequence, &masks);
    const auto pooled = encode_ddmni(block.sequence, GmmParams{}, config, params);
    CHECK(pooled.backward.values == hierarchical_rank_pool(features.reversed(), config, params));
  }
}

TEST_CASE("build_all yields six images of the frame size") {
  const auto block = fixture::moving_block(16, 12, 4, 3, 6);
  const auto set = build_all(block.sequence, BackgroundParams{}, GmmParams{}, HierarchyConfig{}, RankPoolParams{});
  for (const DynamicImage* img : {&set.ddi_fwd, &set.ddi_bwd, &set.ddni_fwd, &set.ddni_bwd, &set.ddmni_fwd,
                                  &set.ddmni_bwd}) {
    CHECK(img->width == 16);
    CHECK(img->height == 12);
  }
  CHECK(set.ddi_fwd.channels == 1);
  CHECK(set.ddi_bwd.channels == 1);
  CHECK(set.ddni_fwd.channels == 3);
  CHECK(set.ddmni_bwd.channels == 3);
}
