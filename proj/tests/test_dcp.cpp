#include <doctest.h>

#include <cmath>

#include "dcp/dcp.hpp"
#include "metrics/metrics.hpp"
#include "synth/synth.hpp"
#include "test_util.hpp"

using namespace sf;

namespace {

ImageBuffer random_image(int w, int h, std::uint64_t seed) {
  CounterRng rng(seed, 21);
  ImageBuffer img(w, h);
  for (auto& v : img.data()) v = rng.uniform();
  return img;
}

FloatMap dark_oracle(const ImageBuffer& img, int patch) {
  const int r = patch / 2;
  FloatMap out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      float m = 1e9f;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = std::clamp(y + dy, 0, img.height() - 1);
          const int xx = std::clamp(x + dx, 0, img.width() - 1);
          for (int c = 0; c < 3; ++c) m = std::min(m, img.at(yy, xx, c));
        }
      out.at(y, x) = m;
    }
  return out;
}

}  // namespace

TEST_CASE("dark channel examples") {
  ImageBuffer flat(9, 9, 0.7f);
  for (float v : dark_channel(flat, 5).data) CHECK(v == 0.7f);

  ImageBuffer img = random_image(10, 10, 3);
  for (auto& v : img.data()) v = 0.2f + 0.8f * v;
  img.at(4, 6, 1) = 0.0f;
  auto d = dark_channel(img, 3);
  for (int y = 3; y <= 5; ++y)
    for (int x = 5; x <= 7; ++x) CHECK(d.at(y, x) == 0.0f);
  CHECK(d.at(0, 0) > 0.0f);

  CHECK(dark_channel(img, 5) == dark_oracle(img, 5));
  CHECK_THROWS_AS(dark_channel(img, 4), Error);
  CHECK_THROWS_AS(dark_channel(img, 0), Error);
}

TEST_CASE("dark channel equals brute force for all sizes up to 12x12") {
  std::uint64_t seed = 0;
  for (int h = 1; h <= 12; ++h)
    for (int w = 1; w <= 12; ++w)
      for (int patch : {1, 3, 5})
        for (int rep = 0; rep < 2; ++rep) {
          ImageBuffer img = random_image(w, h, seed++);
          REQUIRE(dark_channel(img, patch) == dark_oracle(img, patch));
        }
}

TEST_CASE("dark channel is monotone") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    ImageBuffer img = random_image(8, 7, s);
    auto before = dark_channel(img, 3);
    CounterRng rng(s, 4);
    const auto p = rng.below(img.data().size());
    img.data()[p] = std::min(1.0f, img.data()[p] + rng.uniform());
    auto after = dark_channel(img, 3);
    for (std::size_t i = 0; i < before.data.size(); ++i) CHECK(after.data[i] >= before.data[i]);
  }
}

TEST_CASE("airlight estimation") {
  ImageBuffer flat(6, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      flat.at(y, x, 0) = 0.8f;
      flat.at(y, x, 1) = 0.6f;
      flat.at(y, x, 2) = 0.4f;
    }
  auto a = estimate_airlight(flat, dark_channel(flat, 3), 0.001);
  CHECK(a == std::array<float, 3>{0.8f, 0.6f, 0.4f});

  ImageBuffer img = random_image(9, 8, 5);
  std::size_t best = 0;
  double best_sum = -1;
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const double s = double(img.data()[p * 3]) + img.data()[p * 3 + 1] + img.data()[p * 3 + 2];
    if (s > best_sum) best_sum = s, best = p;
  }
  auto g = estimate_airlight(img, dark_channel(img, 3), 1.0);
  CHECK(g[0] == img.data()[best * 3]);
  CHECK(g[2] == img.data()[best * 3 + 2]);

  // tie between two identical candidates goes to the lower index
  ImageBuffer tie(4, 1, 0.1f);
  for (int c = 0; c < 3; ++c) tie.at(0, 1, c) = tie.at(0, 3, c) = 0.9f;
  tie.at(0, 3, 0) = 0.9f;
  FloatMap dk(4, 1, 0.5f);
  CHECK(estimate_airlight(tie, dk, 1.0)[0] == 0.9f);

  SUBCASE("recovers a known airlight from a dense synthetic haze") {
    const std::array<float, 3> A{0.9f, 0.8f, 0.7f};
    for (std::uint64_t s = 0; s < 5; ++s) {
      ImageBuffer J = sf::testing::procedural_image(48, 40, s);
      ImageBuffer I = degrade(J, A, transmission_map(FloatMap(48, 40, 1.5f), 2.0));
      auto est = estimate_airlight(I, dark_channel(I, 15), 0.001);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(est[c] - A[c]) <= 0.05f);
    }
  }
}

TEST_CASE("dehaze examples") {
  DcpConfig cfg;
  SUBCASE("constant airlight input") {
    ImageBuffer flat(20, 20);
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) flat.at(y, x, 0) = 0.9f, flat.at(y, x, 1) = 0.8f, flat.at(y, x, 2) = 0.7f;
    auto r = dehaze_dcp_detailed(flat, cfg);
    const float expect_t = static_cast<float>(std::max(1.0 - cfg.omega, cfg.t0));
    for (float t : r.transmission.data) CHECK(t == doctest::Approx(expect_t));
    for (int c = 0; c < 3; ++c)
      for (int p = 0; p < 400; ++p) CHECK(r.restored.data()[p * 3 + c] == doctest::Approx(flat.data()[c]));
    // with t0 below 1 - omega the floor is inactive
    DcpConfig low = cfg;
    low.t0 = 0.01;
    for (float t : dehaze_dcp_detailed(flat, low).transmission.data)
      CHECK(t == doctest::Approx(1.0 - low.omega));
  }
  SUBCASE("haze-free input with dark pixels is left nearly unchanged") {
    ImageBuffer img = sf::testing::procedural_image(64, 48, 7);
    for (int y = 0; y < 48; y += 6)
      for (int x = 0; x < 64; x += 6) img.at(y, x, 2) = 0.0f;
    auto out = dehaze_dcp(img, cfg);
    double diff = 0;
    for (std::size_t i = 0; i < img.data().size(); ++i) diff += std::abs(out.data()[i] - img.data()[i]);
    CHECK(diff / img.data().size() <= 0.05);
  }
  SUBCASE("gray haze is improved") {
    for (std::uint64_t s = 0; s < 4; ++s) {
      ImageBuffer J = sf::testing::procedural_image(64, 64, 10 + s);
      ImageBuffer I = degrade(J, {0.85f, 0.85f, 0.85f}, transmission_map(make_depth(DepthMode::parse("ramp:0.5:2"), 64, 64), 1.0));
      auto out = dehaze_dcp(I, cfg);
      CHECK(psnr(out, J) > psnr(I, J));
    }
  }
  SUBCASE("output range and transmission floor") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      auto r = dehaze_dcp_detailed(random_image(20, 17, s), cfg);
      for (float t : r.transmission.data) CHECK(t >= static_cast<float>(cfg.t0));
      for (float v : r.restored.data()) CHECK((v >= 0.0f && v <= 1.0f));
    }
  }
  SUBCASE("invalid configs") {
    DcpConfig bad = cfg;
    bad.patch = 4;
    CHECK_THROWS_AS(dehaze_dcp(ImageBuffer(4, 4), bad), Error);
    bad = cfg;
    bad.t0 = 1.0;
    CHECK_THROWS_AS(dehaze_dcp(ImageBuffer(4, 4), bad), Error);
  }
}
