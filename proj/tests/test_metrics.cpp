#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "metrics/metrics.hpp"
#include "test_util.hpp"

using namespace sf;

namespace {

ImageBuffer random_image(int w, int h, std::uint64_t seed) {
  CounterRng rng(seed, 3);
  ImageBuffer img(w, h);
  for (auto& v : img.data()) v = rng.uniform();
  return img;
}

ImageBuffer add_noise(const ImageBuffer& img, float amp, std::uint64_t seed) {
  CounterRng rng(seed, 8);
  ImageBuffer out = img;
  for (auto& v : out.data()) v += rng.uniform(-amp, amp);
  return out;
}

// Brute-force SSIM: explicit 11x11 window per position, no separability.
double ssim_oracle(const ImageBuffer& a, const ImageBuffer& b) {
  auto Y = [](const ImageBuffer& im, int y, int x) {
    return 0.299 * im.at(y, x, 0) + 0.587 * im.at(y, x, 1) + 0.114 * im.at(y, x, 2);
  };
  double w[11][11], s = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) s += w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
  double total = 0.0;
  int n = 0;
  for (int y = 0; y + 11 <= a.height(); ++y)
    for (int x = 0; x + 11 <= a.width(); ++x) {
      double mx = 0, my = 0, vx = 0, vy = 0, c = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double g = w[i][j] / s;
          mx += g * Y(a, y + i, x + j);
          my += g * Y(b, y + i, x + j);
        }
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double g = w[i][j] / s;
          const double dx = Y(a, y + i, x + j) - mx, dy = Y(b, y + i, x + j) - my;
          vx += g * dx * dx;
          vy += g * dy * dy;
          c += g * dx * dy;
        }
      total += (2 * mx * my + 1e-4) * (2 * c + 9e-4) / ((mx * mx + my * my + 1e-4) * (vx + vy + 9e-4));
      ++n;
    }
  return total / n;
}

}  // namespace

TEST_CASE("psnr examples") {
  const ImageBuffer a = random_image(8, 6, 1);
  CHECK(std::isinf(psnr(a, a)));
  CHECK(psnr(a, a) > 0);

  // 0.1 has no exact float form; pick a float pair whose difference is 0.1 to ~1e-17
  const float hi = 0.1f;
  const float lo = static_cast<float>(static_cast<double>(hi) - 0.1);
  REQUIRE(std::abs((static_cast<double>(hi) - lo) - 0.1) < 1e-11);
  CHECK(std::abs(psnr(ImageBuffer(5, 5, hi), ImageBuffer(5, 5, lo)) - 20.0) < 1e-9);
  ImageBuffer x(5, 5, 0.6f), y(5, 5, 0.5f);
  // 0.6f - 0.5f is 0.1 up to float representation error
  CHECK(psnr(x, y) == doctest::Approx(20.0).epsilon(1e-6));
  ImageBuffer p(5, 5, 0.375f), q(5, 5, 0.125f);
  CHECK(psnr(p, q) == doctest::Approx(10.0 * std::log10(16.0)).epsilon(1e-15));

  for (std::uint64_t s = 0; s < 20; ++s) {
    const ImageBuffer u = random_image(9, 7, s), v = random_image(9, 7, s + 100);
    const auto& du = u.data();
    const auto& dv = v.data();
    const double mse = std::inner_product(du.begin(), du.end(), dv.begin(), 0.0, std::plus<>(),
                                          [](float m, float n) { return (double(m) - n) * (double(m) - n); }) /
                       du.size();
    CHECK(std::abs(psnr(u, v) - 10.0 * std::log10(1.0 / mse)) <= 1e-9);
  }
  CHECK_THROWS_AS(psnr(a, random_image(6, 8, 1)), Error);
}

TEST_CASE("psnr decreases with noise amplitude") {
  const ImageBuffer a = random_image(16, 16, 4);
  double prev = psnr(a, add_noise(a, 0.01f, 1));
  for (float amp : {0.05f, 0.2f}) {
    const double cur = psnr(a, add_noise(a, amp, 1));
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("ssim examples") {
  const ImageBuffer a = sf::testing::procedural_image(20, 14, 2);
  CHECK(std::abs(ssim(a, a) - 1.0) <= 1e-12);

  ImageBuffer x(12, 12, 0.5f), y(12, 12, 0.25f);
  const double expect = (2 * 0.5 * 0.25 + 1e-4) / (0.25 + 0.0625 + 1e-4);
  CHECK(std::abs(ssim(x, y) - expect) <= 1e-5);
  CHECK(std::abs(ssim(x, y) - 0.80006) <= 1e-5);

  const ImageBuffer b = add_noise(a, 0.1f, 3);
  CHECK(ssim(a, b) == ssim(b, a));
  CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) <= 1e-10);

  CHECK_THROWS_AS(ssim(ImageBuffer(10, 20), ImageBuffer(10, 20)), Error);
  CHECK_THROWS_AS(ssim(a, ImageBuffer(14, 20)), Error);
}

TEST_CASE("ssim bounded and exact on self for 50 images") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const ImageBuffer a = random_image(11 + s % 7, 11 + s % 5, s);
    CHECK(std::abs(ssim(a, a) - 1.0) <= 1e-12);
    ImageBuffer inv = a;
    for (auto& v : inv.data()) v = 1.0f - v;
    const double v = ssim(a, inv);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("metric invariances") {
  const ImageBuffer a = random_image(17, 13, 5), b = add_noise(a, 0.2f, 6);
  // psnr: any permutation applied to both images
  ImageBuffer pa = a, pb = b;
  CounterRng rng(1, 1);
  const std::size_t n = a.pixel_count();
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.below(i + 1);
    for (int c = 0; c < 3; ++c) {
      std::swap(pa.data()[i * 3 + c], pa.data()[j * 3 + c]);
      std::swap(pb.data()[i * 3 + c], pb.data()[j * 3 + c]);
    }
  }
  CHECK(psnr(pa, pb) == doctest::Approx(psnr(a, b)).epsilon(1e-12));
  const double s = ssim(a, b);
  CHECK(std::abs(ssim(a.flipped_horizontal(), b.flipped_horizontal()) - s) <= 1e-12);
  CHECK(std::abs(ssim(a.flipped_vertical(), b.flipped_vertical()) - s) <= 1e-12);
}

TEST_CASE("report aggregates are arithmetic means") {
  MetricReport r;
  const ImageBuffer a = random_image(12, 12, 1);
  r.add("one", add_noise(a, 0.05f, 1), a);
  r.add("two", add_noise(a, 0.2f, 2), a);
  CHECK(r.mean_psnr() == doctest::Approx((r.rows[0].psnr_db + r.rows[1].psnr_db) / 2));
  CHECK(r.mean_ssim() == doctest::Approx((r.rows[0].ssim + r.rows[1].ssim) / 2));
  std::ostringstream out;
  r.write_tsv(out);
  const std::string s = out.str();
  CHECK(s.rfind("# ssim=", 0) == 0);
  CHECK(s.find("id\tpsnr_db\tssim\n") != std::string::npos);
  CHECK(s.find("\nmean\t") != std::string::npos);
}
