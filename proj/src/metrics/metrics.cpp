#include "metrics/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "common/error.hpp"

namespace sf {

static void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
  require(a.same_shape(b), ErrorCode::kInvalidArgument,
          std::string(what) + ": shape mismatch " + std::to_string(a.width()) + "x" +
              std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
              std::to_string(b.height()));
}

double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak) {
  require_same_shape(a, b, "psnr");
  double acc = 0.0;
  const auto& x = a.data();
  const auto& y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

std::vector<double> luma(const ImageBuffer& img) {
  std::vector<double> y(img.pixel_count());
  const auto& d = img.data();
  for (std::size_t p = 0; p < y.size(); ++p)
    y[p] = 0.299 * d[p * 3] + 0.587 * d[p * 3 + 1] + 0.114 * d[p * 3 + 2];
  return y;
}

std::vector<double> gaussian_window() {
  std::vector<double> g(kSsimWindow);
  double s = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double u = i - kSsimWindow / 2;
    g[i] = std::exp(-u * u / (2.0 * 1.5 * 1.5));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

// Separable valid-mode filter: (H-10) x (W-10) output.
std::vector<double> filter_valid(const std::vector<double>& in, int w, int h,
                                 const std::vector<double>& g) {
  const int k = kSsimWindow, wo = w - k + 1, ho = h - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * wo);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wo; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += g[i] * in[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * wo + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ho) * wo);
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += g[i] * rows[static_cast<std::size_t>(y + i) * wo + x];
      out[static_cast<std::size_t>(y) * wo + x] = acc;
    }
  return out;
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "ssim");
  require(a.width() >= kSsimWindow && a.height() >= kSsimWindow, ErrorCode::kInvalidArgument,
          "ssim needs images of at least 11x11, got " + std::to_string(a.width()) + "x" +
              std::to_string(a.height()));
  const int w = a.width(), h = a.height();
  const auto g = gaussian_window();
  const auto x = luma(a), y = luma(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, w, h, g), my = filter_valid(y, w, h, g);
  const auto sxx = filter_valid(xx, w, h, g), syy = filter_valid(yy, w, h, g);
  const auto sxy = filter_valid(xy, w, h, g);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

void MetricReport::add(std::string id, const ImageBuffer& restored, const ImageBuffer& reference) {
  rows.push_back({std::move(id), psnr(restored, reference), ssim(restored, reference)});
}

double MetricReport::mean_psnr() const {
  double s = 0.0;
  for (const auto& r : rows) s += r.psnr_db;
  return rows.empty() ? 0.0 : s / rows.size();
}

double MetricReport::mean_ssim() const {
  double s = 0.0;
  for (const auto& r : rows) s += r.ssim;
  return rows.empty() ? 0.0 : s / rows.size();
}

void MetricReport::write_tsv(std::ostream& out) const {
  char buf[64];
  out << "# ssim=" << kSsimConvention << "\n";
  out << "id\tpsnr_db\tssim\n";
  auto line = [&](const std::string& id, double p, double s) {
    std::snprintf(buf, sizeof buf, "\t%.6f\t%.6f\n", p, s);
    out << id << buf;
  };
  for (const auto& r : rows) line(r.id, r.psnr_db, r.ssim);
  line("mean", mean_psnr(), mean_ssim());
}

void MetricReport::save(const std::string& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write report " + path);
  write_tsv(out);
}

}  // namespace sf
