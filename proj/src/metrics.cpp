#include "jscc/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace jscc {

namespace {

constexpr double kMax = 255.0;

void check_same_size(size_t a, size_t b, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

double psnr(const std::vector<double>& x, const std::vector<double>& x_hat) {
  check_same_size(x.size(), x_hat.size(), "psnr");
  if (x.empty()) throw std::invalid_argument("psnr: empty input");
  double mse = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - x_hat[i];
    mse += d * d;
  }
  mse /= x.size();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kMax * kMax / mse);
}

double psnr(const Tensor& x, const Tensor& x_hat) {
  if (x.shape() != x_hat.shape()) throw std::invalid_argument("psnr: shape mismatch");
  return psnr(x.data(), x_hat.data());
}

namespace {

double ssim_from_stats(double mu_x, double mu_y, double var_x, double var_y,
                       double cov, const SsimConfig& cfg) {
  return ((2.0 * mu_x * mu_y + cfg.c1) * (2.0 * cov + cfg.c2)) /
         ((mu_x * mu_x + mu_y * mu_y + cfg.c1) * (var_x + var_y + cfg.c2));
}

double ssim_global(const double* x, const double* y, int64_t n, const SsimConfig& cfg) {
  double mx = 0.0, my = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
    cov += (x[i] - mx) * (y[i] - my);
  }
  vx /= n;
  vy /= n;
  cov /= n;
  return ssim_from_stats(mx, my, vx, vy, cov, cfg);
}

double ssim_sliding(const double* x, const double* y, int h, int w,
                    const SsimConfig& cfg) {
  int win = cfg.window;
  if (win > h || win > w)
    throw std::invalid_argument("ssim: window larger than image");
  // normalized Gaussian window
  std::vector<double> g(win);
  int half = win / 2;
  double sum = 0.0;
  for (int i = 0; i < win; ++i) {
    double d = i - half;
    g[i] = std::exp(-d * d / (2.0 * cfg.sigma * cfg.sigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;

  double total = 0.0;
  int count = 0;
  for (int oy = 0; oy + win <= h; ++oy)
    for (int ox = 0; ox + win <= w; ++ox) {
      double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          double wgt = g[i] * g[j];
          double xv = x[(oy + i) * w + ox + j];
          double yv = y[(oy + i) * w + ox + j];
          mx += wgt * xv;
          my += wgt * yv;
          sxx += wgt * xv * xv;
          syy += wgt * yv * yv;
          sxy += wgt * xv * yv;
        }
      double vx = sxx - mx * mx;
      double vy = syy - my * my;
      double cov = sxy - mx * my;
      total += ssim_from_stats(mx, my, vx, vy, cov, cfg);
      ++count;
    }
  return total / count;
}

}  // namespace

double ssim(const std::vector<double>& x, const std::vector<double>& x_hat, int h,
            int w, const SsimConfig& cfg) {
  check_same_size(x.size(), x_hat.size(), "ssim");
  if (static_cast<int64_t>(x.size()) != static_cast<int64_t>(h) * w)
    throw std::invalid_argument("ssim: data does not match H*W");
  if (cfg.global_stats) return ssim_global(x.data(), x_hat.data(), x.size(), cfg);
  return ssim_sliding(x.data(), x_hat.data(), h, w, cfg);
}

double ssim(const Tensor& x, const Tensor& x_hat, const SsimConfig& cfg) {
  if (x.shape() != x_hat.shape()) throw std::invalid_argument("ssim: shape mismatch");
  const auto& shape = x.shape();
  if (shape.size() < 2) throw std::invalid_argument("ssim: need at least 2-D input");
  int w = shape.back();
  int h = shape[shape.size() - 2];
  int64_t planes = x.size() / ((int64_t)h * w);
  double total = 0.0;
  for (int64_t p = 0; p < planes; ++p) {
    std::vector<double> a(x.data().begin() + p * h * w, x.data().begin() + (p + 1) * h * w);
    std::vector<double> b(x_hat.data().begin() + p * h * w,
                          x_hat.data().begin() + (p + 1) * h * w);
    total += ssim(a, b, h, w, cfg);
  }
  return total / planes;
}

BatchMetrics batch_metrics(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("batch_metrics: empty input");
  BatchMetrics out;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (const auto& [p, s] : pairs) {
    if (std::isinf(p)) {
      ++out.infinite_psnr;
    } else {
      psnr_sum += p;
      ++out.count;
    }
    ssim_sum += s;
  }
  out.mean_psnr = out.count > 0 ? psnr_sum / out.count
                                : std::numeric_limits<double>::infinity();
  out.mean_ssim = ssim_sum / pairs.size();
  return out;
}

}  // namespace jscc
