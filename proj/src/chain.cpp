#include "jscc/chain.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace jscc {

bool supported_order(int m) { return m == 4 || m == 16 || m == 64 || m == 256; }

Constellation Constellation::make(int order) {
  if (!supported_order(order))
    throw std::invalid_argument("unsupported QAM order " + std::to_string(order));
  int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
  // odd-integer lattice scaled to unit average power:
  // E|c|^2 over the grid = 2(M-1)/3
  double scale = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
  Constellation c;
  c.order = order;
  c.points.resize(order);
  for (int row = 0; row < side; ++row) {
    double im = (2 * row - (side - 1)) * scale;
    for (int pos = 0; pos < side; ++pos) {
      int col = (row % 2 == 0) ? pos : side - 1 - pos;  // snake
      double re = (2 * col - (side - 1)) * scale;
      c.points[row * side + pos] = cplx(re, im);
    }
  }
  return c;
}

namespace {

constexpr double kGainFloor = 1e-6;

cplx draw_gain(Rng& rng, int& resampled) {
  for (;;) {
    cplx h(rng.gaussian(0.0, std::sqrt(0.5)), rng.gaussian(0.0, std::sqrt(0.5)));
    if (std::abs(h) >= kGainFloor) return h;
    ++resampled;
  }
}

}  // namespace

ChannelRealization sample_channel(double snr_db, FadingMode mode, size_t symbols,
                                  Rng& rng) {
  ChannelRealization ch;
  ch.snr_db = snr_db;
  ch.mode = mode;
  ch.sigma2 = std::pow(10.0, -snr_db / 10.0);  // P = 1
  size_t count = mode == FadingMode::PerImage ? 1 : symbols;
  ch.h.reserve(count);
  for (size_t i = 0; i < count; ++i) ch.h.push_back(draw_gain(rng, ch.resampled_fades));
  return ch;
}

ChannelRealization ideal_channel() {
  ChannelRealization ch;
  ch.h = {cplx(1.0, 0.0)};
  ch.sigma2 = 0.0;
  ch.snr_db = std::numeric_limits<double>::infinity();
  return ch;
}

std::vector<double> quantize(const std::vector<double>& z, int order) {
  if (!supported_order(order))
    throw std::invalid_argument("quantize: unsupported order " + std::to_string(order));
  std::vector<double> out(z.size());
  for (size_t i = 0; i < z.size(); ++i) {
    if (z[i] < 0.0 || z[i] > 1.0)
      throw std::invalid_argument("quantize: value outside [0,1]");
    int idx = static_cast<int>(std::floor(z[i] * order));
    if (idx > order - 1) idx = order - 1;  // z == 1.0 saturation
    out[i] = static_cast<double>(idx) / order;
  }
  return out;
}

ModulatedBlock modulate(const std::vector<double>& z_bar, const Constellation& c) {
  if (z_bar.empty()) throw std::invalid_argument("modulate: empty block");
  ModulatedBlock b;
  b.symbols.resize(z_bar.size());
  double power = 0.0;
  for (size_t i = 0; i < z_bar.size(); ++i) {
    double scaled = z_bar[i] * c.order;
    int idx = static_cast<int>(std::lround(scaled));
    if (std::abs(scaled - idx) > 1e-9 || idx < 0 || idx >= c.order)
      throw std::invalid_argument("modulate: value not on the 1/M quantization lattice");
    b.symbols[i] = c.points[idx];
    power += std::norm(b.symbols[i]);
  }
  power /= z_bar.size();
  b.block_scale = 1.0 / std::sqrt(power);  // sqrt(P)/sqrt(empirical power), P = 1
  for (auto& s : b.symbols) s *= b.block_scale;
  return b;
}

std::vector<cplx> transmit(const std::vector<cplx>& s, const ChannelRealization& ch,
                           Rng& rng) {
  std::vector<cplx> y(s.size());
  double dim_std = std::sqrt(ch.sigma2 / 2.0);
  for (size_t i = 0; i < s.size(); ++i) {
    cplx n = ch.sigma2 > 0.0
                 ? cplx(rng.gaussian(0.0, dim_std), rng.gaussian(0.0, dim_std))
                 : cplx(0.0, 0.0);
    y[i] = ch.gain(i) * s[i] + n;
  }
  return y;
}

std::vector<cplx> equalize(const std::vector<cplx>& y, const ChannelRealization& ch) {
  std::vector<cplx> out(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    cplx h = ch.gain(i);
    if (std::abs(h) < kGainFloor)
      throw std::domain_error("equalize: channel gain below floor");
    out[i] = y[i] / h;
  }
  return out;
}

std::vector<double> demodulate(const std::vector<cplx>& y_eq, const Constellation& c,
                               double block_scale) {
  std::vector<double> z_hat(y_eq.size());
  for (size_t i = 0; i < y_eq.size(); ++i) {
    cplx v = y_eq[i] / block_scale;
    int best = 0;
    double best_d = std::norm(v - c.points[0]);
    for (int j = 1; j < c.order; ++j) {
      double d = std::norm(v - c.points[j]);
      if (d < best_d) {  // strict: ties keep the lower index
        best_d = d;
        best = j;
      }
    }
    z_hat[i] = static_cast<double>(best) / c.order;
  }
  return z_hat;
}

Tensor analog_path(const Tensor& z, const ChannelRealization& ch, Rng& rng) {
  Tensor noise = Tensor::zeros(z.shape());
  if (ch.sigma2 > 0.0) {
    auto& nd = noise.data();
    int64_t cols = z.shape().back();
    for (int64_t i = 0; i < z.size(); ++i) {
      double mag = std::abs(ch.gain(static_cast<size_t>(i % cols)));
      nd[i] = rng.gaussian(0.0, std::sqrt(ch.sigma2) / mag);
    }
  }
  return add(z, noise);
}

DigitalResult digital_inference(TrainedModel& model, const Tensor& x, int order,
                                double snr_db, FadingMode mode, Rng& rng) {
  if (!supported_order(order))
    throw std::invalid_argument("digital_inference: unsupported order " +
                                std::to_string(order));
  Constellation c = Constellation::make(order);
  Tensor z = encode(model, x, /*training=*/false);
  int n = z.shape()[0];
  int k = z.shape()[1];
  Tensor z_hat_t = Tensor::zeros({n, k});
  ChainDiagnostics diag;
  int64_t symbols = 0, errors = 0;
  double sum_eq = 0.0, sum_ec = 0.0;
  for (int img = 0; img < n; ++img) {
    std::vector<double> zi(z.data().begin() + (int64_t)img * k,
                           z.data().begin() + (int64_t)(img + 1) * k);
    std::vector<double> z_bar = quantize(zi, order);
    ModulatedBlock block = modulate(z_bar, c);
    ChannelRealization ch = sample_channel(snr_db, mode, z_bar.size(), rng);
    std::vector<cplx> y = transmit(block.symbols, ch, rng);
    std::vector<cplx> y_eq = equalize(y, ch);
    std::vector<double> z_hat = demodulate(y_eq, c, block.block_scale);
    for (int i = 0; i < k; ++i) {
      double eq = z_bar[i] - zi[i];
      double ec = z_hat[i] - z_bar[i];
      sum_eq += std::abs(eq);
      sum_ec += std::abs(ec);
      diag.max_abs_eps_q = std::max(diag.max_abs_eps_q, std::abs(eq));
      if (z_hat[i] != z_bar[i]) ++errors;
      z_hat_t.data()[(int64_t)img * k + i] = z_hat[i];
    }
    symbols += k;
  }
  diag.mean_abs_eps_q = sum_eq / symbols;
  diag.mean_abs_eps_c = sum_ec / symbols;
  diag.symbol_error_rate = static_cast<double>(errors) / symbols;
  DigitalResult result;
  result.reconstruction = decode(model, z_hat_t, /*training=*/false);
  result.diagnostics = diag;
  return result;
}

}  // namespace jscc
