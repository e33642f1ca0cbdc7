#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "jscc/chain.hpp"
#include "jscc/model.hpp"
#include "jscc/rng.hpp"

using namespace jscc;

TEST_CASE("constellations have unit average power") {
  for (int m : {4, 16, 64, 256}) {
    Constellation c = Constellation::make(m);
    REQUIRE((int)c.points.size() == m);
    double p = 0.0;
    for (auto s : c.points) p += std::norm(s);
    p /= m;
    CHECK(p == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("snake indexing: consecutive indices are grid neighbors") {
  for (int m : {4, 16, 64, 256}) {
    Constellation c = Constellation::make(m);
    int side = (int)std::lround(std::sqrt((double)m));
    double step = 2.0 / std::sqrt(2.0 * (m - 1) / 3.0);  // lattice spacing
    for (int j = 0; j + 1 < m; ++j) {
      double d = std::abs(c.points[j + 1] - c.points[j]);
      CHECK(d == doctest::Approx(step).epsilon(1e-9));
    }
    (void)side;
  }
}

TEST_CASE("index 0 sits at the bottom-left corner") {
  Constellation c = Constellation::make(4);
  // For M=4 the scale is 1/sqrt(2): points at (+-1 +-1i)/sqrt(2)
  CHECK(c.points[0].real() == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(c.points[0].imag() == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
  // bottom row runs left to right
  CHECK(c.points[1].real() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(c.points[1].imag() == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("unsupported order is rejected") {
  CHECK(supported_order(16));
  CHECK_FALSE(supported_order(32));
  CHECK_THROWS(Constellation::make(32));
}

TEST_CASE("quantizer hand cases") {
  std::vector<double> z{0.37, 0.0, 0.999, 1.0, 0.25};
  auto q4 = quantize(z, 4);
  CHECK(q4[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(q4[1] == 0.0);
  CHECK(q4[2] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(q4[3] == doctest::Approx(0.75).epsilon(1e-15));  // 1.0 clamps to (M-1)/M
  CHECK(q4[4] == doctest::Approx(0.25).epsilon(1e-15));
  auto q256 = quantize(z, 256);
  CHECK(q256[0] == doctest::Approx(std::floor(0.37 * 256) / 256).epsilon(1e-15));
}

TEST_CASE("quantization error bound on a million values") {
  Rng rng(1234);
  for (int m : {4, 256}) {
    double worst = 0.0;
    std::vector<double> z(1000000);
    for (auto& v : z) v = rng.uniform();
    auto q = quantize(z, m);
    for (size_t i = 0; i < z.size(); ++i)
      worst = std::max(worst, std::abs(z[i] - q[i]));
    CHECK(worst < 1.0 / m);
  }
}

TEST_CASE("modulate maps lattice values to points and normalizes block power") {
  Constellation c = Constellation::make(4);
  // indices 0,1,2,3 exactly once: already unit power, scale stays 1
  std::vector<double> z{0.0, 0.25, 0.5, 0.75};
  ModulatedBlock b = modulate(z, c);
  CHECK(b.block_scale == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 4; ++i) {
    CHECK(b.symbols[i].real() == doctest::Approx(c.points[i].real()).epsilon(1e-12));
    CHECK(b.symbols[i].imag() == doctest::Approx(c.points[i].imag()).epsilon(1e-12));
  }
  // all-zero block: every symbol is the corner point, power 1 after scaling
  std::vector<double> zeros(8, 0.0);
  ModulatedBlock b2 = modulate(zeros, c);
  double p = 0.0;
  for (auto s : b2.symbols) p += std::norm(s);
  CHECK(p / 8 == doctest::Approx(1.0).epsilon(1e-12));

  // off-lattice input is rejected
  std::vector<double> bad{0.3};
  CHECK_THROWS(modulate(bad, c));
}

TEST_CASE("transmit with an ideal channel and zero noise is the identity") {
  Constellation c = Constellation::make(16);
  std::vector<double> z{0.0, 0.25, 0.5, 0.9375};
  ModulatedBlock b = modulate(z, c);
  ChannelRealization ch = ideal_channel();
  Rng rng(1);
  auto y = transmit(b.symbols, ch, rng);
  for (size_t i = 0; i < y.size(); ++i) {
    CHECK(y[i].real() == doctest::Approx(b.symbols[i].real()).epsilon(1e-15));
    CHECK(y[i].imag() == doctest::Approx(b.symbols[i].imag()).epsilon(1e-15));
  }
}

TEST_CASE("measured channel SNR matches the configured SNR") {
  // unit-power symbols through fading+noise; SNR = P / sigma^2
  Rng rng(77);
  double snr_db = 10.0;
  size_t n = 1000000;
  std::vector<cplx> s(n, cplx(1.0, 0.0));
  ChannelRealization ch = sample_channel(snr_db, FadingMode::PerSymbol, n, rng);
  auto y = transmit(s, ch, rng);
  double noise_power = 0.0;
  for (size_t i = 0; i < n; ++i) noise_power += std::norm(y[i] - ch.gain(i) * s[i]);
  noise_power /= n;
  double measured_db = 10.0 * std::log10(1.0 / noise_power);
  CHECK(measured_db == doctest::Approx(snr_db).epsilon(0.02));
  // fading has unit mean square
  double hp = 0.0;
  for (size_t i = 0; i < n; ++i) hp += std::norm(ch.gain(i));
  CHECK(hp / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("equalize inverts the fade exactly under zero noise") {
  Rng rng(5);
  Constellation c = Constellation::make(64);
  std::vector<double> z;
  for (int i = 0; i < 64; ++i) z.push_back(i / 64.0);
  ModulatedBlock b = modulate(z, c);
  for (int trial = 0; trial < 10000; ++trial) {
    ChannelRealization ch = sample_channel(25.0, FadingMode::PerImage, z.size(), rng);
    ch.sigma2 = 0.0;  // zero noise, keep the fade
    auto y = transmit(b.symbols, ch, rng);
    auto eq = equalize(y, ch);
    double worst = 0.0;
    for (size_t i = 0; i < eq.size(); ++i)
      worst = std::max(worst, std::abs(eq[i] - b.symbols[i]));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("noiseless round trip is the identity on the lattice, all orders") {
  Rng rng(9);
  for (int m : {4, 16, 64, 256}) {
    Constellation c = Constellation::make(m);
    std::vector<double> z(2048);
    for (auto& v : z) v = rng.uniform();
    auto zbar = quantize(z, m);
    ModulatedBlock b = modulate(zbar, c);
    ChannelRealization ch = sample_channel(20.0, FadingMode::PerImage, z.size(), rng);
    ch.sigma2 = 0.0;
    auto y = transmit(b.symbols, ch, rng);
    auto eq = equalize(y, ch);
    auto zhat = demodulate(eq, c, b.block_scale);
    for (size_t i = 0; i < z.size(); ++i) CHECK(zhat[i] == zbar[i]);
  }
}

TEST_CASE("demodulation ties break toward the lower index") {
  Constellation c = Constellation::make(4);
  // midpoint between points 0 and 1 (bottom edge)
  cplx mid = (c.points[0] + c.points[1]) / 2.0;
  auto zhat = demodulate({mid}, c, 1.0);
  CHECK(zhat[0] == 0.0);  // index 0, value 0/4
}

TEST_CASE("QPSK symbol error rate over per-symbol fading matches closed form") {
  // Per-axis bit error for coherent QPSK with Rayleigh fading and perfect
  // equalization: p = (1 - sqrt(g/(1+g)))/2 with g = SNR/2 per axis.
  // Symbol errors: 1 - (1-p)^2.
  double snr_db = 10.0;
  double g = std::pow(10.0, snr_db / 10.0) / 2.0;
  double p_axis = 0.5 * (1.0 - std::sqrt(g / (1.0 + g)));
  double ser_theory = 1.0 - (1.0 - p_axis) * (1.0 - p_axis);

  Rng rng(31);
  Constellation c = Constellation::make(4);
  size_t n = 1000000;
  std::vector<double> z(n);
  for (auto& v : z) v = rng.uniform();
  auto zbar = quantize(z, 4);
  ModulatedBlock b = modulate(zbar, c);
  ChannelRealization ch = sample_channel(snr_db, FadingMode::PerSymbol, n, rng);
  auto y = transmit(b.symbols, ch, rng);
  auto eq = equalize(y, ch);
  auto zhat = demodulate(eq, c, b.block_scale);
  size_t errors = 0;
  for (size_t i = 0; i < n; ++i)
    if (zhat[i] != zbar[i]) ++errors;
  double ser = (double)errors / n;
  CHECK(ser == doctest::Approx(ser_theory).epsilon(0.10));
}

TEST_CASE("analog path with zero noise is the identity and is differentiable") {
  Rng rng(3);
  Tensor z = Tensor::from_data({1, 4}, {0.1, 0.4, 0.6, 0.9}, true);
  ChannelRealization ch = ideal_channel();
  Tensor out = analog_path(z, ch, rng);
  CHECK(out.data() == z.data());
  mse_loss(out, Tensor::zeros({1, 4})).backward();
  // d mean((z+0)^2) / dz = 2z/4
  CHECK(z.grad()[0] == doctest::Approx(2.0 * 0.1 / 4.0).epsilon(1e-12));
  CHECK(z.grad()[3] == doctest::Approx(2.0 * 0.9 / 4.0).epsilon(1e-12));
}

TEST_CASE("analog noise variance follows sigma^2 / |h|^2") {
  // Monte-Carlo: per-image fade, measure E[(z_tilde - z)^2] * |h|^2 / sigma2.
  Rng rng(13);
  double snr_db = 10.0;
  double sigma2 = std::pow(10.0, -snr_db / 10.0);
  double ratio_sum = 0.0;
  int trials = 2000;
  int k = 64;
  Tensor z = Tensor::zeros({1, k});
  for (int t = 0; t < trials; ++t) {
    ChannelRealization ch = sample_channel(snr_db, FadingMode::PerImage, k, rng);
    Tensor out = analog_path(z, ch, rng);
    double mse = 0.0;
    for (double v : out.data()) mse += v * v;
    mse /= k;
    ratio_sum += mse * std::norm(ch.gain(0)) / sigma2;
  }
  CHECK(ratio_sum / trials == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("deep fades are resampled so equalization stays finite") {
  Rng rng(17);
  for (int t = 0; t < 10000; ++t) {
    ChannelRealization ch = sample_channel(0.0, FadingMode::PerImage, 4, rng);
    CHECK(std::abs(ch.gain(0)) >= 1e-6);
  }
}

TEST_CASE("digital inference with zero noise equals decode(quantize(encode(x)))") {
  TrainedModel model = init_model(default_spec(), 21);
  Rng img_rng(2);
  Tensor x({1, 3, 32, 32}, false);
  for (auto& v : x.data()) v = img_rng.uniform();

  for (int m : {4, 256}) {
    Rng rng(55);
    // very high SNR stands in for noiseless; fade is equalized away
    DigitalResult res = digital_inference(model, x, m, 300.0, FadingMode::PerImage, rng);
    Tensor z = encode(model, x, false);
    auto zbar = quantize(z.data(), m);
    Tensor zq = Tensor::from_data(z.shape(), zbar);
    Tensor ref = decode(model, zq, false);
    double worst = 0.0;
    for (size_t i = 0; i < ref.data().size(); ++i)
      worst = std::max(worst, std::abs(ref.data()[i] - res.reconstruction.data()[i]));
    CHECK(worst < 1e-9);
    CHECK(res.diagnostics.symbol_error_rate == 0.0);
    CHECK(res.diagnostics.max_abs_eps_q < 1.0 / m);
  }
}

TEST_CASE("chain diagnostics report quantization and channel errors") {
  TrainedModel model = init_model(default_spec(), 22);
  Rng img_rng(3);
  Tensor x({1, 3, 32, 32}, false);
  for (auto& v : x.data()) v = img_rng.uniform();
  Rng rng(7);
  DigitalResult res = digital_inference(model, x, 4, 5.0, FadingMode::PerImage, rng);
  CHECK(res.diagnostics.mean_abs_eps_q > 0.0);
  CHECK(res.diagnostics.max_abs_eps_q < 0.25);
  // at 5 dB with M=4 some symbol errors are essentially certain over k=2048
  CHECK(res.diagnostics.symbol_error_rate > 0.0);
  CHECK(res.diagnostics.mean_abs_eps_c > 0.0);
}
