#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "jscc/model.hpp"
#include "jscc/rng.hpp"
#include "jscc/tensor.hpp"

namespace jscc {

using cplx = std::complex<double>;

// Square M-QAM grid scaled to unit average power, indexed along a snake
// (boustrophedon) path so consecutive quantization levels sit on adjacent
// constellation points. Index 0 is the bottom-left corner (most negative
// real and imaginary parts); the bottom row runs left to right.
struct Constellation {
  int order = 0;                // M in {4,16,64,256}
  std::vector<cplx> points;     // points[j] = C_j

  static Constellation make(int order);
};

bool supported_order(int m);

enum class FadingMode { PerImage, PerSymbol };

// One sampled channel: complex Rayleigh gain(s) with E|h|^2 = 1 plus the
// AWGN variance implied by the SNR. sigma2 = P / 10^(snr/10) with P = 1.
struct ChannelRealization {
  std::vector<cplx> h;   // length 1 (per-image constant) or k (per-symbol)
  double sigma2 = 0.0;   // total complex noise variance (sigma2/2 per dim)
  double snr_db = 0.0;
  FadingMode mode = FadingMode::PerImage;
  int resampled_fades = 0;  // |h| floor events, logged

  cplx gain(size_t i) const { return h.size() == 1 ? h[0] : h[i]; }
};

// Samples h with the declared rng; |h| below 1e-6 is re-drawn (and counted)
// so ideal equalization stays finite.
ChannelRealization sample_channel(double snr_db, FadingMode mode, size_t symbols,
                                  Rng& rng);
// Noiseless unit channel, for transparent-chain checks.
ChannelRealization ideal_channel();

struct ChainDiagnostics {
  double mean_abs_eps_q = 0.0;  // |z_bar - z|
  double max_abs_eps_q = 0.0;
  double mean_abs_eps_c = 0.0;  // |z_hat - z_bar|
  double symbol_error_rate = 0.0;
};

// z_bar_i = floor(z_i * M) / M; inputs exactly 1.0 clamp to (M-1)/M.
std::vector<double> quantize(const std::vector<double>& z, int order);

struct ModulatedBlock {
  std::vector<cplx> symbols;  // after block power normalization
  double block_scale = 1.0;   // factor applied so (1/k) sum |s|^2 == P
};

// Maps lattice values to constellation points, then scales the whole block
// so its empirical average power is exactly P = 1.
ModulatedBlock modulate(const std::vector<double>& z_bar, const Constellation& c);

// y = h .* s + n
std::vector<cplx> transmit(const std::vector<cplx>& s, const ChannelRealization& ch,
                           Rng& rng);

// y ./ h (perfect channel state information)
std::vector<cplx> equalize(const std::vector<cplx>& y, const ChannelRealization& ch);

// Undoes the block scale, then nearest-point demapping; ties break toward
// the lower index. Returns z_hat values on the 1/M lattice.
std::vector<double> demodulate(const std::vector<cplx>& y_eq, const Constellation& c,
                               double block_scale);

// Training-time analog channel: z_tilde = z + nu with nu real Gaussian of
// variance sigma2/|h|^2 per entry (the equalized-noise magnitude).
// Differentiable w.r.t. z; the noise is a constant on the tape.
Tensor analog_path(const Tensor& z, const ChannelRealization& ch, Rng& rng);

struct DigitalResult {
  Tensor reconstruction;  // [N,C,H,W] in (0,1)
  ChainDiagnostics diagnostics;
};

// Full deployment chain for a batch: encode -> quantize -> modulate ->
// fade+noise -> equalize -> demodulate -> decode. One channel realization
// per image (per-symbol fading inside an image when mode says so).
DigitalResult digital_inference(TrainedModel& model, const Tensor& x, int order,
                                double snr_db, FadingMode mode, Rng& rng);

}  // namespace jscc
