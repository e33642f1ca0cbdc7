#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "jscc/chain.hpp"
#include "jscc/dataset.hpp"
#include "jscc/rng.hpp"

namespace jscc {

// Separate source/channel-coding pipeline: 8x8 block DCT with fixed-length
// coefficient packing as the source code, Hamming(7,4) as the channel code,
// Gray-labeled M-QAM as the bit mapper. Deliberately simple; its purpose is
// to exhibit the cliff effect, not to compete on rate-distortion.

using BitVec = std::vector<uint8_t>;  // one bit per element, values 0/1

struct SeparateConfig {
  double quality = 1.0;       // scales quantization steps down (finer) as q grows
  bool hamming = true;        // Hamming(7,4) on, else uncoded
  int modulation_order = 4;   // M in {4,16,64,256}
  int dc_bits = 9;            // unsigned DC level width
  std::vector<int> ac_bits = {6, 6, 5, 5, 4, 4, 3, 3};  // sign+magnitude widths,
                                                        // zigzag order
  // Per-symbol fading models an ideally interleaved bit pipeline; without
  // interleaving a slow-fading average smears the decoding threshold.
  FadingMode fading = FadingMode::PerSymbol;
};

struct SourceDecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bit-exact deterministic bitstream: header (magic, dims, quality, CRC-16 of
// the payload) followed by fixed-length packed DCT levels. Image dims must
// be multiples of 8.
BitVec source_encode(const Image& img, const SeparateConfig& cfg);
// Throws SourceDecodeError on bad magic, bad dims, or CRC mismatch.
Image source_decode(const BitVec& bits, const SeparateConfig& cfg);

// Hamming(7,4): input padded with zeros to a multiple of 4.
BitVec hamming74_encode(const BitVec& bits);
struct HammingDecodeResult {
  BitVec bits;
  int corrected = 0;  // single-bit corrections applied
};
HammingDecodeResult hamming74_decode(const BitVec& coded);

// Gray-labeled square M-QAM for bit pipelines (per-axis reflected Gray
// code). Bits are padded with zeros to a multiple of log2(M).
std::vector<cplx> gray_modulate(const BitVec& bits, int order);
BitVec gray_demodulate(const std::vector<cplx>& symbols, int order);

// Ideal bit interleaver: symbol t carries bits {t, t+n, t+2n, ...} of the
// coded stream (n = symbol count), so a codeword's bits never share one
// fading realization. Zero-pads to a whole number of symbols.
BitVec interleave_bits(const BitVec& bits, int order);
BitVec deinterleave_bits(const BitVec& bits, int order, size_t original_size);

struct SeparateResult {
  Image reconstruction;
  double bit_error_rate = 0.0;  // on info bits, after channel decoding
  bool decode_failed = false;   // mid-gray fallback used
  int info_bits = 0;
  int channel_symbols = 0;
};

// Full pipeline over fading + AWGN at the given SNR. On source-decode
// failure the reconstruction is the mid-gray image.
SeparateResult separate_transmit(const Image& img, const SeparateConfig& cfg,
                                 double snr_db, Rng& rng);

Image mid_gray_image(int h, int w, int c);

}  // namespace jscc
