#include "jscc/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jscc {

namespace {

constexpr int kBlock = 8;
constexpr uint8_t kStreamMagic = 0xA5;

// ---------------------------------------------------------------------------
// 8x8 orthonormal DCT-II

struct DctTables {
  double cosv[kBlock][kBlock];  // cos((2x+1) u pi / 16)
  double alpha[kBlock];
  DctTables() {
    for (int u = 0; u < kBlock; ++u) {
      alpha[u] = u == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int x = 0; x < kBlock; ++x)
        cosv[x][u] = std::cos((2 * x + 1) * u * M_PI / (2.0 * kBlock));
    }
  }
};

const DctTables& tables() {
  static DctTables t;
  return t;
}

void dct2d(const double in[kBlock][kBlock], double out[kBlock][kBlock]) {
  const auto& t = tables();
  double tmp[kBlock][kBlock];
  for (int y = 0; y < kBlock; ++y)
    for (int u = 0; u < kBlock; ++u) {
      double s = 0.0;
      for (int x = 0; x < kBlock; ++x) s += in[y][x] * t.cosv[x][u];
      tmp[y][u] = t.alpha[u] * s;
    }
  for (int u = 0; u < kBlock; ++u)
    for (int v = 0; v < kBlock; ++v) {
      double s = 0.0;
      for (int y = 0; y < kBlock; ++y) s += tmp[y][u] * t.cosv[y][v];
      out[v][u] = t.alpha[v] * s;
    }
}

void idct2d(const double in[kBlock][kBlock], double out[kBlock][kBlock]) {
  const auto& t = tables();
  double tmp[kBlock][kBlock];
  for (int v = 0; v < kBlock; ++v)
    for (int x = 0; x < kBlock; ++x) {
      double s = 0.0;
      for (int u = 0; u < kBlock; ++u) s += t.alpha[u] * in[v][u] * t.cosv[x][u];
      tmp[v][x] = s;
    }
  for (int x = 0; x < kBlock; ++x)
    for (int y = 0; y < kBlock; ++y) {
      double s = 0.0;
      for (int v = 0; v < kBlock; ++v) s += t.alpha[v] * tmp[v][x] * t.cosv[y][v];
      out[y][x] = s;
    }
}

const int kZigzag[64][2] = {
    {0, 0}, {0, 1}, {1, 0}, {2, 0}, {1, 1}, {0, 2}, {0, 3}, {1, 2},
    {2, 1}, {3, 0}, {4, 0}, {3, 1}, {2, 2}, {1, 3}, {0, 4}, {0, 5},
    {1, 4}, {2, 3}, {3, 2}, {4, 1}, {5, 0}, {6, 0}, {5, 1}, {4, 2},
    {3, 3}, {2, 4}, {1, 5}, {0, 6}, {0, 7}, {1, 6}, {2, 5}, {3, 4},
    {4, 3}, {5, 2}, {6, 1}, {7, 0}, {7, 1}, {6, 2}, {5, 3}, {4, 4},
    {3, 5}, {2, 6}, {1, 7}, {2, 7}, {3, 6}, {4, 5}, {5, 4}, {6, 3},
    {7, 2}, {7, 3}, {6, 4}, {5, 5}, {4, 6}, {3, 7}, {4, 7}, {5, 6},
    {6, 5}, {7, 4}, {7, 5}, {6, 6}, {5, 7}, {6, 7}, {7, 6}, {7, 7}};

double dc_step(const SeparateConfig& cfg) { return 4.0 / cfg.quality; }
double ac_step(const SeparateConfig& cfg) { return 16.0 / cfg.quality; }

// ---------------------------------------------------------------------------
// bit packing

struct BitWriter {
  BitVec bits;
  void put(uint32_t value, int width) {
    for (int i = width - 1; i >= 0; --i) bits.push_back((value >> i) & 1);
  }
};

struct BitReader {
  const BitVec& bits;
  size_t pos = 0;
  explicit BitReader(const BitVec& b) : bits(b) {}
  uint32_t get(int width) {
    if (pos + width > bits.size()) throw SourceDecodeError("bitstream underrun");
    uint32_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 1) | bits[pos++];
    return v;
  }
};

uint16_t crc16(const BitVec& bits) {
  // CRC-16-CCITT over the bit sequence
  uint16_t crc = 0xFFFF;
  for (uint8_t b : bits) {
    crc ^= static_cast<uint16_t>(b) << 15;
    crc = (crc & 0x8000) ? static_cast<uint16_t>((crc << 1) ^ 0x1021)
                         : static_cast<uint16_t>(crc << 1);
  }
  return crc;
}

int32_t clamp_level(double v, int32_t lo, int32_t hi) {
  int32_t q = static_cast<int32_t>(std::lround(v));
  return std::min(hi, std::max(lo, q));
}

}  // namespace

BitVec source_encode(const Image& img, const SeparateConfig& cfg) {
  if (img.h % kBlock != 0 || img.w % kBlock != 0)
    throw std::invalid_argument("source_encode: dims must be multiples of 8");
  if (cfg.quality <= 0.0) throw std::invalid_argument("source_encode: quality <= 0");
  BitWriter payload;
  double in[kBlock][kBlock], coef[kBlock][kBlock];
  for (int c = 0; c < img.c; ++c)
    for (int by = 0; by < img.h; by += kBlock)
      for (int bx = 0; bx < img.w; bx += kBlock) {
        for (int y = 0; y < kBlock; ++y)
          for (int x = 0; x < kBlock; ++x)
            in[y][x] = img.data[((size_t)c * img.h + by + y) * img.w + bx + x] * 255.0;
        dct2d(in, coef);
        // DC is non-negative for non-negative pixels
        uint32_t dc_max = (1u << cfg.dc_bits) - 1;
        payload.put(static_cast<uint32_t>(
                        clamp_level(coef[0][0] / dc_step(cfg), 0, (int32_t)dc_max)),
                    cfg.dc_bits);
        for (size_t i = 0; i < cfg.ac_bits.size(); ++i) {
          int width = cfg.ac_bits[i];
          int32_t mag_max = (1 << (width - 1)) - 1;
          const int* uv = kZigzag[i + 1];
          int32_t level =
              clamp_level(coef[uv[0]][uv[1]] / ac_step(cfg), -mag_max, mag_max);
          payload.put(level < 0 ? 1 : 0, 1);
          payload.put(static_cast<uint32_t>(std::abs(level)), width - 1);
        }
      }

  BitWriter out;
  out.put(kStreamMagic, 8);
  out.put(static_cast<uint32_t>(img.w), 12);
  out.put(static_cast<uint32_t>(img.h), 12);
  out.put(static_cast<uint32_t>(std::lround(cfg.quality * 8.0)), 8);
  out.put(crc16(payload.bits), 16);
  out.bits.insert(out.bits.end(), payload.bits.begin(), payload.bits.end());
  return out.bits;
}

Image source_decode(const BitVec& bits, const SeparateConfig& cfg) {
  BitReader r(bits);
  if (r.get(8) != kStreamMagic) throw SourceDecodeError("bad stream magic");
  int w = static_cast<int>(r.get(12));
  int h = static_cast<int>(r.get(12));
  int q8 = static_cast<int>(r.get(8));
  if (w <= 0 || h <= 0 || w % kBlock != 0 || h % kBlock != 0)
    throw SourceDecodeError("bad dimensions in header");
  if (q8 != static_cast<int>(std::lround(cfg.quality * 8.0)))
    throw SourceDecodeError("quality field mismatch");
  uint16_t expect_crc = static_cast<uint16_t>(r.get(16));
  BitVec payload(bits.begin() + r.pos, bits.end());
  // fixed-length stream: trailing channel-padding bits are not covered
  size_t payload_len =
      (size_t)3 * (h / kBlock) * (w / kBlock) *
      (cfg.dc_bits + [&] {
        int s = 0;
        for (int b : cfg.ac_bits) s += b;
        return s;
      }());
  if (payload.size() < payload_len) throw SourceDecodeError("payload truncated");
  payload.resize(payload_len);
  if (crc16(payload) != expect_crc) throw SourceDecodeError("payload CRC mismatch");

  Image img;
  img.h = h;
  img.w = w;
  img.c = 3;
  img.data.assign((size_t)3 * h * w, 0.0);
  BitReader pr(payload);
  double coef[kBlock][kBlock], pix[kBlock][kBlock];
  for (int c = 0; c < 3; ++c)
    for (int by = 0; by < h; by += kBlock)
      for (int bx = 0; bx < w; bx += kBlock) {
        for (auto& row : coef) std::fill(std::begin(row), std::end(row), 0.0);
        coef[0][0] = pr.get(cfg.dc_bits) * dc_step(cfg);
        for (size_t i = 0; i < cfg.ac_bits.size(); ++i) {
          int width = cfg.ac_bits[i];
          int sign = pr.get(1) ? -1 : 1;
          int32_t mag = static_cast<int32_t>(pr.get(width - 1));
          const int* uv = kZigzag[i + 1];
          coef[uv[0]][uv[1]] = sign * mag * ac_step(cfg);
        }
        idct2d(coef, pix);
        for (int y = 0; y < kBlock; ++y)
          for (int x = 0; x < kBlock; ++x)
            img.data[((size_t)c * h + by + y) * w + bx + x] =
                std::min(1.0, std::max(0.0, pix[y][x] / 255.0));
      }
  return img;
}

// ---------------------------------------------------------------------------
// Hamming(7,4), parity bits at codeword positions 1, 2, 4

BitVec hamming74_encode(const BitVec& bits) {
  BitVec data = bits;
  while (data.size() % 4 != 0) data.push_back(0);
  BitVec out;
  out.reserve(data.size() / 4 * 7);
  for (size_t i = 0; i < data.size(); i += 4) {
    uint8_t d1 = data[i], d2 = data[i + 1], d3 = data[i + 2], d4 = data[i + 3];
    uint8_t p1 = d1 ^ d2 ^ d4;
    uint8_t p2 = d1 ^ d3 ^ d4;
    uint8_t p3 = d2 ^ d3 ^ d4;
    // positions 1..7: p1 p2 d1 p3 d2 d3 d4
    out.insert(out.end(), {p1, p2, d1, p3, d2, d3, d4});
  }
  return out;
}

HammingDecodeResult hamming74_decode(const BitVec& coded) {
  if (coded.size() % 7 != 0)
    throw std::invalid_argument("hamming74_decode: length not a multiple of 7");
  HammingDecodeResult res;
  res.bits.reserve(coded.size() / 7 * 4);
  for (size_t i = 0; i < coded.size(); i += 7) {
    uint8_t c[8] = {0};
    for (int j = 0; j < 7; ++j) c[j + 1] = coded[i + j];
    int s = (c[1] ^ c[3] ^ c[5] ^ c[7]) | ((c[2] ^ c[3] ^ c[6] ^ c[7]) << 1) |
            ((c[4] ^ c[5] ^ c[6] ^ c[7]) << 2);
    if (s != 0) {
      c[s] ^= 1;  // syndrome equals the error position
      ++res.corrected;
    }
    res.bits.insert(res.bits.end(), {c[3], c[5], c[6], c[7]});
  }
  return res;
}

// ---------------------------------------------------------------------------
// Gray-labeled M-QAM

namespace {

int gray_encode(int v) { return v ^ (v >> 1); }

int gray_decode(int g) {
  int v = 0;
  for (; g; g >>= 1) v ^= g;
  return v;
}

int bits_per_symbol(int order) {
  if (!supported_order(order))
    throw std::invalid_argument("bits_per_symbol: unsupported order");
  int side = static_cast<int>(std::lround(std::sqrt((double)order)));
  int bits_per_axis = 0;
  while ((1 << bits_per_axis) < side) ++bits_per_axis;
  return 2 * bits_per_axis;
}

}  // namespace

std::vector<cplx> gray_modulate(const BitVec& bits, int order) {
  if (!supported_order(order))
    throw std::invalid_argument("gray_modulate: unsupported order");
  int side = static_cast<int>(std::lround(std::sqrt((double)order)));
  int bits_per_axis = 0;
  while ((1 << bits_per_axis) < side) ++bits_per_axis;
  int bits_per_symbol = 2 * bits_per_axis;
  BitVec padded = bits;
  while (padded.size() % bits_per_symbol != 0) padded.push_back(0);
  double scale = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
  std::vector<cplx> out;
  out.reserve(padded.size() / bits_per_symbol);
  for (size_t i = 0; i < padded.size(); i += bits_per_symbol) {
    int gi = 0, gq = 0;
    for (int b = 0; b < bits_per_axis; ++b) gi = (gi << 1) | padded[i + b];
    for (int b = 0; b < bits_per_axis; ++b) gq = (gq << 1) | padded[i + bits_per_axis + b];
    int li = gray_decode(gi), lq = gray_decode(gq);
    out.emplace_back((2 * li - (side - 1)) * scale, (2 * lq - (side - 1)) * scale);
  }
  return out;
}

BitVec gray_demodulate(const std::vector<cplx>& symbols, int order) {
  if (!supported_order(order))
    throw std::invalid_argument("gray_demodulate: unsupported order");
  int side = static_cast<int>(std::lround(std::sqrt((double)order)));
  int bits_per_axis = 0;
  while ((1 << bits_per_axis) < side) ++bits_per_axis;
  double scale = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
  BitVec out;
  out.reserve(symbols.size() * 2 * bits_per_axis);
  auto axis_level = [&](double v) {
    int level = static_cast<int>(std::lround((v / scale + (side - 1)) / 2.0));
    return std::min(side - 1, std::max(0, level));
  };
  for (const cplx& s : symbols) {
    int gi = gray_encode(axis_level(s.real()));
    int gq = gray_encode(axis_level(s.imag()));
    for (int b = bits_per_axis - 1; b >= 0; --b) out.push_back((gi >> b) & 1);
    for (int b = bits_per_axis - 1; b >= 0; --b) out.push_back((gq >> b) & 1);
  }
  return out;
}

Image mid_gray_image(int h, int w, int c) {
  Image img;
  img.h = h;
  img.w = w;
  img.c = c;
  img.name = "midgray";
  img.data.assign((size_t)c * h * w, 0.5);
  return img;
}

BitVec interleave_bits(const BitVec& bits, int order) {
  int bps = bits_per_symbol(order);
  size_t n_sym = (bits.size() + bps - 1) / bps;
  BitVec out(n_sym * bps, 0);
  // Symbol t carries bits {t, t + n_sym, ...}, so the bits of one codeword
  // never share a fade. Models an ideal interleaver.
  for (size_t i = 0; i < bits.size(); ++i) {
    size_t t = i % n_sym, a = i / n_sym;
    out[t * bps + a] = bits[i];
  }
  return out;
}

BitVec deinterleave_bits(const BitVec& bits, int order, size_t original_size) {
  int bps = bits_per_symbol(order);
  size_t n_sym = bits.size() / bps;
  BitVec out(original_size, 0);
  for (size_t i = 0; i < original_size; ++i) {
    size_t t = i % n_sym, a = i / n_sym;
    out[i] = bits[t * bps + a];
  }
  return out;
}

SeparateResult separate_transmit(const Image& img, const SeparateConfig& cfg,
                                 double snr_db, Rng& rng) {
  SeparateResult res;
  BitVec info = source_encode(img, cfg);
  res.info_bits = static_cast<int>(info.size());
  BitVec coded = cfg.hamming ? hamming74_encode(info) : info;
  BitVec tx = interleave_bits(coded, cfg.modulation_order);
  std::vector<cplx> symbols = gray_modulate(tx, cfg.modulation_order);
  res.channel_symbols = static_cast<int>(symbols.size());

  ChannelRealization ch = sample_channel(snr_db, cfg.fading, symbols.size(), rng);
  std::vector<cplx> y = equalize(transmit(symbols, ch, rng), ch);
  BitVec rx = deinterleave_bits(gray_demodulate(y, cfg.modulation_order),
                                cfg.modulation_order, coded.size());
  rx.resize(coded.size());
  BitVec decoded = cfg.hamming ? hamming74_decode(rx).bits : rx;
  decoded.resize(info.size());

  int errors = 0;
  for (size_t i = 0; i < info.size(); ++i) errors += info[i] != decoded[i];
  res.bit_error_rate = static_cast<double>(errors) / info.size();

  try {
    res.reconstruction = source_decode(decoded, cfg);
  } catch (const SourceDecodeError&) {
    res.decode_failed = true;
    res.reconstruction = mid_gray_image(img.h, img.w, img.c);
  }
  return res;
}

}  // namespace jscc
