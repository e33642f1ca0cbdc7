#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "jscc/baseline.hpp"
#include "jscc/dataset.hpp"
#include "jscc/metrics.hpp"
#include "jscc/rng.hpp"

using namespace jscc;

namespace {

// Brute-force codebook from the generator matrix of the (7,4) code with
// parity bits at positions 1, 2, 4 (1-indexed): an independent construction
// of the same code.
std::vector<std::array<int, 7>> reference_codebook() {
  std::vector<std::array<int, 7>> book;
  for (int word = 0; word < 16; ++word) {
    int d[4] = {(word >> 3) & 1, (word >> 2) & 1, (word >> 1) & 1, word & 1};
    std::array<int, 7> c{};
    // data at positions 3,5,6,7; parity covers positions with that bit set
    c[2] = d[0];
    c[4] = d[1];
    c[5] = d[2];
    c[6] = d[3];
    c[0] = c[2] ^ c[4] ^ c[6];  // p1: positions 3,5,7
    c[1] = c[2] ^ c[5] ^ c[6];  // p2: positions 3,6,7
    c[3] = c[4] ^ c[5] ^ c[6];  // p4: positions 5,6,7
    book.push_back(c);
  }
  return book;
}

}  // namespace

TEST_CASE("hamming(7,4) encoder matches the generator-matrix codebook") {
  auto book = reference_codebook();
  for (int word = 0; word < 16; ++word) {
    BitVec data{(uint8_t)((word >> 3) & 1), (uint8_t)((word >> 2) & 1),
                (uint8_t)((word >> 1) & 1), (uint8_t)(word & 1)};
    BitVec coded = hamming74_encode(data);
    REQUIRE(coded.size() == 7);
    for (int i = 0; i < 7; ++i) CHECK((int)coded[i] == book[word][i]);
  }
}

TEST_CASE("hamming(7,4) corrects every single-bit error: 112 of 112") {
  int corrected = 0;
  for (int word = 0; word < 16; ++word) {
    BitVec data{(uint8_t)((word >> 3) & 1), (uint8_t)((word >> 2) & 1),
                (uint8_t)((word >> 1) & 1), (uint8_t)(word & 1)};
    BitVec coded = hamming74_encode(data);
    for (int flip = 0; flip < 7; ++flip) {
      BitVec corrupted = coded;
      corrupted[flip] ^= 1;
      HammingDecodeResult res = hamming74_decode(corrupted);
      if (res.bits == data && res.corrected == 1) ++corrected;
    }
  }
  CHECK(corrected == 112);
}

TEST_CASE("hamming(7,4) clean codewords decode with zero corrections") {
  BitVec data{1, 0, 1, 1, 0, 0, 0, 1};  // two blocks
  BitVec coded = hamming74_encode(data);
  REQUIRE(coded.size() == 14);
  HammingDecodeResult res = hamming74_decode(coded);
  CHECK(res.bits == data);
  CHECK(res.corrected == 0);
}

TEST_CASE("hamming encoder pads input to a multiple of 4 with zeros") {
  BitVec data{1, 1, 0};
  BitVec coded = hamming74_encode(data);
  CHECK(coded.size() == 7);
  HammingDecodeResult res = hamming74_decode(coded);
  CHECK(res.bits[0] == 1);
  CHECK(res.bits[1] == 1);
  CHECK(res.bits[2] == 0);
  CHECK(res.bits[3] == 0);
}

TEST_CASE("gray qam round trip for all orders") {
  Rng rng(4);
  for (int m : {4, 16, 64, 256}) {
    int bps = (int)std::lround(std::log2((double)m));
    BitVec bits(bps * 100);
    for (auto& b : bits) b = (uint8_t)rng.uniform_index(2);
    auto symbols = gray_modulate(bits, m);
    REQUIRE((int)symbols.size() == 100);
    BitVec back = gray_demodulate(symbols, m);
    back.resize(bits.size());
    CHECK(back == bits);
    // unit average power over the full constellation
    double p = 0.0;
    BitVec all;
    for (int word = 0; word < m; ++word)
      for (int b = bps - 1; b >= 0; --b) all.push_back((word >> b) & 1);
    for (auto s : gray_modulate(all, m)) p += std::norm(s);
    CHECK(p / m == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gray labeling: adjacent constellation points differ in one bit") {
  // Per-axis reflected Gray code means horizontally or vertically adjacent
  // points differ in exactly one bit.
  int m = 16, bps = 4;
  BitVec all;
  for (int word = 0; word < m; ++word)
    for (int b = bps - 1; b >= 0; --b) all.push_back((word >> b) & 1);
  auto pts = gray_modulate(all, m);
  double step = 2.0 / std::sqrt(2.0 * (m - 1) / 3.0);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      double d = std::abs(pts[i] - pts[j]);
      if (std::abs(d - step) < 1e-9) {
        int diff = 0;
        for (int b = 0; b < bps; ++b) diff += all[i * bps + b] != all[j * bps + b];
        CHECK(diff == 1);
      }
    }
}

TEST_CASE("bit interleaver round-trips and separates codeword bits") {
  Rng rng(66);
  for (int m : {4, 16}) {
    BitVec bits(701);  // deliberately not a multiple of anything convenient
    for (auto& b : bits) b = (uint8_t)rng.uniform_index(2);
    BitVec inter = interleave_bits(bits, m);
    BitVec back = deinterleave_bits(inter, m, bits.size());
    CHECK(back == bits);
    // no symbol carries two bits of the same 7-bit codeword
    int bps = m == 4 ? 2 : 4;
    size_t n_sym = inter.size() / bps;
    REQUIRE(n_sym >= 7);
    // bit i of the original stream sits in symbol i % n_sym
    for (size_t i = 0; i + 6 < bits.size(); i += 7)
      for (int a = 0; a < 7; ++a)
        for (int b = a + 1; b < 7; ++b)
          CHECK((i + a) % n_sym != (i + b) % n_sym);
  }
}

TEST_CASE("dct source code: constant image has only DC energy and round-trips") {
  Image img = mid_gray_image(16, 16, 3);
  SeparateConfig cfg;
  BitVec bits = source_encode(img, cfg);
  Image back = source_decode(bits, cfg);
  REQUIRE(back.h == 16);
  REQUIRE(back.w == 16);
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-2));
}

TEST_CASE("source round trip reconstructs synthetic images above 30 dB") {
  ImageCorpus corpus = synthetic_corpus(12, 32, 32, 8);
  SeparateConfig cfg;
  for (const auto& img : corpus.images) {
    BitVec bits = source_encode(img, cfg);
    Image back = source_decode(bits, cfg);
    std::vector<double> x(img.data), y(back.data);
    for (auto& v : x) v *= 255.0;
    for (auto& v : y) v *= 255.0;
    CHECK(psnr(x, y) > 30.0);
  }
}

TEST_CASE("bitstream is deterministic") {
  ImageCorpus corpus = synthetic_corpus(1, 32, 32, 77);
  SeparateConfig cfg;
  CHECK(source_encode(corpus.images[0], cfg) == source_encode(corpus.images[0], cfg));
}

TEST_CASE("corrupted header fails the integrity check") {
  ImageCorpus corpus = synthetic_corpus(1, 32, 32, 12);
  SeparateConfig cfg;
  BitVec bits = source_encode(corpus.images[0], cfg);
  BitVec bad = bits;
  bad[3] ^= 1;  // inside the magic byte
  CHECK_THROWS_AS(source_decode(bad, cfg), SourceDecodeError);
  // payload corruption is caught by the checksum
  BitVec bad2 = bits;
  bad2[bits.size() / 2] ^= 1;
  CHECK_THROWS_AS(source_decode(bad2, cfg), SourceDecodeError);
}

TEST_CASE("transmission at very high SNR reconstructs; at 0 dB it falls back") {
  ImageCorpus corpus = synthetic_corpus(4, 32, 32, 21);
  SeparateConfig cfg;
  int high_ok = 0, low_failed = 0;
  for (int i = 0; i < 4; ++i) {
    Rng rng_hi(mix_seed(100, (uint64_t)i));
    SeparateResult hi = separate_transmit(corpus.images[i], cfg, 60.0, rng_hi);
    std::vector<double> x(corpus.images[i].data), y(hi.reconstruction.data);
    for (auto& v : x) v *= 255.0;
    for (auto& v : y) v *= 255.0;
    if (!hi.decode_failed && psnr(x, y) > 30.0) ++high_ok;

    Rng rng_lo(mix_seed(200, (uint64_t)i));
    SeparateResult lo = separate_transmit(corpus.images[i], cfg, 0.0, rng_lo);
    if (lo.decode_failed) {
      ++low_failed;
      // fallback is the mid-gray image
      CHECK(lo.reconstruction.data[0] == doctest::Approx(0.5));
    }
    CHECK(lo.bit_error_rate > hi.bit_error_rate);
  }
  CHECK(high_ok == 4);
  CHECK(low_failed == 4);
}

TEST_CASE("channel symbol budget stays within the feature budget") {
  // The baseline is sized against k = 2048 channel symbols for a 32x32
  // image at QPSK with rate-4/7 coding.
  ImageCorpus corpus = synthetic_corpus(1, 32, 32, 31);
  SeparateConfig cfg;
  Rng rng(5);
  SeparateResult res = separate_transmit(corpus.images[0], cfg, 30.0, rng);
  CHECK(res.channel_symbols <= 2048);
  CHECK(res.channel_symbols > 1500);  // not wildly undersized either
  CHECK(res.info_bits > 2000);
}

TEST_CASE("mid gray image is exactly half intensity") {
  Image g = mid_gray_image(4, 4, 3);
  CHECK(g.data.size() == 48);
  for (double v : g.data) CHECK(v == 0.5);
}
