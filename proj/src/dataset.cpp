#include "jscc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "jscc/rng.hpp"

namespace jscc {

namespace {

// single whitespace-delimited token, honoring '#' comments
std::string ppm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (ppm_token(in) != "P6") throw std::runtime_error(path + ": not a P6 PPM");
  int w = std::stoi(ppm_token(in));
  int h = std::stoi(ppm_token(in));
  int maxval = std::stoi(ppm_token(in));
  if (w <= 0 || h <= 0) throw std::runtime_error(path + ": bad dimensions");
  if (maxval != 255) throw std::runtime_error(path + ": only maxval 255 supported");
  std::vector<unsigned char> raw((size_t)w * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (static_cast<size_t>(in.gcount()) != raw.size())
    throw std::runtime_error(path + ": truncated pixel data");
  Image img;
  img.h = h;
  img.w = w;
  img.c = 3;
  img.name = std::filesystem::path(path).filename().string();
  img.data.resize(raw.size());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.data[((size_t)c * h + y) * w + x] = raw[((size_t)y * w + x) * 3 + c] / 255.0;
  return img;
}

void write_ppm(const Image& img, const std::string& path) {
  if (img.c != 3) throw std::invalid_argument("write_ppm: need 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> raw((size_t)img.w * img.h * 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        double v = img.data[((size_t)c * img.h + y) * img.w + x];
        v = std::min(1.0, std::max(0.0, v));
        raw[((size_t)y * img.w + x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
  out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
}

Image bilinear_resize(const Image& img, int out_h, int out_w) {
  Image out;
  out.h = out_h;
  out.w = out_w;
  out.c = img.c;
  out.name = img.name;
  out.data.resize((size_t)img.c * out_h * out_w);
  double sy = static_cast<double>(img.h) / out_h;
  double sx = static_cast<double>(img.w) / out_w;
  for (int c = 0; c < img.c; ++c) {
    const double* src = img.data.data() + (size_t)c * img.h * img.w;
    double* dst = out.data.data() + (size_t)c * out_h * out_w;
    for (int y = 0; y < out_h; ++y) {
      double fy = (y + 0.5) * sy - 0.5;
      int y0 = static_cast<int>(std::floor(fy));
      double wy = fy - y0;
      int y0c = std::clamp(y0, 0, img.h - 1);
      int y1c = std::clamp(y0 + 1, 0, img.h - 1);
      for (int x = 0; x < out_w; ++x) {
        double fx = (x + 0.5) * sx - 0.5;
        int x0 = static_cast<int>(std::floor(fx));
        double wx = fx - x0;
        int x0c = std::clamp(x0, 0, img.w - 1);
        int x1c = std::clamp(x0 + 1, 0, img.w - 1);
        double top = (1.0 - wx) * src[y0c * img.w + x0c] + wx * src[y0c * img.w + x1c];
        double bot = (1.0 - wx) * src[y1c * img.w + x0c] + wx * src[y1c * img.w + x1c];
        dst[y * out_w + x] = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

ImageCorpus ingest_dataset(const std::string& dir, int target_h, int target_w) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm")
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  ImageCorpus corpus;
  corpus.h = target_h;
  corpus.w = target_w;
  corpus.c = 3;
  for (const auto& p : paths) {
    try {
      Image img = read_ppm(p);
      if (img.h != target_h || img.w != target_w)
        img = bilinear_resize(img, target_h, target_w);
      corpus.images.push_back(std::move(img));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << p << ": " << e.what() << "\n";
    }
  }
  if (corpus.images.empty())
    throw std::runtime_error("ingest_dataset: no readable images in " + dir);
  return corpus;
}

Tensor image_to_tensor(const Image& img) {
  return Tensor::from_data({1, img.c, img.h, img.w}, img.data);
}

Tensor make_batch(const ImageCorpus& corpus, const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
  int n = static_cast<int>(indices.size());
  Tensor t({n, corpus.c, corpus.h, corpus.w}, false);
  size_t per = (size_t)corpus.c * corpus.h * corpus.w;
  for (int i = 0; i < n; ++i) {
    const auto& img = corpus.images.at(indices[i]);
    std::copy(img.data.begin(), img.data.end(), t.data().begin() + i * per);
  }
  return t;
}

ImageCorpus synthetic_corpus(int count, int h, int w, uint64_t seed) {
  ImageCorpus corpus;
  corpus.h = h;
  corpus.w = w;
  corpus.c = 3;
  for (int idx = 0; idx < count; ++idx) {
    Rng rng(mix_seed(seed, 0x636f7270ULL, (uint64_t)idx));
    Image img;
    img.h = h;
    img.w = w;
    img.c = 3;
    img.data.resize((size_t)3 * h * w);
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%05d.ppm", idx);
    img.name = name;
    // per-channel linear gradient
    for (int c = 0; c < 3; ++c) {
      double base = rng.uniform(0.1, 0.9);
      double gx = rng.uniform(-0.7, 0.7) / w;
      double gy = rng.uniform(-0.7, 0.7) / h;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          img.data[((size_t)c * h + y) * w + x] = base + gx * x + gy * y;
    }
    // a few high-contrast rectangles aligned to the 8x8 grid
    int rects = 2 + static_cast<int>(rng.uniform_index(3));
    for (int r = 0; r < rects; ++r) {
      int bx = static_cast<int>(rng.uniform_index(std::max(1, w / 8)));
      int by = static_cast<int>(rng.uniform_index(std::max(1, h / 8)));
      int bw = 1 + static_cast<int>(rng.uniform_index(2));
      int bh = 1 + static_cast<int>(rng.uniform_index(2));
      double col[3];
      for (double& v : col) v = rng.uniform() < 0.5 ? rng.uniform(0.0, 0.15)
                                                    : rng.uniform(0.85, 1.0);
      for (int y = by * 8; y < std::min(h, (by + bh) * 8); ++y)
        for (int x = bx * 8; x < std::min(w, (bx + bw) * 8); ++x)
          for (int c = 0; c < 3; ++c) img.data[((size_t)c * h + y) * w + x] = col[c];
    }
    for (auto& v : img.data) v = std::min(1.0, std::max(0.0, v));
    // snap to 8-bit levels so PPM round-trips are exact
    for (auto& v : img.data) v = std::round(v * 255.0) / 255.0;
    corpus.images.push_back(std::move(img));
  }
  return corpus;
}

void write_corpus(const ImageCorpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& img : corpus.images)
    write_ppm(img, (std::filesystem::path(dir) / img.name).string());
}

}  // namespace jscc
