#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jscc/tensor.hpp"

namespace jscc {

// Planar image, values in [0,1], data laid out channel-major (c,h,w) to
// match tensor order.
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<double> data;
  std::string name;
};

struct ImageCorpus {
  int h = 0, w = 0, c = 0;
  std::vector<Image> images;

  size_t size() const { return images.size(); }
};

// Binary PPM (P6, maxval 255). Read is bit-exact: pixel / 255.0.
Image read_ppm(const std::string& path);
void write_ppm(const Image& img, const std::string& path);

// Half-pixel-center bilinear resize with edge clamping.
Image bilinear_resize(const Image& img, int out_h, int out_w);

// Loads every .ppm in a directory (sorted by filename), resizes to the
// target dims. Unreadable files are skipped with a warning on stderr; an
// empty result is fatal.
ImageCorpus ingest_dataset(const std::string& dir, int target_h, int target_w);

// Stacks selected corpus images into a [N,C,H,W] tensor.
Tensor make_batch(const ImageCorpus& corpus, const std::vector<int>& indices);
Tensor image_to_tensor(const Image& img);

// Deterministic synthetic corpus: smooth two-axis gradients with a few
// block-aligned constant rectangles per image. DCT-friendly and easy for a
// small autoencoder, which keeps desk-scale experiments meaningful.
ImageCorpus synthetic_corpus(int count, int h, int w, uint64_t seed);
void write_corpus(const ImageCorpus& corpus, const std::string& dir);

}  // namespace jscc
