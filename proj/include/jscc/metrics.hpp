#pragma once

#include <vector>

#include "jscc/tensor.hpp"

namespace jscc {

// Both metrics operate on 8-bit scale images (values in [0,255]), any shape
// as long as the two images match. SSIM treats the image as 2-D planes of
// size [H,W] stacked along leading dims.

// 10*log10(255^2 / MSE); identical images yield +infinity.
double psnr(const std::vector<double>& x, const std::vector<double>& x_hat);
double psnr(const Tensor& x, const Tensor& x_hat);

struct SsimConfig {
  double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  // c3 = c2/2 is baked into the product form
  bool global_stats = false;  // true: single window over the whole image
  int window = 11;            // sliding Gaussian window size
  double sigma = 1.5;
};

// Structural similarity per Wang et al.'s product form, averaged over
// sliding windows (or computed once from global statistics).
double ssim(const std::vector<double>& x, const std::vector<double>& x_hat, int h,
            int w, const SsimConfig& cfg = {});
// Multi-channel tensors: SSIM averaged over channels (and batch).
double ssim(const Tensor& x, const Tensor& x_hat, const SsimConfig& cfg = {});

struct BatchMetrics {
  double mean_psnr = 0.0;   // over finite values only
  double mean_ssim = 0.0;
  int count = 0;            // pairs included in mean_psnr
  int infinite_psnr = 0;    // pairs excluded as +inf
};

BatchMetrics batch_metrics(const std::vector<std::pair<double, double>>& psnr_ssim_pairs);

}  // namespace jscc
