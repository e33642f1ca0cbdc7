#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "jscc/rng.hpp"
#include "jscc/tensor.hpp"

namespace jscc {

enum class LayerKind { Conv, TransposedConv };
enum class Activation { ReLU, Sigmoid, None };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  int kh = 5, kw = 5;
  int out_channels = 1;
  int stride = 1;
  int padding = 0;
  int output_padding = 0;  // transposed conv only
  bool has_bn = false;
  Activation act = Activation::None;
};

// Architecture description for a conv autoencoder. The encoder ends in a
// sigmoid so features land in (0,1); the decoder ends in a sigmoid so the
// reconstruction maps back to pixels via *255.
struct ModelSpec {
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;
  int in_h = 32, in_w = 32, in_c = 3;

  int source_dims() const { return in_h * in_w * in_c; }  // n = H*W*C
  // Feature length k and the encoder output spatial map, derived from the
  // layer stack.
  int feature_len() const;
  void feature_map_dims(int& c, int& h, int& w) const;
  double bandwidth_ratio() const {
    return static_cast<double>(feature_len()) / source_dims();
  }
  void validate() const;
};

// Desk-scale default: 32x32x3 input, k/n = 2/3 (k = 2048).
ModelSpec default_spec();
// Narrower variant at k/n = 1/3 (k = 1024), for bandwidth-vs-pruning
// comparisons at a similar parameter count.
ModelSpec half_bandwidth_spec();

struct TrainedModel {
  ModelSpec spec;
  std::vector<Tensor> enc_kernels;
  std::vector<Tensor> dec_kernels;
  std::vector<BatchNormState> enc_bn;  // aligned with encoder layers; unused
  std::vector<BatchNormState> dec_bn;  // entries (has_bn=false) stay empty

  std::vector<Tensor> parameters();  // kernels + BN eta/beta, fixed order
  TrainedModel clone() const;
};

// Kaiming-style fan-in init, seeded.
TrainedModel init_model(const ModelSpec& spec, uint64_t seed);

// Forward passes. `training` selects BN batch statistics (and updates the
// running estimates). encode returns [N,k] with features flattened
// channel-major; decode accepts [N,k].
Tensor encode(TrainedModel& model, const Tensor& x, bool training = false);
Tensor decode(TrainedModel& model, const Tensor& z, bool training = false);

struct ModelCost {
  int64_t params = 0;
  int64_t macs = 0;  // multiply-accumulates for one image forward pass
};
ModelCost count_params_and_macs(const TrainedModel& model);

// Model container errors, each distinct.
struct ModelIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadMagicError : ModelIoError {
  using ModelIoError::ModelIoError;
};
struct BadVersionError : ModelIoError {
  using ModelIoError::ModelIoError;
};
struct TruncatedError : ModelIoError {
  using ModelIoError::ModelIoError;
};

// Versioned little-endian binary container; load(save(m)) is bit-identical.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace jscc
