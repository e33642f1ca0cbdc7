#include "jscc/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace jscc {

namespace {

void layer_out_dims(const LayerSpec& l, int& c, int& h, int& w) {
  if (l.kind == LayerKind::Conv) {
    h = (h + 2 * l.padding - l.kh) / l.stride + 1;
    w = (w + 2 * l.padding - l.kw) / l.stride + 1;
  } else {
    h = (h - 1) * l.stride - 2 * l.padding + l.kh + l.output_padding;
    w = (w - 1) * l.stride - 2 * l.padding + l.kw + l.output_padding;
  }
  c = l.out_channels;
}

}  // namespace

void ModelSpec::feature_map_dims(int& c, int& h, int& w) const {
  c = in_c;
  h = in_h;
  w = in_w;
  for (const auto& l : encoder) layer_out_dims(l, c, h, w);
}

int ModelSpec::feature_len() const {
  int c, h, w;
  feature_map_dims(c, h, w);
  return c * h * w;
}

void ModelSpec::validate() const {
  if (encoder.empty() || decoder.empty())
    throw std::invalid_argument("ModelSpec: empty layer stack");
  for (const auto* stack : {&encoder, &decoder})
    for (const auto& l : *stack) {
      if (l.out_channels < 1) throw std::invalid_argument("ModelSpec: out_channels < 1");
      if (l.kh < 1 || l.kw < 1) throw std::invalid_argument("ModelSpec: kernel dims < 1");
    }
  if (encoder.back().act != Activation::Sigmoid ||
      decoder.back().act != Activation::Sigmoid)
    throw std::invalid_argument("ModelSpec: final encoder/decoder activation must be sigmoid");
  int c = in_c, h = in_h, w = in_w;
  for (const auto& l : encoder) layer_out_dims(l, c, h, w);
  for (const auto& l : decoder) layer_out_dims(l, c, h, w);
  if (c != in_c || h != in_h || w != in_w)
    throw std::invalid_argument("ModelSpec: decoder does not reconstruct input dims");
}

ModelSpec default_spec() {
  ModelSpec s;
  s.in_h = 32;
  s.in_w = 32;
  s.in_c = 3;
  auto conv = [](int cout, int stride, bool bn, Activation act) {
    LayerSpec l;
    l.kind = LayerKind::Conv;
    l.out_channels = cout;
    l.stride = stride;
    l.padding = 2;
    l.has_bn = bn;
    l.act = act;
    return l;
  };
  auto tconv = [](int cout, int stride, int opad, bool bn, Activation act) {
    LayerSpec l;
    l.kind = LayerKind::TransposedConv;
    l.out_channels = cout;
    l.stride = stride;
    l.padding = 2;
    l.output_padding = opad;
    l.has_bn = bn;
    l.act = act;
    return l;
  };
  // 32x32x3 -> 16x16x8 -> 16x16x16 -> 8x8x32 -> 8x8x32 => k = 2048, k/n = 2/3
  s.encoder = {conv(8, 2, true, Activation::ReLU), conv(16, 1, true, Activation::ReLU),
               conv(32, 2, true, Activation::ReLU), conv(32, 1, false, Activation::Sigmoid)};
  s.decoder = {tconv(32, 1, 0, true, Activation::ReLU),
               tconv(16, 2, 1, true, Activation::ReLU),
               tconv(8, 1, 0, true, Activation::ReLU),
               tconv(3, 2, 1, false, Activation::Sigmoid)};
  return s;
}

ModelSpec half_bandwidth_spec() {
  // Same depth and strides as the default model, thinner everywhere:
  // 32x32x3 -> 16x16x6 -> 16x16x12 -> 8x8x24 -> 8x8x16 => k = 1024, k/n = 1/3.
  // Sized so its parameter count (~38k) matches the default model after
  // pruning half of its prunable channels, making bandwidth-vs-pruning
  // comparisons parameter-fair.
  ModelSpec s = default_spec();
  s.encoder[0].out_channels = 6;
  s.encoder[1].out_channels = 12;
  s.encoder[2].out_channels = 24;
  s.encoder[3].out_channels = 16;
  s.decoder[0].out_channels = 24;
  s.decoder[1].out_channels = 12;
  s.decoder[2].out_channels = 6;
  return s;
}

std::vector<Tensor> TrainedModel::parameters() {
  std::vector<Tensor> params;
  for (size_t i = 0; i < enc_kernels.size(); ++i) {
    params.push_back(enc_kernels[i]);
    if (spec.encoder[i].has_bn) {
      params.push_back(enc_bn[i].eta);
      params.push_back(enc_bn[i].beta);
    }
  }
  for (size_t i = 0; i < dec_kernels.size(); ++i) {
    params.push_back(dec_kernels[i]);
    if (spec.decoder[i].has_bn) {
      params.push_back(dec_bn[i].eta);
      params.push_back(dec_bn[i].beta);
    }
  }
  return params;
}

TrainedModel TrainedModel::clone() const {
  TrainedModel m;
  m.spec = spec;
  for (const auto& k : enc_kernels) m.enc_kernels.push_back(k.clone());
  for (const auto& k : dec_kernels) m.dec_kernels.push_back(k.clone());
  for (const auto& b : enc_bn)
    m.enc_bn.push_back(b.eta.defined() ? b.clone() : BatchNormState());
  for (const auto& b : dec_bn)
    m.dec_bn.push_back(b.eta.defined() ? b.clone() : BatchNormState());
  return m;
}

TrainedModel init_model(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  TrainedModel m;
  m.spec = spec;
  Rng rng(mix_seed(seed, 0x6d6f64656cULL));
  auto init_stack = [&](const std::vector<LayerSpec>& layers, int cin,
                        std::vector<Tensor>& kernels, std::vector<BatchNormState>& bns) {
    for (const auto& l : layers) {
      Shape shape = l.kind == LayerKind::Conv
                        ? Shape{l.out_channels, cin, l.kh, l.kw}
                        : Shape{cin, l.out_channels, l.kh, l.kw};
      Tensor k(shape, true);
      double fan_in = static_cast<double>(cin) * l.kh * l.kw;
      double stddev = std::sqrt(2.0 / fan_in);
      for (auto& v : k.data()) v = rng.gaussian(0.0, stddev);
      kernels.push_back(k);
      bns.push_back(l.has_bn ? BatchNormState(l.out_channels) : BatchNormState());
      cin = l.out_channels;
    }
    return cin;
  };
  int c = init_stack(spec.encoder, spec.in_c, m.enc_kernels, m.enc_bn);
  init_stack(spec.decoder, c, m.dec_kernels, m.dec_bn);
  return m;
}

namespace {

Tensor run_stack(const std::vector<LayerSpec>& layers, std::vector<Tensor>& kernels,
                 std::vector<BatchNormState>& bns, Tensor t, bool training) {
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    t = l.kind == LayerKind::Conv
            ? conv2d(t, kernels[i], l.stride, l.padding)
            : conv2d_transpose(t, kernels[i], l.stride, l.padding, l.output_padding);
    if (l.has_bn) t = batch_norm(t, bns[i], training);
    switch (l.act) {
      case Activation::ReLU: t = relu(t); break;
      case Activation::Sigmoid: t = sigmoid(t); break;
      case Activation::None: break;
    }
  }
  return t;
}

}  // namespace

Tensor encode(TrainedModel& model, const Tensor& x, bool training) {
  if (x.shape().size() != 4 || x.shape()[1] != model.spec.in_c ||
      x.shape()[2] != model.spec.in_h || x.shape()[3] != model.spec.in_w)
    throw std::invalid_argument("encode: input " + shape_str(x.shape()) +
                                " does not match spec dims");
  Tensor z = run_stack(model.spec.encoder, model.enc_kernels, model.enc_bn, x, training);
  // channel-major flatten: [N,C,H,W] row-major order is already (c,h,w)
  return reshape(z, {x.shape()[0], model.spec.feature_len()});
}

Tensor decode(TrainedModel& model, const Tensor& z, bool training) {
  int k = model.spec.feature_len();
  if (z.shape().size() != 2 || z.shape()[1] != k)
    throw std::invalid_argument("decode: feature " + shape_str(z.shape()) +
                                " does not match k=" + std::to_string(k));
  int c, h, w;
  model.spec.feature_map_dims(c, h, w);
  Tensor t = reshape(z, {z.shape()[0], c, h, w});
  return run_stack(model.spec.decoder, model.dec_kernels, model.dec_bn, t, training);
}

ModelCost count_params_and_macs(const TrainedModel& model) {
  ModelCost cost;
  const auto& spec = model.spec;
  int c = spec.in_c, h = spec.in_h, w = spec.in_w;
  auto account = [&](const LayerSpec& l) {
    int cin = c;
    int hin = h, win = w;
    layer_out_dims(l, c, h, w);
    cost.params += (int64_t)l.out_channels * cin * l.kh * l.kw;
    if (l.has_bn) cost.params += 2 * l.out_channels;
    // per-output-pixel kernel volume; for transposed conv the scatter view
    // makes it per-input-pixel
    int64_t pixels = l.kind == LayerKind::Conv ? (int64_t)h * w : (int64_t)hin * win;
    cost.macs += pixels * l.out_channels * cin * l.kh * l.kw;
  };
  for (const auto& l : spec.encoder) account(l);
  for (const auto& l : spec.decoder) account(l);
  return cost;
}

// ---------------------------------------------------------------------------
// Binary container

namespace {

constexpr char kMagic[8] = {'J', 'S', 'C', 'C', 'M', 'O', 'D', 'L'};
constexpr uint32_t kVersion = 1;

struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw ModelIoError("cannot open for write: " + path);
  }
  void raw(const void* p, size_t n) { out.write(static_cast<const char*>(p), n); }
  void u8(uint8_t v) { raw(&v, 1); }
  void u32(uint32_t v) { raw(&v, 4); }
  void i32(int32_t v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void f64v(const std::vector<double>& v) { raw(v.data(), v.size() * 8); }
};

struct Reader {
  std::ifstream in;
  explicit Reader(const std::string& path) : in(path, std::ios::binary) {
    if (!in) throw ModelIoError("cannot open for read: " + path);
  }
  void raw(void* p, size_t n) {
    in.read(static_cast<char*>(p), n);
    if (static_cast<size_t>(in.gcount()) != n)
      throw TruncatedError("model file truncated");
  }
  uint8_t u8() { uint8_t v; raw(&v, 1); return v; }
  uint32_t u32() { uint32_t v; raw(&v, 4); return v; }
  int32_t i32() { int32_t v; raw(&v, 4); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  std::vector<double> f64v(size_t n) {
    std::vector<double> v(n);
    raw(v.data(), n * 8);
    return v;
  }
};

void write_layer_spec(Writer& w, const LayerSpec& l) {
  w.u8(l.kind == LayerKind::Conv ? 0 : 1);
  w.i32(l.kh);
  w.i32(l.kw);
  w.i32(l.out_channels);
  w.i32(l.stride);
  w.i32(l.padding);
  w.i32(l.output_padding);
  w.u8(l.has_bn ? 1 : 0);
  w.u8(static_cast<uint8_t>(l.act));
}

LayerSpec read_layer_spec(Reader& r) {
  LayerSpec l;
  l.kind = r.u8() == 0 ? LayerKind::Conv : LayerKind::TransposedConv;
  l.kh = r.i32();
  l.kw = r.i32();
  l.out_channels = r.i32();
  l.stride = r.i32();
  l.padding = r.i32();
  l.output_padding = r.i32();
  l.has_bn = r.u8() != 0;
  l.act = static_cast<Activation>(r.u8());
  return l;
}

void write_bn(Writer& w, const BatchNormState& bn) {
  w.i32(bn.channels());
  w.f64(bn.epsilon);
  w.f64(bn.momentum);
  w.f64v(bn.eta.data());
  w.f64v(bn.beta.data());
  w.f64v(bn.running_mean);
  w.f64v(bn.running_var);
}

BatchNormState read_bn(Reader& r) {
  int c = r.i32();
  if (c < 1) throw ModelIoError("bad BN channel count");
  BatchNormState bn(c);
  bn.epsilon = r.f64();
  bn.momentum = r.f64();
  bn.eta.data() = r.f64v(c);
  bn.beta.data() = r.f64v(c);
  bn.running_mean = r.f64v(c);
  bn.running_var = r.f64v(c);
  return bn;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path) {
  Writer w(path);
  w.raw(kMagic, 8);
  w.u32(kVersion);
  w.i32(model.spec.in_h);
  w.i32(model.spec.in_w);
  w.i32(model.spec.in_c);
  w.u32(static_cast<uint32_t>(model.spec.encoder.size()));
  w.u32(static_cast<uint32_t>(model.spec.decoder.size()));
  for (const auto& l : model.spec.encoder) write_layer_spec(w, l);
  for (const auto& l : model.spec.decoder) write_layer_spec(w, l);
  auto write_stack = [&](const std::vector<LayerSpec>& layers,
                         const std::vector<Tensor>& kernels,
                         const std::vector<BatchNormState>& bns) {
    for (size_t i = 0; i < layers.size(); ++i) {
      for (int dim : kernels[i].shape()) w.i32(dim);
      w.f64v(kernels[i].data());
      if (layers[i].has_bn) write_bn(w, bns[i]);
    }
  };
  write_stack(model.spec.encoder, model.enc_kernels, model.enc_bn);
  write_stack(model.spec.decoder, model.dec_kernels, model.dec_bn);
  if (!w.out) throw ModelIoError("write failed: " + path);
}

TrainedModel load_model(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw BadMagicError("bad model magic");
  uint32_t version = r.u32();
  if (version != kVersion)
    throw BadVersionError("unsupported model version " + std::to_string(version));
  TrainedModel m;
  m.spec.in_h = r.i32();
  m.spec.in_w = r.i32();
  m.spec.in_c = r.i32();
  uint32_t ne = r.u32(), nd = r.u32();
  if (ne == 0 || nd == 0 || ne > 1000 || nd > 1000) throw ModelIoError("bad layer count");
  for (uint32_t i = 0; i < ne; ++i) m.spec.encoder.push_back(read_layer_spec(r));
  for (uint32_t i = 0; i < nd; ++i) m.spec.decoder.push_back(read_layer_spec(r));
  auto read_stack = [&](const std::vector<LayerSpec>& layers, std::vector<Tensor>& kernels,
                        std::vector<BatchNormState>& bns) {
    for (const auto& l : layers) {
      Shape shape(4);
      for (int& dim : shape) {
        dim = r.i32();
        if (dim < 1) throw ModelIoError("bad kernel dim");
      }
      Tensor k(shape, true);
      k.data() = r.f64v(k.size());
      kernels.push_back(k);
      bns.push_back(l.has_bn ? read_bn(r) : BatchNormState());
    }
  };
  read_stack(m.spec.encoder, m.enc_kernels, m.enc_bn);
  read_stack(m.spec.decoder, m.dec_kernels, m.dec_bn);
  m.spec.validate();
  return m;
}

}  // namespace jscc
