#include "jscc/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "jscc/rng.hpp"

namespace jscc {

namespace {

struct LayerRef {
  int id;        // global layer id
  bool decoder;  // which stack
  int index;     // index within the stack
};

std::vector<LayerRef> all_layers(const ModelSpec& spec) {
  std::vector<LayerRef> out;
  int id = 0;
  for (size_t i = 0; i < spec.encoder.size(); ++i) out.push_back({id++, false, (int)i});
  for (size_t i = 0; i < spec.decoder.size(); ++i) out.push_back({id++, true, (int)i});
  return out;
}

const LayerSpec& layer_spec(const ModelSpec& spec, const LayerRef& ref) {
  return ref.decoder ? spec.decoder[ref.index] : spec.encoder[ref.index];
}

const BatchNormState& layer_bn(const TrainedModel& m, const LayerRef& ref) {
  return ref.decoder ? m.dec_bn[ref.index] : m.enc_bn[ref.index];
}

// Builds per-image equalized-noise for the analog training channel.
Tensor analog_noise(const Shape& z_shape, double snr_db, FadingMode fading, Rng& rng) {
  Tensor noise = Tensor::zeros(z_shape);
  double sigma2 = std::pow(10.0, -snr_db / 10.0);
  if (sigma2 <= 0.0) return noise;
  int n = z_shape[0];
  int k = z_shape[1];
  auto& nd = noise.data();
  for (int i = 0; i < n; ++i) {
    ChannelRealization ch = sample_channel(snr_db, fading, (size_t)k, rng);
    for (int j = 0; j < k; ++j) {
      double mag = std::abs(ch.gain((size_t)j));
      nd[(int64_t)i * k + j] = rng.gaussian(0.0, std::sqrt(sigma2) / mag);
    }
  }
  return noise;
}

void train_epochs(TrainedModel& model, const ImageCorpus& train, const TrainConfig& cfg,
                  const std::function<void(int)>& on_epoch_end) {
  if (train.images.empty()) throw std::invalid_argument("sparse_train: empty dataset");
  std::vector<Tensor> etas;
  for (size_t i = 0; i < model.enc_bn.size(); ++i)
    if (model.spec.encoder[i].has_bn) etas.push_back(model.enc_bn[i].eta);
  for (size_t i = 0; i < model.dec_bn.size(); ++i)
    if (model.spec.decoder[i].has_bn) etas.push_back(model.dec_bn[i].eta);

  std::vector<Tensor> params = cfg.scale_only ? etas : model.parameters();
  AdamState adam;
  adam.lr = cfg.lr;
  adam.init(params);

  int n = static_cast<int>(train.images.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x73687566ULL, (uint64_t)epoch));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_index((uint64_t)i + 1)]);

    for (int start = 0, batch = 0; start < n; start += cfg.batch_size, ++batch) {
      int end = std::min(n, start + cfg.batch_size);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      Tensor x = make_batch(train, idx);
      Rng noise_rng(mix_seed(cfg.seed, 0x6e6f6973ULL, (uint64_t)epoch, (uint64_t)batch));
      Tensor z = encode(model, x, /*training=*/true);
      Tensor z_noisy = add(z, analog_noise(z.shape(), cfg.snr_db, cfg.fading, noise_rng));
      Tensor x_hat = decode(model, z_noisy, /*training=*/true);
      Tensor loss = mse_loss(x, x_hat);
      if (!std::isfinite(loss.item()))
        throw std::runtime_error("sparse_train: non-finite loss at epoch " +
                                 std::to_string(epoch) + " batch " + std::to_string(batch));
      loss.backward();
      if (cfg.lambda > 0.0) {
        for (auto& eta : etas) {
          auto& g = eta.grad();
          const auto& d = eta.data();
          for (size_t i = 0; i < d.size(); ++i) {
            double sgn = d[i] > 0.0 ? 1.0 : (d[i] < 0.0 ? -1.0 : 0.0);
            g[i] += cfg.lambda * sgn;
          }
        }
      }
      adam_step(params, adam);
    }
    if (on_epoch_end) on_epoch_end(epoch);
  }
}

}  // namespace

void sparse_train(TrainedModel& model, const ImageCorpus& train, const TrainConfig& cfg) {
  train_epochs(model, train, cfg, nullptr);
}

double evaluate_mse(TrainedModel& model, const ImageCorpus& data, double snr_db,
                    FadingMode fading, uint64_t seed) {
  if (data.images.empty()) throw std::invalid_argument("evaluate_mse: empty dataset");
  int n = static_cast<int>(data.images.size());
  double total = 0.0;
  const int chunk = 32;
  for (int start = 0, batch = 0; start < n; start += chunk, ++batch) {
    int end = std::min(n, start + chunk);
    std::vector<int> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Tensor x = make_batch(data, idx);
    Rng rng(mix_seed(seed, 0x76616c6dULL, (uint64_t)batch));
    Tensor z = encode(model, x, /*training=*/false);
    Tensor z_noisy = add(z, analog_noise(z.shape(), snr_db, fading, rng));
    Tensor x_hat = decode(model, z_noisy, /*training=*/false);
    total += mse_loss(x, x_hat).item() * (end - start);
  }
  return total / n;
}

ChannelImportance rank_channels(const TrainedModel& model) {
  ChannelImportance imp;
  for (const auto& ref : all_layers(model.spec)) {
    if (!layer_spec(model.spec, ref).has_bn) continue;
    const auto& bn = layer_bn(model, ref);
    for (int c = 0; c < bn.channels(); ++c)
      imp.entries.push_back({ref.id, c, std::abs(bn.eta.data()[c])});
  }
  if (imp.entries.empty())
    throw std::invalid_argument("rank_channels: model has no prunable BN layers");
  std::sort(imp.entries.begin(), imp.entries.end(),
            [](const ChannelEntry& a, const ChannelEntry& b) {
              if (a.abs_eta != b.abs_eta) return a.abs_eta < b.abs_eta;
              if (a.layer != b.layer) return a.layer < b.layer;
              return a.channel < b.channel;
            });
  return imp;
}

PruningPlan build_plan(const TrainedModel& model, const ChannelImportance& importance,
                       double gamma) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("build_plan: gamma must be in [0,1)");
  PruningPlan plan;
  for (const auto& ref : all_layers(model.spec)) {
    if (!layer_spec(model.spec, ref).has_bn) continue;
    plan.keep[ref.id] =
        std::vector<bool>(layer_bn(model, ref).channels(), true);
  }
  size_t n_prune = static_cast<size_t>(
      std::floor(gamma * static_cast<double>(importance.entries.size())));
  for (size_t i = 0; i < n_prune && i < importance.entries.size(); ++i) {
    const auto& e = importance.entries[i];
    plan.keep[e.layer][e.channel] = false;
  }
  // >= 1 channel floor: retain the largest-|eta| channel of an emptied
  // layer; the deficit is not redistributed
  for (auto& [layer, mask] : plan.keep) {
    if (std::find(mask.begin(), mask.end(), true) != mask.end()) continue;
    for (auto it = importance.entries.rbegin(); it != importance.entries.rend(); ++it)
      if (it->layer == layer) {
        mask[it->channel] = true;
        break;
      }
  }
  for (const auto& [layer, mask] : plan.keep)
    for (size_t c = 0; c < mask.size(); ++c)
      if (!mask[c]) {
        ++plan.total_pruned;
        for (const auto& e : importance.entries)
          if (e.layer == layer && e.channel == (int)c)
            plan.threshold = std::max(plan.threshold, e.abs_eta);
      }
  return plan;
}

namespace {

std::vector<int> kept_indices(const std::vector<bool>& mask) {
  std::vector<int> idx;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back((int)i);
  return idx;
}

Tensor slice_kernel(const Tensor& kernel, const std::vector<int>& dim0,
                    const std::vector<int>& dim1) {
  const auto& s = kernel.shape();
  int kh = s[2], kw = s[3];
  Tensor out({(int)dim0.size(), (int)dim1.size(), kh, kw}, true);
  for (size_t a = 0; a < dim0.size(); ++a)
    for (size_t b = 0; b < dim1.size(); ++b) {
      const double* src =
          kernel.data().data() + (((int64_t)dim0[a] * s[1] + dim1[b]) * kh * kw);
      double* dst = out.data().data() + (((int64_t)a * dim1.size() + b) * kh * kw);
      std::copy(src, src + (int64_t)kh * kw, dst);
    }
  return out;
}

BatchNormState slice_bn(const BatchNormState& bn, const std::vector<int>& kept) {
  BatchNormState out((int)kept.size());
  out.epsilon = bn.epsilon;
  out.momentum = bn.momentum;
  for (size_t i = 0; i < kept.size(); ++i) {
    out.eta.data()[i] = bn.eta.data()[kept[i]];
    out.beta.data()[i] = bn.beta.data()[kept[i]];
    out.running_mean[i] = bn.running_mean[kept[i]];
    out.running_var[i] = bn.running_var[kept[i]];
  }
  return out;
}

}  // namespace

TrainedModel apply_plan(const TrainedModel& model, const PruningPlan& plan) {
  for (const auto& [layer, mask] : plan.keep) {
    bool found = false;
    for (const auto& ref : all_layers(model.spec))
      if (ref.id == layer) {
        const auto& l = layer_spec(model.spec, ref);
        if (!l.has_bn)
          throw std::invalid_argument("apply_plan: layer " + std::to_string(layer) +
                                      " is not prunable");
        if ((int)mask.size() != l.out_channels)
          throw std::invalid_argument("apply_plan: mask size mismatch on layer " +
                                      std::to_string(layer));
        found = true;
      }
    if (!found) throw std::invalid_argument("apply_plan: unknown layer id");
  }

  TrainedModel out;
  out.spec = model.spec;
  auto prune_stack = [&](bool decoder, int id_offset, int cin) {
    const auto& layers = decoder ? model.spec.decoder : model.spec.encoder;
    auto& out_layers = decoder ? out.spec.decoder : out.spec.encoder;
    const auto& kernels = decoder ? model.dec_kernels : model.enc_kernels;
    const auto& bns = decoder ? model.dec_bn : model.enc_bn;
    auto& out_kernels = decoder ? out.dec_kernels : out.enc_kernels;
    auto& out_bns = decoder ? out.dec_bn : out.enc_bn;

    std::vector<int> in_kept(cin);
    std::iota(in_kept.begin(), in_kept.end(), 0);
    for (size_t i = 0; i < layers.size(); ++i) {
      int id = id_offset + (int)i;
      std::vector<int> out_kept;
      auto it = plan.keep.find(id);
      if (it != plan.keep.end()) {
        out_kept = kept_indices(it->second);
      } else {
        out_kept.resize(layers[i].out_channels);
        std::iota(out_kept.begin(), out_kept.end(), 0);
      }
      out_kernels.push_back(layers[i].kind == LayerKind::Conv
                                ? slice_kernel(kernels[i], out_kept, in_kept)
                                : slice_kernel(kernels[i], in_kept, out_kept));
      out_bns.push_back(layers[i].has_bn ? slice_bn(bns[i], out_kept) : BatchNormState());
      out_layers[i].out_channels = (int)out_kept.size();
      // next layer keeps the input channels matching this layer's survivors
      in_kept = out_kept;
    }
  };
  int enc_count = (int)model.spec.encoder.size();
  prune_stack(false, 0, model.spec.in_c);
  int feat_c, feat_h, feat_w;
  out.spec.feature_map_dims(feat_c, feat_h, feat_w);
  prune_stack(true, enc_count, feat_c);
  out.spec.validate();
  return out;
}

TrainedModel fine_tune(const TrainedModel& model, const ImageCorpus& train,
                       const ImageCorpus& val, int epochs, const TrainConfig& cfg) {
  TrainedModel current = model.clone();
  if (epochs == 0) return current;
  uint64_t val_seed = mix_seed(cfg.seed, 0x76616c00ULL);
  TrainedModel best = model.clone();
  double best_mse = evaluate_mse(best, val, cfg.snr_db, cfg.fading, val_seed);
  TrainConfig ft_cfg = cfg;
  ft_cfg.lambda = 0.0;
  ft_cfg.epochs = epochs;
  train_epochs(current, train, ft_cfg, [&](int) {
    double mse = evaluate_mse(current, val, cfg.snr_db, cfg.fading, val_seed);
    if (mse < best_mse) {
      best_mse = mse;
      best = current.clone();
    }
  });
  return best;
}

TrainedModel run_pruning_rounds(const TrainedModel& model, const ImageCorpus& train,
                                const ImageCorpus& val, const SparsityConfig& scfg,
                                const TrainConfig& tcfg) {
  if (scfg.gamma == 0.0) return model.clone();
  TrainedModel current = model.clone();
  int rounds = std::max(1, scfg.pruning_rounds);
  double per_round = 1.0 - std::pow(1.0 - scfg.gamma, 1.0 / rounds);
  for (int round = 0; round < rounds; ++round) {
    ChannelImportance imp = rank_channels(current);
    PruningPlan plan = build_plan(current, imp, per_round);
    current = apply_plan(current, plan);
    TrainConfig round_cfg = tcfg;
    round_cfg.seed = mix_seed(tcfg.seed, 0x726f756eULL, (uint64_t)round);
    current = fine_tune(current, train, val, scfg.finetune_epochs, round_cfg);
  }
  return current;
}

std::vector<PruningReportRow> pruning_report(const TrainedModel& before,
                                             const PruningPlan& plan) {
  std::vector<PruningReportRow> rows;
  for (const auto& ref : all_layers(before.spec)) {
    if (!layer_spec(before.spec, ref).has_bn) continue;
    const auto& bn = layer_bn(before, ref);
    auto it = plan.keep.find(ref.id);
    PruningReportRow row{};
    row.layer = ref.id;
    row.channels_before = bn.channels();
    row.min_abs_eta_kept = std::numeric_limits<double>::infinity();
    row.max_abs_eta_kept = 0.0;
    int kept = 0;
    for (int c = 0; c < bn.channels(); ++c) {
      bool keep = it == plan.keep.end() || it->second[c];
      if (!keep) continue;
      ++kept;
      double v = std::abs(bn.eta.data()[c]);
      row.min_abs_eta_kept = std::min(row.min_abs_eta_kept, v);
      row.max_abs_eta_kept = std::max(row.max_abs_eta_kept, v);
    }
    row.channels_after = kept;
    rows.push_back(row);
  }
  return rows;
}

void write_pruning_report(const std::vector<PruningReportRow>& rows,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "layer,channels_before,channels_after,min_abs_eta_kept,max_abs_eta_kept\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g\n", r.layer,
                  r.channels_before, r.channels_after, r.min_abs_eta_kept,
                  r.max_abs_eta_kept);
    out << buf;
  }
}

}  // namespace jscc
