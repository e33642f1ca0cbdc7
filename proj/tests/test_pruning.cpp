#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "jscc/dataset.hpp"
#include "jscc/model.hpp"
#include "jscc/pruning.hpp"
#include "jscc/rng.hpp"

using namespace jscc;

namespace {

ImageCorpus tiny_corpus(int n = 8, uint64_t seed = 5) {
  return synthetic_corpus(n, 32, 32, seed);
}

// Zero (eta, beta) on the channels a plan removes, keeping the architecture.
TrainedModel masked_copy(const TrainedModel& model, const PruningPlan& plan) {
  TrainedModel masked = model.clone();
  int e = (int)masked.spec.encoder.size();
  for (const auto& [layer, keep] : plan.keep) {
    BatchNormState& bn = layer < e ? masked.enc_bn[layer] : masked.dec_bn[layer - e];
    for (size_t c = 0; c < keep.size(); ++c)
      if (!keep[c]) {
        bn.eta.data()[c] = 0.0;
        bn.beta.data()[c] = 0.0;
      }
  }
  return masked;
}

int count_prunable(const TrainedModel& model) {
  int n = 0;
  for (const auto& bn : model.enc_bn) n += bn.channels();
  for (const auto& bn : model.dec_bn) n += bn.channels();
  return n;
}

}  // namespace

TEST_CASE("sparse update: one explicit step against the hand formula") {
  // eta <- eta - alpha * (dL/deta + lambda * sign(eta)); with dL/deta = 0,
  // alpha = 0.1, lambda = 0.01 the magnitude shrinks by about alpha per Adam
  // step (bias-corrected Adam normalizes a constant gradient to ~1).
  Tensor eta = Tensor::from_data({1}, {0.5}, true);
  eta.grad()[0] = 0.0 + 0.01 * 1.0;  // lambda * sign(0.5)
  std::vector<Tensor> params{eta};
  AdamState st;
  st.lr = 0.1;
  st.init(params);
  adam_step(params, st);
  CHECK(eta.data()[0] == doctest::Approx(0.4).epsilon(1e-4));
}

TEST_CASE("explicit L1 subgradient equals putting the penalty in the loss") {
  // Train twice from the same init: once with sparse_train's explicit
  // lambda*sign(eta) term, once stepping a graph loss MSE + lambda*sum|eta|.
  // The trajectories must match step for step.
  ImageCorpus corpus = tiny_corpus(8);
  double lambda = 1e-2;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.lambda = lambda;
  cfg.lr = 1e-3;
  cfg.batch_size = 4;
  cfg.seed = 77;

  TrainedModel a = init_model(default_spec(), 123);
  TrainedModel b = a.clone();
  sparse_train(a, corpus, cfg);

  // manual replica: identical shuffling, noise draws, and updates, but the
  // penalty enters through the tape instead
  {
    auto params = b.parameters();
    AdamState adam;
    adam.lr = cfg.lr;
    adam.init(params);
    std::vector<Tensor> etas;
    for (auto& bn : b.enc_bn)
      if (bn.channels() > 0) etas.push_back(bn.eta);
    for (auto& bn : b.dec_bn)
      if (bn.channels() > 0) etas.push_back(bn.eta);
    int n = (int)corpus.size();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::vector<int> order(n);
      for (int i = 0; i < n; ++i) order[i] = i;
      Rng shuffle_rng(mix_seed(cfg.seed, 0x73687566ULL, (uint64_t)epoch));
      for (int i = n - 1; i > 0; --i) {
        int j = (int)shuffle_rng.uniform_index((uint64_t)i + 1);
        std::swap(order[i], order[j]);
      }
      int batches = n / cfg.batch_size;
      for (int bi = 0; bi < batches; ++bi) {
        std::vector<int> idx(order.begin() + bi * cfg.batch_size,
                             order.begin() + (bi + 1) * cfg.batch_size);
        Tensor x = make_batch(corpus, idx);
        Tensor z = encode(b, x, true);
        Rng noise_rng(mix_seed(cfg.seed, 0x6e6f6973ULL, (uint64_t)epoch, (uint64_t)bi));
        Tensor z_noisy;
        {
          // one per-image channel draw, then per-feature noise (the same
          // stream sparse_train consumes)
          double sigma2 = std::pow(10.0, -cfg.snr_db / 10.0);
          Tensor noise = Tensor::zeros(z.shape());
          int nimg = z.shape()[0], k = z.shape()[1];
          for (int im = 0; im < nimg; ++im) {
            ChannelRealization ch =
                sample_channel(cfg.snr_db, cfg.fading, (size_t)k, noise_rng);
            for (int f = 0; f < k; ++f) {
              double mag = std::abs(ch.gain((size_t)f));
              noise.data()[im * k + f] =
                  noise_rng.gaussian(0.0, std::sqrt(sigma2) / mag);
            }
          }
          z_noisy = add(z, noise);
        }
        Tensor rec = decode(b, z_noisy, true);
        Tensor loss = mse_loss(rec, x);
        for (auto& eta : etas)
          loss = add(loss, scale(l1_penalty(eta), lambda));
        loss.backward();
        adam_step(params, adam);
      }
    }
  }
  for (size_t i = 0; i < a.enc_kernels.size(); ++i)
    for (size_t j = 0; j < a.enc_kernels[i].data().size(); ++j)
      CHECK(a.enc_kernels[i].data()[j] ==
            doctest::Approx(b.enc_kernels[i].data()[j]).epsilon(1e-10));
  for (size_t i = 0; i < a.enc_bn.size(); ++i) {
    if (a.enc_bn[i].channels() == 0) continue;
    for (size_t j = 0; j < a.enc_bn[i].eta.data().size(); ++j)
      CHECK(a.enc_bn[i].eta.data()[j] ==
            doctest::Approx(b.enc_bn[i].eta.data()[j]).epsilon(1e-10));
  }
}

TEST_CASE("lambda = 0 training is bit-identical to plain MSE training") {
  ImageCorpus corpus = tiny_corpus(8);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.lr = 1e-3;
  cfg.batch_size = 4;
  cfg.seed = 3;
  TrainedModel a = init_model(default_spec(), 9);
  TrainedModel b = a.clone();
  cfg.lambda = 0.0;
  sparse_train(a, corpus, cfg);
  sparse_train(b, corpus, cfg);
  for (size_t i = 0; i < a.enc_kernels.size(); ++i)
    CHECK(a.enc_kernels[i].data() == b.enc_kernels[i].data());
}

TEST_CASE("scale_only training moves only the BN scaling factors") {
  ImageCorpus corpus = tiny_corpus(8);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.lambda = 1e-2;
  cfg.lr = 1e-3;
  cfg.batch_size = 4;
  cfg.seed = 12;
  cfg.scale_only = true;
  TrainedModel a = init_model(default_spec(), 21);
  TrainedModel before = a.clone();
  sparse_train(a, corpus, cfg);
  for (size_t i = 0; i < a.enc_kernels.size(); ++i)
    CHECK(a.enc_kernels[i].data() == before.enc_kernels[i].data());
  for (size_t i = 0; i < a.dec_kernels.size(); ++i)
    CHECK(a.dec_kernels[i].data() == before.dec_kernels[i].data());
  bool beta_same = true, eta_moved = false;
  for (size_t i = 0; i < a.enc_bn.size(); ++i) {
    if (a.enc_bn[i].channels() == 0) continue;
    beta_same = beta_same && a.enc_bn[i].beta.data() == before.enc_bn[i].beta.data();
    eta_moved = eta_moved || a.enc_bn[i].eta.data() != before.enc_bn[i].eta.data();
  }
  CHECK(beta_same);
  CHECK(eta_moved);
}

TEST_CASE("channel ranking sorts by magnitude with stable tie-breaks") {
  TrainedModel m = init_model(default_spec(), 9);
  // force known etas across the first two encoder BN layers
  auto& bn0 = m.enc_bn[0];
  for (int c = 0; c < bn0.channels(); ++c) bn0.eta.data()[c] = 1.0 + c;
  bn0.eta.data()[3] = -0.05;  // magnitude counts, not sign
  auto& bn1 = m.enc_bn[1];
  for (int c = 0; c < bn1.channels(); ++c) bn1.eta.data()[c] = 2.0 + c;
  bn1.eta.data()[0] = 0.05;  // tie with layer 0 channel 3
  ChannelImportance imp = rank_channels(m);
  CHECK((int)imp.entries.size() == count_prunable(m));
  CHECK(imp.entries[0].abs_eta == doctest::Approx(0.05));
  CHECK(imp.entries[0].layer == 0);  // tie broken toward the earlier layer
  CHECK(imp.entries[0].channel == 3);
  CHECK(imp.entries[1].layer == 1);
  CHECK(imp.entries[1].channel == 0);
  for (size_t i = 1; i < imp.entries.size(); ++i)
    CHECK(imp.entries[i].abs_eta >= imp.entries[i - 1].abs_eta);
}

TEST_CASE("plan marks floor(gamma * N) channels globally") {
  TrainedModel m = init_model(default_spec(), 10);
  ChannelImportance imp = rank_channels(m);
  int n = (int)imp.entries.size();
  for (double gamma : {0.0, 0.2, 0.5, 0.7}) {
    PruningPlan plan = build_plan(m, imp, gamma);
    CHECK(plan.total_pruned <= (int)std::floor(gamma * n));
    if (gamma == 0.0) CHECK(plan.total_pruned == 0);
    // every layer keeps at least one channel
    for (const auto& [layer, keep] : plan.keep) {
      int kept = 0;
      for (bool k : keep) kept += k;
      CHECK(kept >= 1);
    }
  }
}

TEST_CASE("plan on a hand-made ranking keeps the strongest channel per layer") {
  // Tiny model: one BN layer of 4 channels in the encoder.
  ModelSpec spec;
  spec.in_h = spec.in_w = 8;
  spec.in_c = 3;
  LayerSpec e0;
  e0.out_channels = 4;
  e0.kh = e0.kw = 3;
  e0.stride = 1;
  e0.padding = 1;
  e0.has_bn = true;
  e0.act = Activation::ReLU;
  LayerSpec e1 = e0;
  e1.out_channels = 2;
  e1.has_bn = false;
  e1.act = Activation::Sigmoid;
  LayerSpec d0 = e0;
  d0.kind = LayerKind::TransposedConv;
  LayerSpec d1 = d0;
  d1.out_channels = 3;
  d1.has_bn = false;
  d1.act = Activation::Sigmoid;
  spec.encoder = {e0, e1};
  spec.decoder = {d0, d1};
  TrainedModel m = init_model(spec, 4);
  m.enc_bn[0].eta.data() = {0.9, 0.01, 0.5, 0.02};
  m.dec_bn[0].eta.data() = {0.001, 0.002, 0.003, 0.004};

  // gamma = 0.9 over 8 channels: floor -> 7 marked, but each layer must keep
  // one, so 6 are actually pruned and the survivors are the per-layer max.
  PruningPlan plan = build_plan(m, rank_channels(m), 0.9);
  CHECK(plan.total_pruned == 6);
  CHECK(plan.keep.at(0) == std::vector<bool>{true, false, false, false});
  CHECK(plan.keep.at(2) == std::vector<bool>{false, false, false, true});

  // gamma = 0.5: floor(0.5*8) = 4 smallest are the whole decoder BN layer,
  // which still retains its largest channel. The deficit is not handed to
  // other layers, so only 3 are pruned and the encoder is untouched.
  PruningPlan plan2 = build_plan(m, rank_channels(m), 0.5);
  CHECK(plan2.total_pruned == 3);
  CHECK(plan2.keep.at(2) == std::vector<bool>{false, false, false, true});
  CHECK(plan2.keep.at(0) == std::vector<bool>{true, true, true, true});
}

TEST_CASE("surgery preserves the masked forward function") {
  TrainedModel m = init_model(default_spec(), 14);
  Rng rng(2);
  for (double gamma : {0.2, 0.5, 0.7}) {
    PruningPlan plan = build_plan(m, rank_channels(m), gamma);
    TrainedModel pruned = apply_plan(m, plan);
    TrainedModel masked = masked_copy(m, plan);
    for (int trial = 0; trial < 20; ++trial) {
      Tensor x({1, 3, 32, 32}, false);
      for (auto& v : x.data()) v = rng.uniform();
      Tensor ya = decode(pruned, encode(pruned, x, false), false);
      Tensor yb = decode(masked, encode(masked, x, false), false);
      double worst = 0.0;
      for (size_t i = 0; i < ya.data().size(); ++i)
        worst = std::max(worst, std::abs(ya.data()[i] - yb.data()[i]));
      CHECK(worst <= 1e-10);
    }
    // architecture really shrank
    CHECK(count_prunable(pruned) == count_prunable(m) - plan.total_pruned);
    CHECK(count_params_and_macs(pruned).params < count_params_and_macs(m).params);
  }
}

TEST_CASE("empty plan surgery is bit-identical") {
  TrainedModel m = init_model(default_spec(), 15);
  PruningPlan plan = build_plan(m, rank_channels(m), 0.0);
  TrainedModel out = apply_plan(m, plan);
  Rng rng(3);
  Tensor x({1, 3, 32, 32}, false);
  for (auto& v : x.data()) v = rng.uniform();
  CHECK(decode(out, encode(out, x, false), false).data() ==
        decode(m, encode(m, x, false), false).data());
}

TEST_CASE("fine_tune with zero epochs returns the model unchanged") {
  ImageCorpus corpus = tiny_corpus(8);
  ImageCorpus val = tiny_corpus(4, 99);
  TrainedModel m = init_model(default_spec(), 16);
  TrainConfig cfg;
  cfg.batch_size = 4;
  TrainedModel out = fine_tune(m, corpus, val, 0, cfg);
  for (size_t i = 0; i < m.enc_kernels.size(); ++i)
    CHECK(out.enc_kernels[i].data() == m.enc_kernels[i].data());
}

TEST_CASE("fine_tune never returns a model worse than its input on validation") {
  ImageCorpus corpus = tiny_corpus(16);
  ImageCorpus val = tiny_corpus(8, 42);
  TrainedModel m = init_model(default_spec(), 17);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.seed = 5;
  double before = evaluate_mse(m, val, cfg.snr_db, cfg.fading, 1234);
  TrainedModel out = fine_tune(m, corpus, val, 2, cfg);
  double after = evaluate_mse(out, val, cfg.snr_db, cfg.fading, 1234);
  CHECK(after <= before + 1e-12);
}

TEST_CASE("multi-round schedule reaches the target sparsity") {
  ImageCorpus corpus = tiny_corpus(8);
  ImageCorpus val = tiny_corpus(4, 50);
  TrainedModel m = init_model(default_spec(), 18);
  SparsityConfig scfg;
  scfg.gamma = 0.5;
  scfg.pruning_rounds = 4;
  scfg.finetune_epochs = 0;  // isolate the pruning arithmetic
  TrainConfig tcfg;
  tcfg.batch_size = 4;
  TrainedModel out = run_pruning_rounds(m, corpus, val, scfg, tcfg);
  int before = count_prunable(m);
  int after = count_prunable(out);
  // Each round floors its count and each layer keeps a survivor, so the
  // compound result sits at or slightly above the (1-gamma) target.
  int target_keep = before - (int)std::floor(0.5 * before);
  CHECK(after >= target_keep);
  CHECK(after <= target_keep + 10);
  CHECK(count_params_and_macs(out).params < count_params_and_macs(m).params);
}

TEST_CASE("gamma = 0 rounds return a clone") {
  ImageCorpus corpus = tiny_corpus(8);
  ImageCorpus val = tiny_corpus(4, 51);
  TrainedModel m = init_model(default_spec(), 19);
  SparsityConfig scfg;
  scfg.gamma = 0.0;
  TrainConfig tcfg;
  TrainedModel out = run_pruning_rounds(m, corpus, val, scfg, tcfg);
  for (size_t i = 0; i < m.enc_kernels.size(); ++i)
    CHECK(out.enc_kernels[i].data() == m.enc_kernels[i].data());
}

TEST_CASE("pruning report accounts for every prunable layer") {
  TrainedModel m = init_model(default_spec(), 20);
  PruningPlan plan = build_plan(m, rank_channels(m), 0.5);
  auto rows = pruning_report(m, plan);
  int total_before = 0, total_after = 0;
  for (const auto& r : rows) {
    total_before += r.channels_before;
    total_after += r.channels_after;
    CHECK(r.channels_after >= 1);
    CHECK(r.min_abs_eta_kept <= r.max_abs_eta_kept);
  }
  CHECK(total_before == count_prunable(m));
  CHECK(total_before - total_after == plan.total_pruned);
}
