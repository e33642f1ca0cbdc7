#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "jscc/chain.hpp"
#include "jscc/dataset.hpp"
#include "jscc/model.hpp"

namespace jscc {

struct TrainConfig {
  int epochs = 10;
  double lambda = 0.0;  // L1 coefficient on BN scaling factors
  double lr = 1e-4;
  int batch_size = 32;
  double snr_db = 25.0;  // training uses the analog channel path only
  FadingMode fading = FadingMode::PerImage;
  uint64_t seed = 1;
  // Update only the BN scaling factors, freezing all other parameters.
  // With everything else frozen, shrinking a scale directly costs
  // reconstruction error, so each scale settles where its marginal MSE cost
  // balances the L1 pull — |eta| then measures per-channel ablation cost on
  // a common scale across layers. With joint training, a scale followed by
  // another BN is a flat direction (the next conv re-absorbs it), and L1
  // collapses whole layers regardless of importance.
  bool scale_only = false;
};

struct SparsityConfig {
  double lambda = 1e-5;
  int sparse_epochs = 10;
  int pruning_rounds = 4;
  int finetune_epochs = 5;
  double gamma = 0.0;  // global pruning rate, in [0,1)
};

// Trains in place for cfg.epochs, minimizing MSE + lambda * sum|eta| with
// the L1 subgradient added explicitly to the eta gradients (sign(0) = 0)
// before each Adam step. lambda = 0 is plain MSE training. Throws on
// non-finite loss.
void sparse_train(TrainedModel& model, const ImageCorpus& train, const TrainConfig& cfg);

// Mean MSE over the corpus through the analog channel at cfg SNR, eval-mode
// BN, seeded noise. Pure function of its inputs.
double evaluate_mse(TrainedModel& model, const ImageCorpus& data, double snr_db,
                    FadingMode fading, uint64_t seed);

struct ChannelEntry {
  int layer = 0;    // global layer id: encoder 0..E-1, then decoder E..E+D-1
  int channel = 0;
  double abs_eta = 0.0;
};

// |eta| of every prunable BN channel, sorted ascending; ties break on
// (layer, channel). Output-defining layers carry no BN and never appear.
struct ChannelImportance {
  std::vector<ChannelEntry> entries;
};

ChannelImportance rank_channels(const TrainedModel& model);

struct PruningPlan {
  std::map<int, std::vector<bool>> keep;  // layer id -> per-channel keep mask
  double threshold = 0.0;  // largest |eta| marked for removal
  int total_pruned = 0;
};

// Marks the floor(gamma * N) globally smallest channels, keeping at least
// one channel per layer (the deficit is not redistributed).
PruningPlan build_plan(const TrainedModel& model, const ChannelImportance& importance,
                       double gamma);

// Physically removes pruned channels: conv output slices, BN entries, and
// the matching input channels of the next layer. Beta of pruned channels is
// zeroed before removal, so the pruned forward pass equals the original
// with those channels' (eta, beta) zeroed.
TrainedModel apply_plan(const TrainedModel& model, const PruningPlan& plan);

// Lambda-0 training that keeps the best validation-MSE checkpoint (the
// incoming model counts as the initial candidate). epochs = 0 returns the
// model unchanged.
TrainedModel fine_tune(const TrainedModel& model, const ImageCorpus& train,
                       const ImageCorpus& val, int epochs, const TrainConfig& cfg);

// Algorithm-style multi-round schedule: each round removes a per-round rate
// r = 1 - (1-gamma)^(1/rounds) of the surviving prunable channels, then
// fine-tunes, so the compound removal reaches gamma by the final round.
TrainedModel run_pruning_rounds(const TrainedModel& model, const ImageCorpus& train,
                                const ImageCorpus& val, const SparsityConfig& scfg,
                                const TrainConfig& tcfg);

struct PruningReportRow {
  int layer;
  int channels_before;
  int channels_after;
  double min_abs_eta_kept;
  double max_abs_eta_kept;
};

std::vector<PruningReportRow> pruning_report(const TrainedModel& before,
                                             const PruningPlan& plan);
void write_pruning_report(const std::vector<PruningReportRow>& rows,
                          const std::string& path);

}  // namespace jscc
