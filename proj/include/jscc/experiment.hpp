#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jscc/baseline.hpp"
#include "jscc/chain.hpp"
#include "jscc/dataset.hpp"
#include "jscc/model.hpp"
#include "jscc/pruning.hpp"

namespace jscc {

struct RunConfig {
  std::string dataset_dir;
  int height = 32, width = 32;
  std::string spec_id = "default";  // "default" (k/n=2/3) or "half-bandwidth" (1/3)
  uint64_t seed = 1;
  double train_snr_db = 25.0;
  int pretrain_epochs = 10;
  int sparse_epochs = 10;
  int pruning_rounds = 4;
  int finetune_epochs = 5;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double lambda = 1e-5;
  std::vector<double> gammas = {0.0, 0.2, 0.5, 0.7, 0.9};
  std::vector<int> orders = {4, 16, 64, 256};
  std::vector<double> snr_sweep = {0, 3, 6, 9, 12, 15, 18, 21, 24};
  std::vector<uint64_t> eval_seeds = {0};
  std::string output_dir = "out";
  double baseline_quality = 1.0;
  bool include_baseline = true;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
  ModelSpec model_spec() const;
};

// Flat key=value config file; '#' starts a comment. Unknown keys are
// errors. JSCC_OUTPUT_DIR, when set, overrides output_dir.
RunConfig load_config(const std::string& path);

struct ExperimentRecord {
  std::string scheme;  // "jscc" or "separate"
  double gamma = 0.0;
  std::string m;       // "analog", a QAM order, or the baseline order
  double snr_db = 0.0;
  uint64_t seed = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double ser = 0.0;    // symbol errors for jscc, info-bit errors for separate
  int64_t params = 0;
  int64_t macs = 0;
};

struct DiagnosticsRow {
  int image_id = 0;
  double snr_db = 0.0;
  std::string m;
  double gamma = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double ser = 0.0;
  double mean_eps_q = 0.0;
  double mean_eps_c = 0.0;
};

// Deterministic 80/10/10 split by corpus order.
void split_corpus(const ImageCorpus& all, ImageCorpus& train, ImageCorpus& val,
                  ImageCorpus& test);

struct PipelineArtifacts {
  TrainedModel sparse_model;
  std::map<double, TrainedModel> by_gamma;  // gamma -> pruned+fine-tuned model
  double gamma0_val_psnr = 0.0;  // analog at train SNR via the sweep's eval path
};

// Pretrain -> sparse train -> per-gamma prune+fine-tune branches from the
// shared sparse checkpoint. Fully reproducible from (cfg, seed).
PipelineArtifacts run_pipeline(const RunConfig& cfg, const ImageCorpus& train,
                               const ImageCorpus& val, const ImageCorpus& test);

// Mean metrics of one sweep cell over the test corpus. The per-image RNG
// derives from (master seed, eval seed, SNR, image index) only, so all
// modulation orders and the analog path see the same channel draws.
struct CellMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  double ser = 0.0;
  double mean_eps_q = 0.0;
  double mean_eps_c = 0.0;
};

CellMetrics evaluate_jscc_cell(const TrainedModel& model, const ImageCorpus& test,
                               const std::string& m, double snr_db,
                               uint64_t master_seed, uint64_t eval_seed,
                               FadingMode fading, double gamma,
                               std::vector<DiagnosticsRow>* diag = nullptr);

CellMetrics evaluate_baseline_cell(const ImageCorpus& test, const SeparateConfig& bcfg,
                                   double snr_db, uint64_t master_seed,
                                   uint64_t eval_seed,
                                   std::vector<DiagnosticsRow>* diag = nullptr);

// Full factorial (gamma x {orders, analog} x SNR x eval seed) plus baseline
// rows. Cells run on a worker pool; results are ordered and byte-stable.
std::vector<ExperimentRecord> sweep(const std::map<double, TrainedModel>& models,
                                    const RunConfig& cfg, const ImageCorpus& test,
                                    std::vector<DiagnosticsRow>* diagnostics = nullptr);

void write_records_csv(const std::vector<ExperimentRecord>& records,
                       const std::string& path);
std::vector<ExperimentRecord> read_records_csv(const std::string& path);
void write_diagnostics_csv(const std::vector<DiagnosticsRow>& rows,
                           const std::string& path);

// One tidy CSV per figure analog: fig4-psnr, fig4-ssim, fig5-psnr,
// fig5-ssim, fig7-compare, table2.
void emit_plotdata(const std::vector<ExperimentRecord>& records, double train_snr_db,
                   const std::string& out_dir);

}  // namespace jscc
