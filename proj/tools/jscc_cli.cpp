// Command-line driver: corpus generation, training/pruning pipeline,
// single-model evaluation, full sweeps, and plot-data emission.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "jscc/experiment.hpp"

namespace fs = std::filesystem;
using namespace jscc;

namespace {

ImageCorpus load_corpus(const RunConfig& cfg) {
  if (cfg.dataset_dir.empty())
    throw std::runtime_error("config must set dataset= (use gen-corpus first)");
  return ingest_dataset(cfg.dataset_dir, cfg.height, cfg.width);
}

std::string gamma_tag(double gamma) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", gamma);
  std::string s = buf;
  for (auto& c : s)
    if (c == '.') c = 'p';
  return s;
}

int cmd_pipeline(const RunConfig& cfg, bool do_sweep) {
  ImageCorpus all = load_corpus(cfg);
  ImageCorpus train, val, test;
  split_corpus(all, train, val, test);
  std::cerr << "corpus: " << train.size() << " train / " << val.size() << " val / "
            << test.size() << " test\n";

  PipelineArtifacts art = run_pipeline(cfg, train, val, test);
  fs::create_directories(cfg.output_dir);
  save_model(art.sparse_model, (fs::path(cfg.output_dir) / "model_sparse.bin").string());
  for (auto& [gamma, model] : art.by_gamma) {
    std::string tag = gamma_tag(gamma);
    save_model(model,
               (fs::path(cfg.output_dir) / ("model_gamma_" + tag + ".bin")).string());
    ModelCost cost = count_params_and_macs(model);
    std::cerr << "gamma=" << gamma << ": " << cost.params << " params, " << cost.macs
              << " macs\n";
  }
  if (art.by_gamma.count(0.0))
    std::cerr << "unpruned analog PSNR at train SNR: " << art.gamma0_val_psnr << " dB\n";

  if (do_sweep) {
    std::vector<DiagnosticsRow> diag;
    auto records = sweep(art.by_gamma, cfg, test, &diag);
    write_records_csv(records, (fs::path(cfg.output_dir) / "records.csv").string());
    write_diagnostics_csv(diag, (fs::path(cfg.output_dir) / "diagnostics.csv").string());
    emit_plotdata(records, cfg.train_snr_db,
                  (fs::path(cfg.output_dir) / "plotdata").string());
    std::cerr << records.size() << " sweep rows written\n";
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& model_path, const std::string& m,
             double snr_db) {
  TrainedModel model = load_model(model_path);
  ImageCorpus all = load_corpus(cfg);
  ImageCorpus train, val, test;
  split_corpus(all, train, val, test);
  CellMetrics cm = evaluate_jscc_cell(model, test, m, snr_db, cfg.seed,
                                      cfg.eval_seeds[0], FadingMode::PerImage, 0.0);
  std::printf("m=%s snr=%g psnr=%.4f ssim=%.6f ser=%.6g\n", m.c_str(), snr_db, cm.psnr,
              cm.ssim, cm.ser);
  return 0;
}

int cmd_sweep_only(const RunConfig& cfg) {
  ImageCorpus all = load_corpus(cfg);
  ImageCorpus train, val, test;
  split_corpus(all, train, val, test);
  std::map<double, TrainedModel> models;
  for (double gamma : cfg.gammas) {
    std::string tag = gamma_tag(gamma);
    fs::path p = fs::path(cfg.output_dir) / ("model_gamma_" + tag + ".bin");
    if (!fs::exists(p))
      throw std::runtime_error("missing model " + p.string() + "; run pipeline first");
    models.emplace(gamma, load_model(p.string()));
  }
  std::vector<DiagnosticsRow> diag;
  auto records = sweep(models, cfg, test, &diag);
  write_records_csv(records, (fs::path(cfg.output_dir) / "records.csv").string());
  write_diagnostics_csv(diag, (fs::path(cfg.output_dir) / "diagnostics.csv").string());
  emit_plotdata(records, cfg.train_snr_db,
                (fs::path(cfg.output_dir) / "plotdata").string());
  std::cerr << records.size() << " sweep rows written\n";
  return 0;
}

int cmd_report(const std::string& records_path, double train_snr_db,
               const std::string& out_dir) {
  auto records = read_records_csv(records_path);
  emit_plotdata(records, train_snr_db, out_dir);
  std::cerr << "plot data emitted to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"analog autoencoder transmission experiments"};
  app.require_subcommand(1);

  std::string config_path;

  auto* gen = app.add_subcommand("gen-corpus", "write a synthetic PPM corpus");
  std::string gen_dir = "data";
  int gen_count = 640, gen_h = 32, gen_w = 32;
  uint64_t gen_seed = 7;
  gen->add_option("--dir", gen_dir, "output directory");
  gen->add_option("--count", gen_count, "number of images");
  gen->add_option("--height", gen_h);
  gen->add_option("--width", gen_w);
  gen->add_option("--seed", gen_seed);

  auto* pipe = app.add_subcommand("pipeline", "train, sparsify, prune, fine-tune");
  pipe->add_option("--config", config_path, "key=value config file")->required();
  bool pipe_sweep = false;
  pipe->add_flag("--sweep", pipe_sweep, "also run the evaluation sweep");

  auto* ev = app.add_subcommand("eval", "evaluate one saved model");
  std::string ev_model, ev_m = "analog";
  double ev_snr = 25.0;
  ev->add_option("--config", config_path)->required();
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--m", ev_m, "\"analog\" or a modulation order");
  ev->add_option("--snr", ev_snr);

  auto* sw = app.add_subcommand("sweep", "sweep previously saved models");
  sw->add_option("--config", config_path)->required();

  auto* rep = app.add_subcommand("report", "re-emit plot CSVs from records.csv");
  std::string rep_records, rep_out = "plotdata";
  double rep_snr = 25.0;
  rep->add_option("--records", rep_records)->required();
  rep->add_option("--train-snr", rep_snr);
  rep->add_option("--out", rep_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      ImageCorpus corpus = synthetic_corpus(gen_count, gen_h, gen_w, gen_seed);
      write_corpus(corpus, gen_dir);
      std::cerr << gen_count << " images written to " << gen_dir << "\n";
      return 0;
    }
    if (*rep) return cmd_report(rep_records, rep_snr, rep_out);
    RunConfig cfg = load_config(config_path);
    if (*pipe) return cmd_pipeline(cfg, pipe_sweep);
    if (*ev) return cmd_eval(cfg, ev_model, ev_m, ev_snr);
    if (*sw) return cmd_sweep_only(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
