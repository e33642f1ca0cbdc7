#include "jscc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "jscc/metrics.hpp"
#include "jscc/rng.hpp"

namespace jscc {

namespace {

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    // trim
    size_t a = item.find_first_not_of(" \t");
    size_t b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

uint64_t snr_key(double snr_db) {
  return static_cast<uint64_t>(static_cast<int64_t>(std::llround(snr_db * 1000.0)) +
                               (1ll << 40));
}

}  // namespace

void RunConfig::validate() const {
  if (height <= 0 || width <= 0) throw std::invalid_argument("config: bad image dims");
  if (batch_size <= 0) throw std::invalid_argument("config: batch_size must be positive");
  if (pretrain_epochs < 0 || sparse_epochs < 0 || pruning_rounds < 0 ||
      finetune_epochs < 0)
    throw std::invalid_argument("config: negative epoch count");
  if (lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
  for (double g : gammas)
    if (g < 0.0 || g >= 1.0) throw std::invalid_argument("config: gamma outside [0,1)");
  for (int m : orders)
    if (!supported_order(m)) throw std::invalid_argument("config: unsupported order");
  if (spec_id != "default" && spec_id != "half-bandwidth")
    throw std::invalid_argument("config: unknown spec id " + spec_id);
  if (eval_seeds.empty()) throw std::invalid_argument("config: need >= 1 eval seed");
}

ModelSpec RunConfig::model_spec() const {
  ModelSpec s = spec_id == "half-bandwidth" ? half_bandwidth_spec() : default_spec();
  s.in_h = height;
  s.in_w = width;
  return s;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
      continue;
    }
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "dataset") cfg.dataset_dir = val;
    else if (key == "height") cfg.height = std::stoi(val);
    else if (key == "width") cfg.width = std::stoi(val);
    else if (key == "spec") cfg.spec_id = val;
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "train_snr_db") cfg.train_snr_db = std::stod(val);
    else if (key == "pretrain_epochs") cfg.pretrain_epochs = std::stoi(val);
    else if (key == "sparse_epochs") cfg.sparse_epochs = std::stoi(val);
    else if (key == "pruning_rounds") cfg.pruning_rounds = std::stoi(val);
    else if (key == "finetune_epochs") cfg.finetune_epochs = std::stoi(val);
    else if (key == "batch_size") cfg.batch_size = std::stoi(val);
    else if (key == "learning_rate") cfg.learning_rate = std::stod(val);
    else if (key == "lambda") cfg.lambda = std::stod(val);
    else if (key == "output_dir") cfg.output_dir = val;
    else if (key == "baseline_quality") cfg.baseline_quality = std::stod(val);
    else if (key == "include_baseline") cfg.include_baseline = val == "1" || val == "true";
    else if (key == "threads") cfg.threads = std::stoi(val);
    else if (key == "gammas") {
      cfg.gammas.clear();
      for (const auto& g : split_csv_list(val)) cfg.gammas.push_back(std::stod(g));
    } else if (key == "orders") {
      cfg.orders.clear();
      for (const auto& m : split_csv_list(val)) cfg.orders.push_back(std::stoi(m));
    } else if (key == "snr_sweep") {
      cfg.snr_sweep.clear();
      for (const auto& s : split_csv_list(val)) cfg.snr_sweep.push_back(std::stod(s));
    } else if (key == "eval_seeds") {
      cfg.eval_seeds.clear();
      for (const auto& s : split_csv_list(val)) cfg.eval_seeds.push_back(std::stoull(s));
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key " + key);
    }
  }
  if (const char* env = std::getenv("JSCC_OUTPUT_DIR")) cfg.output_dir = env;
  cfg.validate();
  return cfg;
}

void split_corpus(const ImageCorpus& all, ImageCorpus& train, ImageCorpus& val,
                  ImageCorpus& test) {
  size_t n = all.size();
  if (n < 3) throw std::invalid_argument("split_corpus: need at least 3 images");
  size_t n_train = n * 8 / 10;
  size_t n_val = std::max<size_t>(1, n / 10);
  train.h = val.h = test.h = all.h;
  train.w = val.w = test.w = all.w;
  train.c = val.c = test.c = all.c;
  train.images.assign(all.images.begin(), all.images.begin() + n_train);
  val.images.assign(all.images.begin() + n_train, all.images.begin() + n_train + n_val);
  test.images.assign(all.images.begin() + n_train + n_val, all.images.end());
}

PipelineArtifacts run_pipeline(const RunConfig& cfg, const ImageCorpus& train,
                               const ImageCorpus& val, const ImageCorpus& test) {
  cfg.validate();
  PipelineArtifacts art;
  TrainedModel model = init_model(cfg.model_spec(), cfg.seed);

  TrainConfig tcfg;
  tcfg.batch_size = cfg.batch_size;
  tcfg.lr = cfg.learning_rate;
  tcfg.snr_db = cfg.train_snr_db;
  tcfg.fading = FadingMode::PerImage;

  // pretraining: plain MSE
  tcfg.epochs = cfg.pretrain_epochs;
  tcfg.lambda = 0.0;
  tcfg.seed = mix_seed(cfg.seed, 0x70726574ULL);
  sparse_train(model, train, tcfg);

  // sparse phase: MSE + lambda * sum|eta|
  tcfg.epochs = cfg.sparse_epochs;
  tcfg.lambda = cfg.lambda;
  tcfg.seed = mix_seed(cfg.seed, 0x73707273ULL);
  sparse_train(model, train, tcfg);
  art.sparse_model = model.clone();

  for (double gamma : cfg.gammas) {
    if (gamma == 0.0) {
      art.by_gamma.emplace(gamma, model.clone());
      continue;
    }
    SparsityConfig scfg;
    scfg.lambda = cfg.lambda;
    scfg.gamma = gamma;
    scfg.pruning_rounds = cfg.pruning_rounds;
    scfg.finetune_epochs = cfg.finetune_epochs;
    TrainConfig ft = tcfg;
    ft.lambda = 0.0;
    ft.seed = mix_seed(cfg.seed, 0x66696e65ULL,
                       (uint64_t)std::llround(gamma * 1000.0));
    art.by_gamma.emplace(gamma, run_pruning_rounds(model, train, val, scfg, ft));
  }

  if (art.by_gamma.count(0.0)) {
    // recorded through the same evaluation path the sweep uses
    CellMetrics m = evaluate_jscc_cell(art.by_gamma.at(0.0), test, "analog",
                                       cfg.train_snr_db, cfg.seed, cfg.eval_seeds[0],
                                       FadingMode::PerImage, 0.0);
    art.gamma0_val_psnr = m.psnr;
  }
  return art;
}

CellMetrics evaluate_jscc_cell(const TrainedModel& model, const ImageCorpus& test,
                               const std::string& m, double snr_db,
                               uint64_t master_seed, uint64_t eval_seed,
                               FadingMode fading, double gamma,
                               std::vector<DiagnosticsRow>* diag) {
  if (test.images.empty()) throw std::invalid_argument("evaluate_jscc_cell: empty corpus");
  TrainedModel local = model.clone();
  bool analog = m == "analog";
  int order = analog ? 0 : std::stoi(m);
  std::vector<std::pair<double, double>> pairs;
  double ser_sum = 0.0, eq_sum = 0.0, ec_sum = 0.0;
  int k = local.spec.feature_len();
  for (size_t img = 0; img < test.images.size(); ++img) {
    Tensor x = image_to_tensor(test.images[img]);
    Rng rng(mix_seed(master_seed, eval_seed, snr_key(snr_db), (uint64_t)img));
    Tensor rec;
    double img_ser = 0.0, img_eq = 0.0, img_ec = 0.0;
    if (analog) {
      Tensor z = encode(local, x, false);
      ChannelRealization ch = sample_channel(snr_db, fading, (size_t)k, rng);
      Tensor z_noisy = analog_path(z, ch, rng);
      rec = decode(local, z_noisy, false);
      double acc = 0.0;
      for (int i = 0; i < k; ++i)
        acc += std::abs(z_noisy.data()[i] - z.data()[i]);
      img_ec = acc / k;
    } else {
      DigitalResult res = digital_inference(local, x, order, snr_db, fading, rng);
      rec = res.reconstruction;
      img_ser = res.diagnostics.symbol_error_rate;
      img_eq = res.diagnostics.mean_abs_eps_q;
      img_ec = res.diagnostics.mean_abs_eps_c;
    }
    ser_sum += img_ser;
    eq_sum += img_eq;
    ec_sum += img_ec;
    Tensor x255 = scale(x, 255.0);
    Tensor r255 = scale(rec, 255.0);
    double p = psnr(x255, r255);
    double s = ssim(x255, r255);
    pairs.push_back({p, s});
    if (diag)
      diag->push_back({(int)img, snr_db, m, gamma, p, s, img_ser, img_eq, img_ec});
  }
  BatchMetrics bm = batch_metrics(pairs);
  CellMetrics out;
  out.psnr = bm.mean_psnr;
  out.ssim = bm.mean_ssim;
  out.ser = ser_sum / test.images.size();
  out.mean_eps_q = eq_sum / test.images.size();
  out.mean_eps_c = ec_sum / test.images.size();
  return out;
}

CellMetrics evaluate_baseline_cell(const ImageCorpus& test, const SeparateConfig& bcfg,
                                   double snr_db, uint64_t master_seed,
                                   uint64_t eval_seed, std::vector<DiagnosticsRow>* diag) {
  if (test.images.empty())
    throw std::invalid_argument("evaluate_baseline_cell: empty corpus");
  std::vector<std::pair<double, double>> pairs;
  double ber_sum = 0.0;
  for (size_t img = 0; img < test.images.size(); ++img) {
    Rng rng(mix_seed(master_seed, eval_seed, snr_key(snr_db), (uint64_t)img,
                     0x73657061ULL));
    SeparateResult res = separate_transmit(test.images[img], bcfg, snr_db, rng);
    std::vector<double> x255(test.images[img].data);
    std::vector<double> r255(res.reconstruction.data);
    for (auto& v : x255) v *= 255.0;
    for (auto& v : r255) v *= 255.0;
    double p = psnr(x255, r255);
    // SSIM per channel plane
    double s = 0.0;
    size_t plane = (size_t)test.h * test.w;
    for (int c = 0; c < test.c; ++c) {
      std::vector<double> a(x255.begin() + c * plane, x255.begin() + (c + 1) * plane);
      std::vector<double> b(r255.begin() + c * plane, r255.begin() + (c + 1) * plane);
      s += ssim(a, b, test.h, test.w);
    }
    s /= test.c;
    pairs.push_back({p, s});
    ber_sum += res.bit_error_rate;
    if (diag)
      diag->push_back({(int)img, snr_db, std::to_string(bcfg.modulation_order), -1.0, p,
                       s, res.bit_error_rate, 0.0, 0.0});
  }
  BatchMetrics bm = batch_metrics(pairs);
  CellMetrics out;
  out.psnr = bm.mean_psnr;
  out.ssim = bm.mean_ssim;
  out.ser = ber_sum / test.images.size();
  return out;
}

namespace {

struct Cell {
  std::string scheme;
  double gamma = 0.0;
  std::string m;
  double snr_db = 0.0;
  uint64_t seed = 0;
};

}  // namespace

std::vector<ExperimentRecord> sweep(const std::map<double, TrainedModel>& models,
                                    const RunConfig& cfg, const ImageCorpus& test,
                                    std::vector<DiagnosticsRow>* diagnostics) {
  cfg.validate();
  std::vector<Cell> cells;
  for (const auto& [gamma, model] : models) {
    (void)model;
    std::vector<std::string> ms;
    ms.push_back("analog");
    for (int m : cfg.orders) ms.push_back(std::to_string(m));
    for (const auto& m : ms)
      for (double snr : cfg.snr_sweep)
        for (uint64_t seed : cfg.eval_seeds) cells.push_back({"jscc", gamma, m, snr, seed});
  }
  if (cfg.include_baseline) {
    SeparateConfig bcfg;
    for (double snr : cfg.snr_sweep)
      for (uint64_t seed : cfg.eval_seeds)
        cells.push_back({"separate", -1.0, std::to_string(bcfg.modulation_order), snr, seed});
  }

  std::vector<ExperimentRecord> records(cells.size());
  std::vector<std::vector<DiagnosticsRow>> diag(cells.size());
  std::atomic<size_t> next{0};
  int nthreads = cfg.threads > 0
                     ? cfg.threads
                     : std::max(1u, std::thread::hardware_concurrency());
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& c = cells[i];
      ExperimentRecord rec;
      rec.scheme = c.scheme;
      rec.gamma = c.gamma;
      rec.m = c.m;
      rec.snr_db = c.snr_db;
      rec.seed = c.seed;
      std::vector<DiagnosticsRow>* d = diagnostics ? &diag[i] : nullptr;
      if (c.scheme == "jscc") {
        const TrainedModel& model = models.at(c.gamma);
        CellMetrics m = evaluate_jscc_cell(model, test, c.m, c.snr_db, cfg.seed, c.seed,
                                           FadingMode::PerImage, c.gamma, d);
        ModelCost cost = count_params_and_macs(model);
        rec.psnr = m.psnr;
        rec.ssim = m.ssim;
        rec.ser = m.ser;
        rec.params = cost.params;
        rec.macs = cost.macs;
      } else {
        SeparateConfig bcfg;
        bcfg.quality = cfg.baseline_quality;
        CellMetrics m = evaluate_baseline_cell(test, bcfg, c.snr_db, cfg.seed, c.seed, d);
        rec.psnr = m.psnr;
        rec.ssim = m.ssim;
        rec.ser = m.ser;
      }
      records[i] = rec;
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (diagnostics)
    for (auto& rows : diag)
      diagnostics->insert(diagnostics->end(), rows.begin(), rows.end());
  return records;
}

void write_records_csv(const std::vector<ExperimentRecord>& records,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "scheme,gamma,m,snr_db,seed,psnr,ssim,ser,params,macs\n";
  for (const auto& r : records) {
    out << r.scheme << "," << fmt_double(r.gamma) << "," << r.m << ","
        << fmt_double(r.snr_db) << "," << r.seed << "," << fmt_double(r.psnr) << ","
        << fmt_double(r.ssim) << "," << fmt_double(r.ser) << "," << r.params << ","
        << r.macs << "\n";
  }
}

std::vector<ExperimentRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<ExperimentRecord> records;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_list(line);
    if (fields.size() != 10) throw std::runtime_error("bad records row: " + line);
    ExperimentRecord r;
    r.scheme = fields[0];
    r.gamma = std::stod(fields[1]);
    r.m = fields[2];
    r.snr_db = std::stod(fields[3]);
    r.seed = std::stoull(fields[4]);
    r.psnr = std::stod(fields[5]);
    r.ssim = std::stod(fields[6]);
    r.ser = std::stod(fields[7]);
    r.params = std::stoll(fields[8]);
    r.macs = std::stoll(fields[9]);
    records.push_back(r);
  }
  return records;
}

void write_diagnostics_csv(const std::vector<DiagnosticsRow>& rows,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "image_id,snr_db,m,gamma,psnr,ssim,ser,mean_eps_q,mean_eps_c\n";
  for (const auto& r : rows) {
    out << r.image_id << "," << fmt_double(r.snr_db) << "," << r.m << ","
        << fmt_double(r.gamma) << "," << fmt_double(r.psnr) << "," << fmt_double(r.ssim)
        << "," << fmt_double(r.ser) << "," << fmt_double(r.mean_eps_q) << ","
        << fmt_double(r.mean_eps_c) << "\n";
  }
}

namespace {

struct GroupKey {
  std::string scheme, m;
  double gamma, snr;
  bool operator<(const GroupKey& o) const {
    if (scheme != o.scheme) return scheme < o.scheme;
    if (gamma != o.gamma) return gamma < o.gamma;
    if (m != o.m) return m < o.m;
    return snr < o.snr;
  }
};

struct GroupAgg {
  double psnr = 0.0, ssim = 0.0;
  int64_t params = 0, macs = 0;
  int count = 0;
};

std::map<GroupKey, GroupAgg> group_means(const std::vector<ExperimentRecord>& records) {
  std::map<GroupKey, GroupAgg> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.scheme, r.m, r.gamma, r.snr_db}];
    g.psnr += r.psnr;
    g.ssim += r.ssim;
    g.params = r.params;
    g.macs = r.macs;
    ++g.count;
  }
  for (auto& [k, g] : groups) {
    g.psnr /= g.count;
    g.ssim /= g.count;
  }
  return groups;
}

}  // namespace

void emit_plotdata(const std::vector<ExperimentRecord>& records, double train_snr_db,
                   const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto groups = group_means(records);
  auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

  // fig4: pruning ratios (digital, highest order) vs the separate baseline
  std::string top_order;
  for (const auto& [k, g] : groups)
    if (k.scheme == "jscc" && k.m != "analog" &&
        (top_order.empty() || std::stoi(k.m) > std::stoi(top_order)))
      top_order = k.m;
  for (const char* metric : {"psnr", "ssim"}) {
    std::ofstream out(path((std::string("fig4-") + metric + ".csv").c_str()));
    out << "scheme,gamma,snr_db," << metric << "\n";
    for (const auto& [k, g] : groups) {
      bool keep = (k.scheme == "jscc" && k.m == top_order) || k.scheme == "separate";
      if (!keep) continue;
      out << k.scheme << "," << fmt_double(k.gamma) << "," << fmt_double(k.snr) << ","
          << fmt_double(metric[0] == 'p' ? g.psnr : g.ssim) << "\n";
    }
  }

  // fig5: gamma = 0.7 across modulation orders plus analog
  for (const char* metric : {"psnr", "ssim"}) {
    std::ofstream out(path((std::string("fig5-") + metric + ".csv").c_str()));
    out << "m,snr_db," << metric << "\n";
    for (const auto& [k, g] : groups) {
      if (k.scheme != "jscc" || std::abs(k.gamma - 0.7) > 1e-12) continue;
      out << k.m << "," << fmt_double(k.snr) << ","
          << fmt_double(metric[0] == 'p' ? g.psnr : g.ssim) << "\n";
    }
  }

  // fig7: pruned full-bandwidth vs half-bandwidth scheme (if present)
  {
    std::ofstream out(path("fig7-compare.csv"));
    out << "scheme,gamma,m,snr_db,psnr,ssim\n";
    for (const auto& [k, g] : groups) {
      bool keep = (k.scheme == "jscc" && std::abs(k.gamma - 0.5) < 1e-12) ||
                  k.scheme == "jscc-halfbw";
      if (!keep) continue;
      out << k.scheme << "," << fmt_double(k.gamma) << "," << k.m << ","
          << fmt_double(k.snr) << "," << fmt_double(g.psnr) << "," << fmt_double(g.ssim)
          << "\n";
    }
  }

  // table2: per-gamma accounting at the SNR closest to the training SNR
  {
    double best_snr = 0.0, best_dist = 1e300;
    for (const auto& [k, g] : groups)
      if (k.scheme == "jscc" && std::abs(k.snr - train_snr_db) < best_dist) {
        best_dist = std::abs(k.snr - train_snr_db);
        best_snr = k.snr;
      }
    std::ofstream out(path("table2.csv"));
    out << "gamma,snr_db,params,macs,psnr,ssim\n";
    for (const auto& [k, g] : groups) {
      if (k.scheme != "jscc" || k.m != top_order || k.snr != best_snr) continue;
      out << fmt_double(k.gamma) << "," << fmt_double(k.snr) << "," << g.params << ","
          << g.macs << "," << fmt_double(g.psnr) << "," << fmt_double(g.ssim) << "\n";
    }
  }
}

}  // namespace jscc
