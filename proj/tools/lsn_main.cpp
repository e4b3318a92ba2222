// lsn: synthetic-data generation, training, evaluation, span analysis and
// gradient verification in one entry point.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime abort (NaN),
// 3 I/O error.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lsn/config.hpp"
#include "lsn/datakit.hpp"
#include "lsn/evalkit.hpp"
#include "lsn/gradcheck_suite.hpp"
#include "lsn/model.hpp"
#include "lsn/spanlab.hpp"
#include "lsn/trainer.hpp"

namespace fs = std::filesystem;
using namespace lsn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitIo = 3;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path);
}

int cmd_synth(const std::string& out_dir, int count, int size, unsigned seed) {
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "labels");
  std::string manifest = "id,seed,shape_count\n";
  for (int i = 0; i < count; ++i) {
    const unsigned s = seed + static_cast<unsigned>(i);
    datakit::Sample sample = datakit::gen_sample(s, size);
    char id[16];
    std::snprintf(id, sizeof(id), "img%04d", i);
    datakit::write_pgm_file((fs::path(out_dir) / "images" / (std::string(id) + ".pgm")).string(),
                            sample.image);
    datakit::Raster lbl;
    lbl.h = sample.image.h;
    lbl.w = sample.image.w;
    lbl.pix.resize(sample.gt.size());
    for (size_t j = 0; j < sample.gt.size(); ++j) lbl.pix[j] = sample.gt[j] ? 255 : 0;
    datakit::write_pgm_file((fs::path(out_dir) / "labels" / (std::string(id) + ".pgm")).string(),
                            lbl);
    manifest += std::string(id) + "," + std::to_string(s) + "," +
                std::to_string(sample.shape_count) + "\n";
  }
  write_text((fs::path(out_dir) / "manifest.csv").string(), manifest);
  std::cout << "wrote " << count << " samples to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_ckpt, const std::string& resume_path) {
  const Config cfg = config_path.empty() ? Config{} : load_config(config_path);
  const NetworkSpec spec = build_variant(cfg.variant, cfg.width_multiplier);
  const auto dataset = datakit::load_dataset(data_dir);
  if (dataset.empty()) throw std::invalid_argument("dataset at " + data_dir + " is empty");

  Checkpoint resume;
  const Checkpoint* resume_ptr = nullptr;
  if (!resume_path.empty()) {
    resume = Checkpoint::load(resume_path);
    resume_ptr = &resume;
  }

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res;
  const int phases = cfg.iterative_phases();
  if (phases == 0) {
    res = train(spec, dataset, cfg, resume_ptr);
  } else {
    if (resume_ptr)
      throw std::invalid_argument("--resume is only supported with strategy=end-to-end");
    for (int p = 0; p <= phases; ++p)
      std::cout << "phase " << p + 1 << " starts at iter "
                << static_cast<std::int64_t>(cfg.max_iters) * p / (phases + 1) << "\n";
    res = train_iterative(spec, dataset, cfg, phases);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  res.checkpoint.save(out_ckpt);
  write_text(out_ckpt + ".loss.csv", trace_csv(res));
  if (res.diverged) {
    std::cerr << "training diverged (NaN loss) at iter " << res.diverged_at
              << "; last good checkpoint retained\n";
    return kExitDiverged;
  }
  const double final_loss = res.trace.empty() ? 0.0 : res.trace.back().total;
  std::cout << "final_loss " << final_loss << " wall_time_s " << secs << "\n";
  return 0;
}

std::vector<evalkit::EvalImage> probability_maps(const NetworkSpec& spec,
                                                 const ParamStore<float>& params,
                                                 const std::vector<datakit::Sample>& dataset,
                                                 bool oracle) {
  std::vector<evalkit::EvalImage> out;
  for (const auto& s : dataset) {
    evalkit::EvalImage e;
    e.h = s.image.h;
    e.w = s.image.w;
    e.gt = s.gt;
    if (oracle) {
      e.prob.resize(s.gt.size());
      for (size_t i = 0; i < s.gt.size(); ++i) e.prob[i] = s.gt[i] ? 1.0f : 0.0f;
    } else {
      const SideOutputs so = forward(spec, params, s.image_tensor());
      e.prob.resize(static_cast<size_t>(so.final_prediction.count()));
      for (size_t i = 0; i < e.prob.size(); ++i)
        e.prob[i] =
            static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(
                                          so.final_prediction.data[static_cast<std::int64_t>(i)]))));
    }
    out.push_back(std::move(e));
  }
  return out;
}

int cmd_eval(const std::string& data_dir, const std::string& ckpt_path,
             const std::string& report_path, const std::string& config_path,
             double tolerance, bool oracle) {
  const Config cfg = config_path.empty() ? Config{} : load_config(config_path);
  const NetworkSpec spec = build_variant(cfg.variant, cfg.width_multiplier);
  const auto dataset = datakit::load_dataset(data_dir);
  if (dataset.empty()) throw std::invalid_argument("dataset at " + data_dir + " is empty");
  ParamStore<float> params;
  if (!oracle) params = Checkpoint::load(ckpt_path).params;

  const double tol_frac = tolerance > 0 ? tolerance : cfg.tolerance_frac;
  const auto maps = probability_maps(spec, params, dataset, oracle);
  const auto thresholds = evalkit::default_thresholds(cfg.thresholds);
  const auto points = evalkit::pr_sweep(maps, thresholds, tol_frac);
  const auto per_image = evalkit::pr_sweep_per_image(maps, thresholds, tol_frac);
  const evalkit::EvalReport report = evalkit::summarize(points, per_image);

  write_text(report_path, evalkit::report_csv(report));
  std::cout << "ODS " << report.ods << " OIS " << report.ois << " AP " << report.ap << " F "
            << report.f_measure << "\n";
  return 0;
}

int cmd_analyze(const std::string& data_dir, const std::string& ckpt_path,
                const std::string& report_path, const std::string& config_path) {
  const Config cfg = config_path.empty() ? Config{} : load_config(config_path);
  const NetworkSpec spec = build_variant(cfg.variant, cfg.width_multiplier);
  const auto dataset = datakit::load_dataset(data_dir);
  if (dataset.empty()) throw std::invalid_argument("dataset at " + data_dir + " is empty");
  const ParamStore<float> params = Checkpoint::load(ckpt_path).params;

  std::string csv = "image_id,stage,per_stage_residual,cumulative_residual,stack_rank\n";
  for (const auto& s : dataset) {
    const auto stacks = spanlab::extract_features(spec, params, s.image_tensor());
    const Eigen::VectorXd y = spanlab::flatten_mask(s.gt_tensor());
    const auto profile = spanlab::residual_profile(stacks, y);
    spanlab::VectorStack cumulative;
    for (size_t i = 0; i < stacks.size(); ++i) {
      for (int j = 0; j < stacks[i].cols(); ++j)
        cumulative.append(stacks[i].vectors.col(j), stacks[i].labels[j]);
      char row[160];
      std::snprintf(row, sizeof(row), "%s,%d,%.9g,%.9g,%d\n", s.id.c_str(),
                    static_cast<int>(stacks.size() - i), profile.per_stage[i],
                    profile.cumulative[i], spanlab::numerical_rank(cumulative, 1e-8));
      csv += row;
    }
  }
  write_text(report_path, csv);
  std::cout << "wrote " << report_path << "\n";
  return 0;
}

int cmd_gradcheck(unsigned seed, bool corrupt) {
  const GradCheckReport rep = run_gradcheck_suite(seed, corrupt);
  for (const auto& e : rep.entries)
    std::printf("%-20s %.3e\n", e.op.c_str(), e.worst_rel_error);
  if (!rep.ok(1e-4)) {
    std::cerr << "gradient check FAILED (tolerance 1e-4)\n";
    return kExitDiverged;
  }
  std::cout << "all gradients verified within 1e-4\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear-span skeleton detector"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic skeleton dataset");
  std::string out_dir;
  int count = 250, size = 96;
  unsigned seed = 1;
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--count", count, "number of samples");
  synth->add_option("--size", size, "image side (multiple of 32)");
  synth->add_option("--seed", seed, "base seed");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::string data_dir, config_path, ckpt_out, resume_path;
  train_cmd->add_option("--data", data_dir, "dataset directory")->required();
  train_cmd->add_option("--config", config_path, "key=value config file");
  train_cmd->add_option("--out", ckpt_out, "checkpoint output path")->required();
  train_cmd->add_option("--resume", resume_path, "resume from checkpoint");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_data, eval_ckpt, eval_report, eval_config;
  double tolerance = 0;
  bool oracle = false;
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path");
  eval_cmd->add_option("--report", eval_report, "report CSV output")->required();
  eval_cmd->add_option("--config", eval_config, "key=value config file");
  eval_cmd->add_option("--tolerance", tolerance, "matching tolerance as fraction of diagonal");
  eval_cmd->add_flag("--oracle", oracle, "use ground truth as probability maps (test hook)");

  auto* analyze_cmd = app.add_subcommand("analyze", "span residual analysis");
  std::string an_data, an_ckpt, an_report, an_config;
  analyze_cmd->add_option("--data", an_data, "dataset directory")->required();
  analyze_cmd->add_option("--ckpt", an_ckpt, "checkpoint path")->required();
  analyze_cmd->add_option("--report", an_report, "report CSV output")->required();
  analyze_cmd->add_option("--config", an_config, "key=value config file");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  unsigned gc_seed = 7;
  bool corrupt = false;
  gc->add_option("--seed", gc_seed, "suite seed");
  gc->add_flag("--corrupt-backward", corrupt, "negative control (test hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? kExitUsage : 0;
  }

  try {
    if (synth->parsed()) return cmd_synth(out_dir, count, size, seed);
    if (train_cmd->parsed()) return cmd_train(data_dir, config_path, ckpt_out, resume_path);
    if (eval_cmd->parsed()) {
      if (!oracle && eval_ckpt.empty())
        throw std::invalid_argument("eval requires --ckpt (or --oracle)");
      return cmd_eval(eval_data, eval_ckpt, eval_report, eval_config, tolerance, oracle);
    }
    if (analyze_cmd->parsed()) return cmd_analyze(an_data, an_ckpt, an_report, an_config);
    if (gc->parsed()) return cmd_gradcheck(gc_seed, corrupt);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
