#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "gldm/errors.hpp"
#include "gldm/serialization.hpp"
#include "gldm/train.hpp"

namespace gldm::cli {
namespace fs = std::filesystem;
namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string one_line(std::string msg) {
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  return msg;
}

struct TrainArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string resume;
  std::string run_dir;
  bool ignore_hash = false;
};

fs::path default_run_dir(const RunConfig& cfg) {
  const char* root = std::getenv("GLDM_RUN_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return base / ("run-" + hex(cfg.hash()));
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  if (!a.config_path.empty()) cfg.load_file(a.config_path);
  for (const auto& o : a.overrides) cfg.apply_override(o);
  cfg.validate();
  const DataConfig data = cfg.data();
  if (data.root.empty()) throw ConfigError("data.root is not set");

  std::vector<std::string> warnings;
  const auto records = build_manifest(data.root, cfg.train_split(), &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";

  const fs::path run_dir = a.run_dir.empty() ? default_run_dir(cfg) : fs::path(a.run_dir);
  fs::create_directories(run_dir);
  {
    std::ofstream resolved(run_dir / "config.txt");
    if (!resolved) throw IoError("cannot write '" + (run_dir / "config.txt").string() + "'");
    resolved << cfg.resolved_text();
  }
  write_manifest(records, (run_dir / "manifest.tsv").string());

  const TrainConfig train_cfg = cfg.train();
  TrainOptions opts;
  opts.run_dir = run_dir;
  opts.resume = a.resume;
  opts.ignore_config_hash = a.ignore_hash;
  opts.config_hash = cfg.hash();
  opts.config_text = cfg.resolved_text();
  if (train_cfg.eval_every > 0 && fs::is_directory(fs::path(data.root) / cfg.test_split())) {
    opts.eval_records = build_manifest(data.root, cfg.test_split());
  }
  opts.on_step = [&](const StepRecord& r) {
    out << "step " << r.step << " epoch " << r.epoch << " lr " << r.lr << " loss " << r.total << "\n";
    out.flush();
    return true;
  };

  GLDMNet model(cfg.model());
  const TrainResult result = train(model, records, data, cfg.loss(), train_cfg, opts);
  out << "trained " << result.history.size() << " steps over " << result.epochs_run
      << " epochs; run directory " << run_dir.string() << "\n";
  return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& input, const std::string& output,
                std::ostream& out) {
  LoadedModel m = load_model(ckpt);
  const auto records = build_inference_pairs(input);
  write_predictions(*m.model, records, m.config.data(), output);
  out << "wrote " << records.size() << " maps to " << output << "\n";
  return 0;
}

struct EvalArgs {
  std::string pred, gt, report, csv, plot, label;
  bool table = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (!fs::is_directory(a.gt)) throw DataError("ground-truth directory '" + a.gt + "' does not exist");
  const MetricReport report = evaluate_dataset(a.pred, a.gt);
  write_report(report, a.report);
  const std::string csv = a.csv.empty() ? fs::path(a.report).replace_extension(".pr.csv").string() : a.csv;
  write_pr_csv(report, csv);
  if (!a.plot.empty()) render_pr_curve(report, a.plot);
  if (a.table) {
    out << table_row(report, a.label) << "\n";
  } else {
    out << std::setprecision(4) << std::fixed << "images " << report.n_images << "  mae "
        << report.mae << "  s " << report.s_measure << "  f " << report.f_max << "  e "
        << report.e_max << "\n";
  }
  return 0;
}

struct DumpArgs {
  std::string ckpt, rgb, depth, out_dir;
  int stage = 0;
};

// Each channel is stretched to [0, 1]; a constant channel is written mid-gray.
void dump_channels(const Tensor& f, const fs::path& dir) {
  fs::create_directories(dir);
  const index_t c = f.dim(1), h = f.dim(2), w = f.dim(3);
  std::vector<double> plane(static_cast<std::size_t>(h * w));
  for (index_t k = 0; k < c; ++k) {
    const real* src = f.data() + k * h * w;
    const auto [lo, hi] = std::minmax_element(src, src + h * w);
    const double range = double(*hi) - double(*lo);
    for (index_t i = 0; i < h * w; ++i) plane[i] = range > 0 ? (double(src[i]) - *lo) / range : 0.5;
    char name[32];
    std::snprintf(name, sizeof name, "ch_%03lld.png", static_cast<long long>(k));
    write_map_png((dir / name).string(), plane.data(), static_cast<int>(h), static_cast<int>(w));
  }
}

int cmd_dump(const DumpArgs& a, std::ostream& out) {
  if (a.stage < 1 || a.stage > 4) {
    throw ConfigError("stage must be between 1 and 4, got " + std::to_string(a.stage));
  }
  LoadedModel m = load_model(a.ckpt);
  const DataConfig data = m.config.data();
  const SampleRecord rec{"", fs::path(a.rgb).stem().string(), a.rgb, a.depth, ""};
  const Sample s = preprocess(rec, data);
  const Batch b = collate({s}, {rec.stem});
  std::array<FusionTrace, 4> trace;
  {
    NoGradGuard no_grad;
    m.model->set_training(false);
    m.model->forward(Var(b.rgb), Var(b.depth), &trace);
  }
  const FusionTrace& t = trace[a.stage - 1];
  if (!t.f_pmf.defined() && !t.f_cmf.defined()) {
    throw ConfigError("fusion mode " + fusion_mode_name(m.config.model().fusion.mode) +
                      " has no PMF or CMF features");
  }
  int written = 0;
  for (const auto& [name, var] : {std::pair{"pmf", t.f_pmf}, std::pair{"cmf", t.f_cmf}}) {
    if (!var.defined()) continue;
    dump_channels(var.value(), fs::path(a.out_dir) / name);
    out << name << ": " << var.dim(1) << " channels at " << var.dim(2) << "x" << var.dim(3) << "\n";
    ++written;
  }
  return written > 0 ? 0 : 1;
}

}  // namespace

LoadedModel load_model(const fs::path& checkpoint) {
  const CheckpointData ck = read_checkpoint(checkpoint);
  if (ck.meta.config_text.empty()) {
    throw CheckpointError("checkpoint '" + checkpoint.string() + "' carries no configuration");
  }
  LoadedModel m;
  m.config.load_text(ck.meta.config_text, checkpoint.string());
  m.config.validate();
  m.model = std::make_unique<GLDMNet>(m.config.model());
  import_state(*m.model, ck.state);
  return m;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"GL-DMNet RGB-D salient object detection", "gldmnet"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model; writes checkpoints and loss history");
  train->add_option("--config", ta.config_path, "Configuration file (key = value lines)");
  train->add_option("--set", ta.overrides, "Override one key, key=value (repeatable)");
  train->add_option("--resume", ta.resume, "Checkpoint to resume from");
  train->add_flag("--ignore-config-hash", ta.ignore_hash, "Resume even if the configuration changed");
  train->add_option("--run-dir", ta.run_dir,
                    "Run directory (default: $GLDM_RUN_ROOT/run-<config hash>, or runs/ when unset)");

  std::string ckpt, input, output;
  auto* predict = app.add_subcommand("predict", "Write one saliency map per RGB/depth pair");
  predict->add_option("checkpoint", ckpt)->required();
  predict->add_option("input_dir", input, "Directory with RGB/ and depth/")->required();
  predict->add_option("output_dir", output)->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score saliency maps against ground truth");
  eval->add_option("pred_dir", ea.pred)->required();
  eval->add_option("gt_dir", ea.gt)->required();
  eval->add_option("report", ea.report, "Report file to write")->required();
  eval->add_option("--csv", ea.csv, "PR curve CSV (default: <report>.pr.csv)");
  eval->add_option("--plot", ea.plot, "Render the PR curve to this PNG");
  eval->add_flag("--table", ea.table, "Print one row: E S F MAE");
  eval->add_option("--label", ea.label, "Row label for --table");

  DumpArgs da;
  auto* dump = app.add_subcommand("dump-features", "Write PMF/CMF channel slices of one stage");
  dump->add_option("checkpoint", da.ckpt)->required();
  dump->add_option("rgb", da.rgb)->required();
  dump->add_option("depth", da.depth)->required();
  dump->add_option("stage", da.stage, "Fusion stage, 1 to 4")->required();
  dump->add_option("out_dir", da.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: UsageError: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (*train) return cmd_train(ta, out, err);
    if (*predict) return cmd_predict(ckpt, input, output, out);
    if (*eval) return cmd_eval(ea, out);
    if (*dump) return cmd_dump(da, out);
  } catch (const Error& e) {
    err << "error: " << error_kind_name(e.kind()) << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: InternalError: " << one_line(e.what()) << "\n";
    return 3;
  }
  return 2;
}

}  // namespace gldm::cli
