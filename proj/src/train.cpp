#include "gldm/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace fs = std::filesystem;
namespace {

constexpr char kCheckpointMagic[8] = {'G', 'L', 'D', 'M', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::string epoch_name(std::int64_t epoch) {
  std::ostringstream s;
  s << "epoch_" << std::setw(4) << std::setfill('0') << epoch;
  return s.str();
}

Batch load_batch(const std::vector<SampleRecord>& records, const std::vector<index_t>& indices,
                 const DataConfig& data, bool train_mode, std::uint64_t seed, std::int64_t epoch) {
  std::vector<Sample> samples;
  std::vector<std::string> stems;
  for (index_t idx : indices) {
    const SampleRecord& rec = records[idx];
    RawSample raw = load_raw(rec, data.image_size);
    if (raw.gt.empty()) throw DataError("training sample '" + rec.rgb_path + "' has no ground truth");
    if (train_mode) augment(raw, sample_seed(seed, epoch, idx), data.augment);
    samples.push_back(to_tensors(raw, data));
    stems.push_back(rec.dataset + "/" + rec.stem);
  }
  return collate(samples, stems);
}

StepRecord make_record(std::int64_t step, std::int64_t epoch, double lr, const LossBreakdown& br) {
  StepRecord r;
  r.step = step;
  r.epoch = epoch;
  r.lr = lr;
  for (int i = 0; i < 4; ++i) {
    r.bce[i] = br.bce_value(i);
    r.region[i] = br.region_value(i);
  }
  r.total = br.total_value();
  return r;
}

}  // namespace

double learning_rate(const TrainConfig& config, std::int64_t epoch) {
  return config.lr * std::pow(config.lr_decay, static_cast<double>(epoch));
}

bool group_trainable(const TrainConfig& config, ParamGroup group, std::int64_t epoch) {
  switch (group) {
    case ParamGroup::Cnn: return epoch >= config.freeze_cnn_until;
    case ParamGroup::Transformer:
      return epoch < config.freeze_cnn_until || epoch >= config.freeze_transformer_until;
    case ParamGroup::Other: return true;
  }
  return true;
}

Adam::Adam(std::vector<NamedVar> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
  steps_.assign(params_.size(), 0);
}

void Adam::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

double Adam::clip_grad_norm(double max_norm) {
  double sq = 0;
  for (const auto& p : params_) {
    for (real g : p.var.grad().values()) sq += double(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const real s = static_cast<real>(max_norm / (norm + 1e-12));
    for (auto& p : params_) {
      if (p.var.grad().empty()) continue;
      Tensor& g = p.var.node()->grad;
      for (auto& v : g.values()) v *= s;
    }
  }
  return norm;
}

void Adam::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i].var;
    if (!p.requires_grad() || p.grad().empty()) continue;
    const std::int64_t t = ++steps_[i];
    const double c1 = 1 - std::pow(beta1_, static_cast<double>(t));
    const double c2 = 1 - std::pow(beta2_, static_cast<double>(t));
    const double step = lr / c1;
    const double root_c2 = std::sqrt(c2);
    real* w = p.mutable_value().data();
    const real* g = p.grad().data();
    real* m = m_[i].data();
    real* v = v_[i].data();
    const index_t n = m_[i].numel();
    const real b1 = static_cast<real>(beta1_), b2 = static_cast<real>(beta2_);
#pragma omp parallel for schedule(static)
    for (index_t k = 0; k < n; ++k) {
      m[k] = b1 * m[k] + (1 - b1) * g[k];
      v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
      const double denom = std::sqrt(double(v[k])) / root_c2 + eps_;
      w[k] = static_cast<real>(w[k] - step * m[k] / denom);
    }
  }
}

std::vector<NamedTensor> Adam::first_moments() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) out.push_back({params_[i].name, m_[i]});
  return out;
}

std::vector<NamedTensor> Adam::second_moments() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) out.push_back({params_[i].name, v_[i]});
  return out;
}

void Adam::load(const std::vector<NamedTensor>& m, const std::vector<NamedTensor>& v,
                const std::vector<std::int64_t>& steps) {
  if (m.size() != params_.size() || v.size() != params_.size() || steps.size() != params_.size()) {
    throw CheckpointError("optimizer state does not match the model's parameter list");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (m[i].name != params_[i].name || v[i].name != params_[i].name ||
        m[i].value.shape() != params_[i].var.shape() || v[i].value.shape() != params_[i].var.shape()) {
      throw CheckpointError("optimizer state mismatch at '" + params_[i].name + "'");
    }
    m_[i] = m[i].value;
    v_[i] = v[i].value;
  }
  steps_ = steps;
}

void save_checkpoint(const fs::path& path, const Module& model, const Adam* optimizer,
                     const CheckpointMeta& meta) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  ByteWriter w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.i64(meta.next_epoch);
  w.i64(meta.step);
  w.u64(meta.seed);
  w.u64(meta.config_hash);
  w.str(meta.config_text);
  w.tensors(export_state(model));
  w.u32(optimizer ? 1 : 0);
  if (optimizer) {
    w.tensors(optimizer->first_moments());
    w.tensors(optimizer->second_moments());
    const auto steps = optimizer->step_counts();
    w.u64(steps.size());
    for (auto s : steps) w.i64(s);
  }
  w.commit(path);
}

CheckpointData read_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw CheckpointError("checkpoint '" + path.string() + "' does not exist");
  ByteReader r(path);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint");
  }
  if (r.u32() != kCheckpointVersion) throw CheckpointError(path.string() + ": unsupported version");
  CheckpointData d;
  d.meta.next_epoch = r.i64();
  d.meta.step = r.i64();
  d.meta.seed = r.u64();
  d.meta.config_hash = r.u64();
  d.meta.config_text = r.str();
  d.state = r.tensors();
  if (r.u32() == 1) {
    d.adam_m = r.tensors();
    d.adam_v = r.tensors();
    const std::uint64_t n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) d.adam_steps.push_back(r.i64());
  }
  if (!r.at_end()) throw CheckpointError(path.string() + ": trailing bytes");
  return d;
}

void write_history_header(std::ostream& out) {
  out << "step,epoch,lr,bce1,bce2,bce3,bce4,iou1,iou2,iou3,iou4,total\n";
}

void write_history_row(std::ostream& out, const StepRecord& r) {
  out << r.step << ',' << r.epoch << ',' << std::setprecision(10) << r.lr;
  for (double v : r.bce) out << ',' << v;
  for (double v : r.region) out << ',' << v;
  out << ',' << r.total << '\n';
}

TrainResult train(GLDMNet& model, const std::vector<SampleRecord>& records, const DataConfig& data,
                  const LossConfig& loss, const TrainConfig& config, const TrainOptions& options) {
  if (records.empty()) throw DataError("training manifest is empty");
  const bool persist = !options.run_dir.empty();
  if (persist) {
    fs::create_directories(options.run_dir);
    std::ofstream(options.run_dir / "params.txt") << model.parameter_summary();
  }

  std::vector<NamedVar> params = model.named_parameters();
  Adam optimizer(params);
  std::int64_t start_epoch = 0, step = 0;
  if (!options.resume.empty()) {
    const CheckpointData ckpt = read_checkpoint(options.resume);
    if (ckpt.meta.config_hash != options.config_hash && !options.ignore_config_hash) {
      throw CheckpointError("checkpoint '" + options.resume.string() +
                            "' was written under a different configuration");
    }
    import_state(model, ckpt.state);
    if (!ckpt.adam_m.empty()) optimizer.load(ckpt.adam_m, ckpt.adam_v, ckpt.adam_steps);
    start_epoch = ckpt.meta.next_epoch;
    step = ckpt.meta.step;
  }

  std::ofstream history;
  if (persist) {
    const fs::path csv = options.run_dir / "loss_history.csv";
    const bool append = !options.resume.empty() && fs::exists(csv);
    history.open(csv, append ? std::ios::app : std::ios::trunc);
    if (!history) throw IoError("cannot write '" + csv.string() + "'");
    if (!append) write_history_header(history);
  }

  TrainResult result;
  const index_t n = static_cast<index_t>(records.size());
  bool stop = false;
  for (std::int64_t epoch = start_epoch; epoch < config.epochs && !stop; ++epoch) {
    const double lr = learning_rate(config, epoch);
    for (auto& p : params) {
      p.var.set_requires_grad(group_trainable(config, param_group(p.name), epoch));
    }
    model.set_training(true);
    const std::vector<index_t> order = epoch_order(n, config.seed, epoch, config.shuffle);
    for (index_t first = 0; first < n && !stop; first += config.batch_size) {
      const std::vector<index_t> idx(order.begin() + first,
                                     order.begin() + std::min(n, first + config.batch_size));
      const Batch batch = load_batch(records, idx, data, true, config.seed, epoch);
      const SaliencyOutput out = model.forward(Var(batch.rgb), Var(batch.depth));
      const LossBreakdown br = total_loss(out, batch.gt, loss);
      if (!std::isfinite(br.total_value())) {
        std::string stems;
        for (const auto& s : batch.stems) stems += (stems.empty() ? "" : ", ") + s;
        if (persist) {
          std::ofstream dump(options.run_dir / "nonfinite_batch.txt");
          dump << "step " << step << " epoch " << epoch << "\n";
          for (const auto& s : batch.stems) dump << s << "\n";
        }
        throw NumericError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                           std::to_string(epoch) + "), batch: " + stems);
      }
      optimizer.zero_grad();
      br.total.backward();
      if (config.grad_clip > 0) optimizer.clip_grad_norm(config.grad_clip);
      optimizer.step(lr);

      const StepRecord rec = make_record(step, epoch, lr, br);
      result.history.push_back(rec);
      if (persist) {
        write_history_row(history, rec);
        history.flush();
      }
      ++step;
      if (options.on_step && !options.on_step(rec)) stop = true;
      if (config.max_steps > 0 && step >= config.max_steps) stop = true;
    }
    result.epochs_run++;

    const bool last = epoch + 1 == config.epochs || stop;
    if (persist && ((config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) || last)) {
      CheckpointMeta meta{epoch + 1, step, config.seed, options.config_hash, options.config_text};
      const fs::path ckpt = options.run_dir / "checkpoints" / (epoch_name(epoch) + ".ckpt");
      save_checkpoint(ckpt, model, &optimizer, meta);
      fs::copy_file(ckpt, options.run_dir / "checkpoints" / "last.ckpt",
                    fs::copy_options::overwrite_existing);
      result.last_checkpoint = options.run_dir / "checkpoints" / "last.ckpt";
    }
    if (persist && config.eval_every > 0 && (epoch + 1) % config.eval_every == 0 &&
        !options.eval_records.empty()) {
      const fs::path dir = options.run_dir / "eval" / epoch_name(epoch);
      const MetricReport report = evaluate_checkpoint(model, options.eval_records, data, dir / "maps");
      write_report(report, (dir / "report.txt").string());
      write_pr_csv(report, (dir / "pr_curve.csv").string());
    }
  }
  for (auto& p : params) p.var.set_requires_grad(true);
  return result;
}

std::vector<double> overfit_smoke(GLDMNet& model, const Batch& batch, const LossConfig& loss,
                                  double lr, std::int64_t steps, bool freeze_all,
                                  const std::function<void(std::int64_t, double)>& on_step) {
  std::vector<NamedVar> params = model.named_parameters();
  for (auto& p : params) p.var.set_requires_grad(!freeze_all);
  Adam optimizer(params);
  model.set_training(true);
  std::vector<double> trajectory;
  const Var rgb(batch.rgb), depth(batch.depth);
  for (std::int64_t s = 0; s <= steps; ++s) {
    const bool final = s == steps;
    // The last pass only measures the loss.
    std::unique_ptr<NoGradGuard> guard;
    if (final) guard = std::make_unique<NoGradGuard>();
    const LossBreakdown br = total_loss(model.forward(rgb, depth), batch.gt, loss);
    const double total = br.total_value();
    if (!std::isfinite(total)) throw NumericError("overfit smoke diverged at step " + std::to_string(s));
    trajectory.push_back(total);
    if (on_step) on_step(s, total);
    if (final) break;
    optimizer.zero_grad();
    br.total.backward();
    optimizer.step(lr);
  }
  for (auto& p : params) p.var.set_requires_grad(true);
  return trajectory;
}

std::vector<Map2d> predict_maps(GLDMNet& model, const std::vector<SampleRecord>& records,
                                const DataConfig& data) {
  if (records.empty()) throw DataError("nothing to predict");
  NoGradGuard no_grad;
  model.set_training(false);
  std::vector<Map2d> out;
  for (const auto& rec : records) {
    SampleRecord no_gt = rec;
    no_gt.gt_path.clear();
    const RawSample raw = load_raw(no_gt, data.image_size);
    const Sample sample = to_tensors(raw, data);
    const Batch batch = collate({sample}, {rec.stem});
    const SaliencyOutput s = model.forward(Var(batch.rgb), Var(batch.depth));
    const Tensor& m = s.final_map().value();
    Map2d map(m.dim(2), m.dim(3));
    for (index_t i = 0; i < map.size(); ++i) map.values[i] = m[i];
    out.push_back(resize_map(map, raw.original_height, raw.original_width));
  }
  return out;
}

void write_predictions(GLDMNet& model, const std::vector<SampleRecord>& records,
                       const DataConfig& data, const fs::path& out_dir) {
  const std::vector<Map2d> maps = predict_maps(model, records, data);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Map2d& m = maps[i];
    write_map_png((out_dir / (records[i].stem + ".png")).string(), m.values.data(),
                  static_cast<int>(m.height), static_cast<int>(m.width));
  }
}

MetricReport evaluate_checkpoint(GLDMNet& model, const std::vector<SampleRecord>& records,
                                 const DataConfig& data, const fs::path& map_dir) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::map<std::string, std::vector<SampleRecord>> by_dataset;
  for (const auto& r : records) {
    if (r.gt_path.empty()) throw DataError("record '" + r.rgb_path + "' has no ground truth");
    by_dataset[r.dataset].push_back(r);
  }
  for (const auto& [name, recs] : by_dataset) {
    const fs::path dir = map_dir / name;
    write_predictions(model, recs, data, dir);
    for (const auto& r : recs) pairs.emplace_back((dir / (r.stem + ".png")).string(), r.gt_path);
  }
  return evaluate_pairs(pairs);
}

}  // namespace GLDM_ABI
}  // namespace gldm
