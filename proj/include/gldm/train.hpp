#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gldm/data.hpp"
#include "gldm/losses.hpp"
#include "gldm/metrics.hpp"
#include "gldm/model.hpp"

namespace gldm {
inline namespace GLDM_ABI {

struct TrainConfig {
  std::int64_t epochs = 200;
  index_t batch_size = 4;
  double lr = 1e-4;
  double lr_decay = 0.97;
  /// Epochs are zero-based: the CNN encoders are frozen for epochs
  /// [0, freeze_cnn_until) and the transformer stages for
  /// [freeze_cnn_until, freeze_transformer_until).
  std::int64_t freeze_cnn_until = 30;
  std::int64_t freeze_transformer_until = 60;
  std::uint64_t seed = 0;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0;
  std::int64_t checkpoint_every = 1;
  std::int64_t eval_every = 0;
  /// Stop after this many optimizer steps; 0 means no limit.
  std::int64_t max_steps = 0;
  bool shuffle = true;
};

double learning_rate(const TrainConfig& config, std::int64_t epoch);
bool group_trainable(const TrainConfig& config, ParamGroup group, std::int64_t epoch);

/// Adam with (0.9, 0.999) moments, eps 1e-8, no weight decay. Step counts are
/// per parameter so a group unfrozen late starts with fresh bias correction.
class Adam {
 public:
  explicit Adam(std::vector<NamedVar> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  /// Updates every parameter that has a gradient and requires one.
  void step(double lr);
  void zero_grad();
  /// Scales gradients so their global L2 norm is at most `max_norm`; returns the norm before.
  double clip_grad_norm(double max_norm);

  std::vector<NamedTensor> first_moments() const;
  std::vector<NamedTensor> second_moments() const;
  std::vector<std::int64_t> step_counts() const { return steps_; }
  void load(const std::vector<NamedTensor>& m, const std::vector<NamedTensor>& v,
            const std::vector<std::int64_t>& steps);

 private:
  std::vector<NamedVar> params_;
  std::vector<Tensor> m_, v_;
  std::vector<std::int64_t> steps_;
  double beta1_, beta2_, eps_;
};

struct CheckpointMeta {
  std::int64_t next_epoch = 0;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string config_text;
};

/// Model state plus optimizer moments; written atomically and checksummed.
void save_checkpoint(const std::filesystem::path& path, const Module& model, const Adam* optimizer,
                     const CheckpointMeta& meta);

struct CheckpointData {
  CheckpointMeta meta;
  std::vector<NamedTensor> state;
  std::vector<NamedTensor> adam_m, adam_v;
  std::vector<std::int64_t> adam_steps;
};

CheckpointData read_checkpoint(const std::filesystem::path& path);

struct StepRecord {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double lr = 0;
  std::array<double, 4> bce{};
  std::array<double, 4> region{};
  double total = 0;
};

void write_history_header(std::ostream& out);
void write_history_row(std::ostream& out, const StepRecord& r);

struct TrainOptions {
  std::filesystem::path run_dir;
  /// Checkpoint to resume from; empty for a fresh run.
  std::filesystem::path resume;
  /// Accept a resume checkpoint written under a different configuration.
  bool ignore_config_hash = false;
  std::uint64_t config_hash = 0;
  std::string config_text;
  /// Called after every step; return false to stop early.
  std::function<bool(const StepRecord&)> on_step;
  /// Optional held-out records for periodic evaluation.
  std::vector<SampleRecord> eval_records;
};

struct TrainResult {
  std::vector<StepRecord> history;
  std::filesystem::path last_checkpoint;
  std::int64_t epochs_run = 0;
};

/// Staged-freeze training on `records`. Writes loss_history.csv, params.txt and
/// checkpoints under options.run_dir (when set).
TrainResult train(GLDMNet& model, const std::vector<SampleRecord>& records,
                  const DataConfig& data, const LossConfig& loss, const TrainConfig& config,
                  const TrainOptions& options);

/// Fits one fixed batch (no augmentation, no freezing) for `steps` steps and
/// returns the total loss before each step and after the last one.
std::vector<double> overfit_smoke(GLDMNet& model, const Batch& batch, const LossConfig& loss,
                                  double lr, std::int64_t steps, bool freeze_all = false,
                                  const std::function<void(std::int64_t, double)>& on_step = {});

/// S_1 maps at each record's original resolution, in record order.
std::vector<Map2d> predict_maps(GLDMNet& model, const std::vector<SampleRecord>& records,
                                const DataConfig& data);

/// Writes `<out_dir>/<stem>.png` for every record.
void write_predictions(GLDMNet& model, const std::vector<SampleRecord>& records,
                       const DataConfig& data, const std::filesystem::path& out_dir);

/// Predicts into `map_dir` and scores the maps against the records' ground truth.
MetricReport evaluate_checkpoint(GLDMNet& model, const std::vector<SampleRecord>& records,
                                 const DataConfig& data, const std::filesystem::path& map_dir);

}  // namespace GLDM_ABI
}  // namespace gldm
