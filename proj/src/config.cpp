#include "gldm/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "gldm/errors.hpp"
#include "gldm/serialization.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> table{
      {"model.encoder", "resnet50"},
      {"model.encoder_weights", ""},
      {"fusion.mode", "parallel"},
      {"fusion.widths", "64,128,320,512"},
      {"fusion.max_attention_pixels", "4096"},
      {"fusion.moment_exponent", "-0.5"},
      {"fusion.l2_power", "2"},
      {"fusion.fc_reduction", "16"},
      {"decoder.transformer", "pvtv2"},
      {"decoder.reconstruction", "on"},
      {"decoder.depths", "3,4,6,3"},
      {"decoder.heads", "1,2,5,8"},
      {"decoder.mlp_ratios", "8,8,4,4"},
      {"decoder.sr_ratios", "8,4,2,1"},
      {"decoder.ca_reduction", "16"},
      {"loss.variant", "bce+iou"},
      {"loss.lambdas", "0.8,0.6,0.4,0.2"},
      {"loss.reduction", "sum"},
      {"data.root", ""},
      {"data.train_split", "train"},
      {"data.test_split", "test"},
      {"data.image_size", "256"},
      {"data.mean", "0.485,0.456,0.406"},
      {"data.std", "0.229,0.224,0.225"},
      {"data.augment", "on"},
      {"data.flip_prob", "0.5"},
      {"data.rotation_deg", "15"},
      {"data.crop_min", "0.9"},
      {"data.jitter", "0.1"},
      {"train.epochs", "200"},
      {"train.batch_size", "4"},
      {"train.lr", "1e-4"},
      {"train.lr_decay", "0.97"},
      {"train.freeze_cnn_until", "30"},
      {"train.freeze_transformer_until", "60"},
      {"train.seed", "0"},
      {"train.grad_clip", "0"},
      {"train.shuffle", "on"},
      {"train.checkpoint_every", "1"},
      {"train.eval_every", "0"},
      {"train.max_steps", "0"},
  };
  return table;
}

// Keys that change how long or how often a run does things, not what it computes.
const std::set<std::string>& unhashed_keys() {
  static const std::set<std::string> keys{"train.epochs", "train.checkpoint_every",
                                          "train.eval_every", "train.max_steps"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Collects every parse problem instead of stopping at the first.
class Reader {
 public:
  Reader(const std::map<std::string, std::string>& values, std::vector<std::string>& errors)
      : values_(values), errors_(errors) {}

  std::string str(const std::string& key) { return values_.at(key); }

  double number(const std::string& key) {
    const std::string& s = values_.at(key);
    double v = 0;
    if (!parse_double(s, v)) fail(key, "expected a number");
    return v;
  }

  std::int64_t integer(const std::string& key) {
    const std::string& s = values_.at(key);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(key, "expected an integer");
    return v;
  }

  bool flag(const std::string& key) {
    const std::string& s = values_.at(key);
    if (s == "on" || s == "true" || s == "1") return true;
    if (s == "off" || s == "false" || s == "0") return false;
    fail(key, "expected on or off");
    return false;
  }

  template <std::size_t N>
  std::array<double, N> numbers(const std::string& key) {
    std::array<double, N> out{};
    std::stringstream ss(values_.at(key));
    std::string item;
    std::size_t n = 0;
    bool ok = true;
    while (std::getline(ss, item, ',')) {
      double v = 0;
      if (n >= N || !parse_double(trim(item), v)) ok = false;
      if (n < N) out[n] = v;
      ++n;
    }
    if (!ok || n != N) fail(key, "expected " + std::to_string(N) + " comma-separated numbers");
    return out;
  }

  template <std::size_t N>
  std::array<index_t, N> integers(const std::string& key) {
    const auto d = numbers<N>(key);
    std::array<index_t, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
      out[i] = static_cast<index_t>(d[i]);
      if (static_cast<double>(out[i]) != d[i]) fail(key, "expected integers");
    }
    return out;
  }

  void check(bool ok, const std::string& key, const std::string& what) {
    if (!ok) fail(key, what);
  }

  template <class F>
  auto parse_enum(const std::string& key, F parse) -> decltype(parse(std::string())) {
    try {
      return parse(values_.at(key));
    } catch (const ConfigError& e) {
      if (failed_.insert(key).second) errors_.push_back(key + ": " + e.what());
      return {};
    }
  }

 private:
  static bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    std::size_t used = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      return false;
    }
    return used == s.size();
  }

  // Only the first problem per key is reported; later checks on a value that
  // failed to parse would just repeat it.
  void fail(const std::string& key, const std::string& what) {
    if (failed_.insert(key).second) errors_.push_back(key + " = '" + values_.at(key) + "': " + what);
  }

  const std::map<std::string, std::string>& values_;
  std::vector<std::string>& errors_;
  std::set<std::string> failed_;
};

struct Resolved {
  ModelConfig model;
  DataConfig data;
  LossConfig loss;
  TrainConfig train;
};

Resolved resolve(const std::map<std::string, std::string>& values, std::vector<std::string>& errors) {
  Reader r(values, errors);
  Resolved out;

  auto& enc = out.model.encoder;
  enc.family = r.str("model.encoder");
  r.parse_enum("model.encoder", [](const std::string& s) { return encoder_profile(s); });
  enc.weights_path = r.str("model.encoder_weights");

  auto& f = out.model.fusion;
  f.mode = r.parse_enum("fusion.mode", parse_fusion_mode);
  f.widths = r.integers<4>("fusion.widths");
  for (index_t w : f.widths) r.check(w > 0, "fusion.widths", "widths must be positive");
  f.max_attention_pixels = r.integer("fusion.max_attention_pixels");
  r.check(f.max_attention_pixels > 0, "fusion.max_attention_pixels", "must be positive");
  f.moment_exponent = static_cast<real>(r.number("fusion.moment_exponent"));
  r.check(f.moment_exponent == real(-0.5) || f.moment_exponent == real(0.5),
          "fusion.moment_exponent", "must be -0.5 or 0.5");
  f.l2_power = static_cast<int>(r.integer("fusion.l2_power"));
  r.check(f.l2_power == 1 || f.l2_power == 2, "fusion.l2_power", "must be 1 or 2");
  f.fc_reduction = r.integer("fusion.fc_reduction");
  r.check(f.fc_reduction > 0, "fusion.fc_reduction", "must be positive");

  auto& d = out.model.decoder;
  d.transformer = r.parse_enum("decoder.transformer", parse_transformer_kind);
  d.reconstruction = r.flag("decoder.reconstruction");
  d.widths = f.widths;
  const auto depths = r.integers<4>("decoder.depths");
  const auto heads = r.integers<4>("decoder.heads");
  const auto mlp = r.integers<4>("decoder.mlp_ratios");
  const auto sr = r.integers<4>("decoder.sr_ratios");
  for (int i = 0; i < 4; ++i) {
    d.pvt.depths[i] = static_cast<int>(depths[i]);
    d.pvt.heads[i] = static_cast<int>(heads[i]);
    d.pvt.mlp_ratios[i] = static_cast<int>(mlp[i]);
    d.pvt.sr_ratios[i] = static_cast<int>(sr[i]);
    r.check(depths[i] >= 0, "decoder.depths", "must be non-negative");
    r.check(heads[i] > 0 && f.widths[i] % std::max<index_t>(1, heads[i]) == 0, "decoder.heads",
            "each head count must be positive and divide its stage width");
    r.check(mlp[i] > 0, "decoder.mlp_ratios", "must be positive");
    r.check(sr[i] > 0, "decoder.sr_ratios", "must be positive");
  }
  d.ca_reduction = r.integer("decoder.ca_reduction");
  r.check(d.ca_reduction > 0, "decoder.ca_reduction", "must be positive");

  out.loss.variant = r.parse_enum("loss.variant", parse_loss_variant);
  const auto lambdas = r.numbers<4>("loss.lambdas");
  for (int i = 0; i < 4; ++i) {
    out.loss.lambdas[i] = static_cast<real>(lambdas[i]);
    r.check(lambdas[i] >= 0, "loss.lambdas", "weights must be non-negative");
  }
  const std::string reduction = r.str("loss.reduction");
  r.check(reduction == "sum" || reduction == "mean", "loss.reduction", "must be sum or mean");
  out.loss.reduction = reduction == "mean" ? Reduction::Mean : Reduction::Sum;

  auto& data = out.data;
  data.root = r.str("data.root");
  data.image_size = r.integer("data.image_size");
  r.check(data.image_size > 0 && data.image_size % 32 == 0, "data.image_size",
          "must be a positive multiple of 32");
  data.mean = r.numbers<3>("data.mean");
  data.std = r.numbers<3>("data.std");
  for (double s : data.std) r.check(s > 0, "data.std", "must be positive");
  data.augment.enabled = r.flag("data.augment");
  data.augment.flip_prob = r.number("data.flip_prob");
  r.check(data.augment.flip_prob >= 0 && data.augment.flip_prob <= 1, "data.flip_prob", "must be in [0, 1]");
  data.augment.rotation_deg = r.number("data.rotation_deg");
  r.check(data.augment.rotation_deg >= 0, "data.rotation_deg", "must be non-negative");
  data.augment.crop_min = r.number("data.crop_min");
  r.check(data.augment.crop_min > 0 && data.augment.crop_min <= 1, "data.crop_min", "must be in (0, 1]");
  data.augment.jitter = r.number("data.jitter");
  r.check(data.augment.jitter >= 0 && data.augment.jitter < 1, "data.jitter", "must be in [0, 1)");

  auto& t = out.train;
  t.epochs = r.integer("train.epochs");
  r.check(t.epochs >= 0, "train.epochs", "must be non-negative");
  t.batch_size = r.integer("train.batch_size");
  r.check(t.batch_size > 0, "train.batch_size", "must be positive");
  t.lr = r.number("train.lr");
  r.check(t.lr > 0, "train.lr", "must be positive");
  t.lr_decay = r.number("train.lr_decay");
  r.check(t.lr_decay > 0 && t.lr_decay <= 1, "train.lr_decay", "must be in (0, 1]");
  t.freeze_cnn_until = r.integer("train.freeze_cnn_until");
  t.freeze_transformer_until = r.integer("train.freeze_transformer_until");
  r.check(t.freeze_cnn_until >= 0 && t.freeze_cnn_until <= t.freeze_transformer_until,
          "train.freeze_cnn_until", "must lie in [0, train.freeze_transformer_until]");
  t.seed = static_cast<std::uint64_t>(r.integer("train.seed"));
  t.grad_clip = r.number("train.grad_clip");
  r.check(t.grad_clip >= 0, "train.grad_clip", "must be non-negative");
  t.shuffle = r.flag("train.shuffle");
  t.checkpoint_every = r.integer("train.checkpoint_every");
  r.check(t.checkpoint_every >= 0, "train.checkpoint_every", "must be non-negative");
  t.eval_every = r.integer("train.eval_every");
  r.check(t.eval_every >= 0, "train.eval_every", "must be non-negative");
  t.max_steps = r.integer("train.max_steps");
  r.check(t.max_steps >= 0, "train.max_steps", "must be non-negative");

  out.model.seed = t.seed;
  return out;
}

Resolved resolve_or_throw(const std::map<std::string, std::string>& values,
                          const std::vector<std::string>& earlier) {
  std::vector<std::string> errors = earlier;
  Resolved r = resolve(values, errors);
  if (!errors.empty()) {
    std::string msg = std::to_string(errors.size()) + " configuration error(s): ";
    for (std::size_t i = 0; i < errors.size(); ++i) msg += (i ? "; " : "") + errors[i];
    throw ConfigError(msg);
  }
  return r;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

std::vector<std::string> RunConfig::known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : defaults()) keys.push_back(k);
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    errors_.push_back("unknown key '" + key + "'");
    return;
  }
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  return it->second;
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors_.push_back(origin + ":" + std::to_string(number) + ": expected 'key = value'");
      continue;
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path);
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    errors_.push_back("override '" + assignment + "' is not key=value");
    return;
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::validate() const { resolve_or_throw(values_, errors_); }

ModelConfig RunConfig::model() const { return resolve_or_throw(values_, errors_).model; }
DataConfig RunConfig::data() const { return resolve_or_throw(values_, errors_).data; }
LossConfig RunConfig::loss() const { return resolve_or_throw(values_, errors_).loss; }
TrainConfig RunConfig::train() const { return resolve_or_throw(values_, errors_).train; }

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t RunConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : values_) {
    if (!unhashed_keys().count(k)) text += k + "=" + v + "\n";
  }
  return fnv1a64(text.data(), text.size());
}

}  // namespace GLDM_ABI
}  // namespace gldm
