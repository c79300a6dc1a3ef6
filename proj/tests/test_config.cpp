#include <gtest/gtest.h>

#include <fstream>

#include "gldm/config.hpp"
#include "gldm/errors.hpp"
#include "support/fixtures.hpp"

using namespace gldm;

namespace {

std::string error_of(const RunConfig& cfg) {
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(RunConfig, DefaultsResolveToTheReferenceSchedule) {
  RunConfig cfg;
  EXPECT_EQ(error_of(cfg), "");
  const TrainConfig t = cfg.train();
  EXPECT_EQ(t.epochs, 200);
  EXPECT_EQ(t.batch_size, 4);
  EXPECT_DOUBLE_EQ(t.lr, 1e-4);
  EXPECT_DOUBLE_EQ(t.lr_decay, 0.97);
  EXPECT_EQ(t.freeze_cnn_until, 30);
  EXPECT_EQ(t.freeze_transformer_until, 60);
  const ModelConfig m = cfg.model();
  EXPECT_EQ(m.encoder.family, "resnet50");
  EXPECT_EQ(m.fusion.mode, FusionMode::Parallel);
  EXPECT_EQ(m.decoder.transformer, TransformerKind::PvtV2);
  EXPECT_EQ(m.decoder.widths, (std::array<index_t, 4>{64, 128, 320, 512}));
  const LossConfig l = cfg.loss();
  EXPECT_EQ(l.variant, LossVariant::BceIou);
  EXPECT_FLOAT_EQ(l.lambdas[0], 0.8f);
  EXPECT_FLOAT_EQ(l.lambdas[3], 0.2f);
  EXPECT_EQ(cfg.data().image_size, 256);
}

TEST(RunConfig, FileThenOverridesTakePrecedence) {
  gldm::testing::TempDir dir;
  {
    std::ofstream out(dir / "run.cfg");
    out << "# toy run\n"
           "train.epochs = 7   # short\n"
           "\n"
           "fusion.mode=serial\n"
           "train.lr = 5e-4\n";
  }
  RunConfig cfg;
  cfg.load_file((dir / "run.cfg").string());
  cfg.apply_override("train.lr=2e-4");
  EXPECT_EQ(cfg.train().epochs, 7);
  EXPECT_DOUBLE_EQ(cfg.train().lr, 2e-4);
  EXPECT_EQ(cfg.model().fusion.mode, FusionMode::Serial);
  EXPECT_THROW(cfg.load_file((dir / "absent.cfg").string()), ConfigError);
}

TEST(RunConfig, UnknownKeysAreNamed) {
  RunConfig cfg;
  cfg.apply_override("train.epoch=3");
  const std::string msg = error_of(cfg);
  EXPECT_NE(msg.find("train.epoch"), std::string::npos) << msg;
  EXPECT_THROW(cfg.train(), ConfigError);
  EXPECT_THROW(cfg.get("nope"), ConfigError);
}

TEST(RunConfig, AllProblemsReportedTogether) {
  RunConfig cfg;
  cfg.load_text("train.lr = fast\nthis line is broken\nbogus.key = 1\nfusion.mode = sideways\n"
                "data.image_size = 100\ndecoder.heads = 1,2,3\n",
                "bad.cfg");
  const std::string msg = error_of(cfg);
  EXPECT_EQ(msg.rfind("6 configuration error(s)", 0), 0u) << msg;
  for (const char* needle : {"train.lr", "bad.cfg:2", "bogus.key", "fusion.mode", "data.image_size",
                             "decoder.heads"}) {
    EXPECT_NE(msg.find(needle), std::string::npos) << needle << " missing from: " << msg;
  }
}

TEST(RunConfig, ValueRangesAreChecked) {
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"train.lr", "0"},
      {"train.lr_decay", "1.5"},
      {"train.batch_size", "0"},
      {"train.freeze_cnn_until", "70"},
      {"fusion.moment_exponent", "-1"},
      {"fusion.l2_power", "3"},
      {"fusion.widths", "16,32,-64,128"},
      {"decoder.reconstruction", "maybe"},
      {"loss.variant", "focal"},
      {"loss.lambdas", "1,1,1"},
      {"loss.reduction", "max"},
      {"data.flip_prob", "2"},
      {"data.std", "0.2,0,0.2"},
      {"model.encoder", "vgg"},
  };
  for (const auto& [key, value] : bad) {
    RunConfig cfg;
    cfg.set(key, value);
    const std::string msg = error_of(cfg);
    EXPECT_NE(msg.find(key), std::string::npos) << key << "=" << value << " -> '" << msg << "'";
  }
}

TEST(RunConfig, HashIgnoresRunLengthOnly) {
  RunConfig a, b;
  b.set("train.epochs", "3");
  b.set("train.max_steps", "10");
  b.set("train.checkpoint_every", "5");
  b.set("train.eval_every", "2");
  EXPECT_EQ(a.hash(), b.hash());
  b.set("train.lr", "3e-4");
  EXPECT_NE(a.hash(), b.hash());
  RunConfig c;
  c.set("fusion.mode", "serial");
  EXPECT_NE(a.hash(), c.hash());
}

TEST(RunConfig, ResolvedTextRoundTrips) {
  RunConfig a = gldm::testing::toy_config("/data", 96);
  const std::string text = a.resolved_text();
  EXPECT_EQ(gldm::testing::read_lines("/dev/null").size(), 0u);
  RunConfig b;
  b.load_text(text);
  EXPECT_EQ(b.resolved_text(), text);
  EXPECT_EQ(b.hash(), a.hash());
  size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  EXPECT_EQ(lines, RunConfig::known_keys().size());
}
