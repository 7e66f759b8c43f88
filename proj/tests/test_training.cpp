#include <gtest/gtest.h>

#include <cmath>

#include "mfdet/error.hpp"
#include "mfdet/training.hpp"

using namespace mfdet;

namespace {

const Dataset& tiny_dataset() {
  static const Dataset ds = generate_dataset("clean", 4, 6, 6, 32);
  return ds;
}

RunConfig tiny_config() {
  RunConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Schedule, StepDecayAfterBoundary) {
  RunConfig c;
  c.epochs = 10;
  c.learning_rate = 0.01f;
  for (std::size_t e = 1; e <= 8; ++e) EXPECT_FLOAT_EQ(learning_rate_at(c, e), 0.01f) << e;
  EXPECT_FLOAT_EQ(learning_rate_at(c, 9), 0.001f);
  EXPECT_FLOAT_EQ(learning_rate_at(c, 10), 0.001f);
  c.lr_decay_at = 1.0f;
  EXPECT_FLOAT_EQ(learning_rate_at(c, 10), 0.01f);
}

TEST(RunConfigValidation, RejectsBadValues) {
  EXPECT_NO_THROW(validate(tiny_config()));
  RunConfig c = tiny_config();
  c.epochs = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = tiny_config();
  c.learning_rate = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = tiny_config();
  c.val_fraction = 0.6;
  c.test_fraction = 0.4;
  EXPECT_THROW(validate(c), ConfigError);
  c = tiny_config();
  c.sampling = SamplingSpec::adjacent(3);  // fusion still single
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Training, RunsAndLogsEveryEpoch) {
  std::size_t calls = 0;
  const TrainResult r = train(tiny_config(), tiny_dataset(), [&](const EpochLog& log, const LayerStack&, bool) {
    ++calls;
    EXPECT_TRUE(std::isfinite(log.loss.total));
  });
  EXPECT_EQ(calls, 2u);
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_EQ(r.log[0].epoch, 1u);
  EXPECT_GE(r.best_epoch, 1u);
  EXPECT_GE(r.best_val_map50, 0.0);
  EXPECT_EQ(r.split.train.size() + r.split.val.size() + r.split.test.size(), 6u);
  EXPECT_EQ(r.best.config.fusion, FusionMode::single());
  EXPECT_EQ(r.best.config.input_size, 32u);
  EXPECT_FALSE(log_csv_row(r.log[0]).empty());
}

TEST(Training, SameSeedIsDeterministic) {
  const TrainResult a = train(tiny_config(), tiny_dataset());
  const TrainResult b = train(tiny_config(), tiny_dataset());
  EXPECT_TRUE(a.last.identical(b.last));
  EXPECT_EQ(a.log[1].loss.total, b.log[1].loss.total);
  RunConfig other = tiny_config();
  other.seed = 4;
  EXPECT_FALSE(train(other, tiny_dataset()).last.identical(a.last));
}

TEST(Training, MultiFrameRun) {
  RunConfig c = tiny_config();
  c.epochs = 1;
  c.sampling = SamplingSpec::stepped(2, 2);
  c.fusion = FusionMode::grouped(2);
  const TrainResult r = train(c, tiny_dataset());
  EXPECT_EQ(r.last.config.fusion, FusionMode::grouped(2));
  EXPECT_EQ(r.last.layers[0].weight.dim(0), 64u);
}

TEST(Training, StepsReduceLossOnAFixedBatch) {
  ModelConfig mc;
  mc.input_size = 32;
  LayerStack m = build_model(mc, 1);
  SgdOptimizer opt({0.01f, 0.9f, 0.0f});
  const auto stacks = make_stacks(tiny_dataset(), {0}, SamplingSpec::adjacent(1));
  const std::vector<const FrameStack*> batch = {&stacks[0], &stacks[1]};
  const double first = train_step(m, opt, batch).total;
  double last = first;
  for (int i = 0; i < 20; ++i) last = train_step(m, opt, batch).total;
  EXPECT_LT(last, first);
}

TEST(Training, MetadataDescribesTheRun) {
  RunConfig c = tiny_config();
  c.sampling = SamplingSpec::explicit_offsets({-4, -1, 0});
  c.fusion = FusionMode::early_fusion(3);
  const auto m = run_metadata(c, 7, 0.25);
  EXPECT_EQ(m.at("train.epoch"), "7");
  EXPECT_EQ(m.at("train.sampling"), "explicit:-4,-1,0");
  EXPECT_EQ(parse_sampling(m.at("train.sampling")).offsets, (std::vector<int>{-4, -1, 0}));
}
