#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "fixtures.hpp"
#include "vimonet/checkpoint.hpp"
#include "vimonet/training.hpp"

namespace vimonet::training {
namespace {

namespace fs = std::filesystem;
using vimonet::testing::random_sample;
using vimonet::testing::small_model;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("vimonet_train_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<EncodedSample> samples(const Model& m, std::uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<EncodedSample> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(random_sample(m, rng, i % 2 ? Modality::video : Modality::motion));
    out.back().id = "s" + std::to_string(i);
  }
  return out;
}

std::set<std::string> changed(const Model& before, const Model& after) {
  const auto a = tensor_digests(before), b = tensor_digests(after);
  std::set<std::string> out;
  for (const auto& [n, d] : b)
    if (!a.count(n) || a.at(n) != d) out.insert(n);
  return out;
}

std::set<std::string> trainable(const std::vector<ParamGroup>& groups) {
  std::set<std::string> out;
  for (const auto& g : groups)
    if (g.trainable) out.insert(g.members.begin(), g.members.end());
  return out;
}

TEST(TrainingStep, ZeroLearningRateLeavesParametersUnchanged) {
  auto m = small_model(1);
  m.attach_lora({4, 4.0, {true, true, true, true}}, 2);
  const auto before = m;
  auto cfg = StageConfig::defaults(2);
  cfg.group_lrs = {{"translators", 0.0}, {"lora", 0.0}};
  OptimizerState opt;
  const auto batch = samples(m, 3, 4);
  const auto r = training_step(m, batch, resolve_groups(cfg, m), opt, 1.0);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_GT(r.loss, 0.0);
  EXPECT_TRUE(changed(before, m).empty());
  EXPECT_EQ(opt.step, 1);
}

TEST(TrainingStep, SmallStepDecreasesSampleLoss) {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto m = small_model(100 + seed);
    const auto s = samples(m, seed, 1);
    auto cfg = StageConfig::defaults(1);
    cfg.group_lrs = {{"translators", 1e-4}};
    OptimizerState opt;
    const double before = sample_loss(m, s[0]).loss_sum;
    training_step(m, s, resolve_groups(cfg, m), opt, 1.0);
    failures += !(sample_loss(m, s[0]).loss_sum < before);
  }
  EXPECT_LE(failures, 1);
}

TEST(TrainingStep, TwentyStepsOnFixedBatchAreNearlyMonotone) {
  auto m = small_model(7);
  const auto batch = samples(m, 8, 4);
  auto cfg = StageConfig::defaults(1);
  OptimizerState opt;
  const auto groups = resolve_groups(cfg, m);
  double prev = batch_loss(m, batch);
  int upticks = 0;
  for (int i = 0; i < 20; ++i) {
    training_step(m, batch, groups, opt, 1.0);
    const double now = batch_loss(m, batch);
    upticks += now > prev;
    prev = now;
  }
  EXPECT_LE(upticks, 1);
}

TEST(TrainingStep, FreezingLedgerPerStage) {
  for (int stage : {0, 1, 2}) {
    auto m = small_model(11);
    if (stage == 2) m.attach_lora({4, 4.0, {true, true, true, true}}, 5);
    const auto before = m;
    auto cfg = StageConfig::defaults(stage);
    const auto groups = resolve_groups(cfg, m);
    OptimizerState opt;
    const auto batch = samples(m, 12, 6);
    // LoRA A only receives gradient once B has left zero, hence several steps.
    for (int i = 0; i < 3; ++i) training_step(m, batch, groups, opt, 1.0);
    EXPECT_EQ(changed(before, m), trainable(groups)) << "stage " << stage;
  }
}

TEST(TrainingStep, NonFiniteLossNamesSamplesAndStep) {
  auto m = small_model(2);
  m.motion.W(0, 0) = std::numeric_limits<double>::quiet_NaN();
  auto batch = samples(m, 1, 2);
  OptimizerState opt;
  try {
    training_step(m, batch, resolve_groups(StageConfig::defaults(1), m), opt, 1.0);
    FAIL() << "expected NumericFault";
  } catch (const NumericFault& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("s0"), std::string::npos) << what;
    EXPECT_NE(what.find("step"), std::string::npos) << what;
  }
}

TEST(TrainingStep, EmptyBatchIsContractError) {
  auto m = small_model(2);
  OptimizerState opt;
  EXPECT_THROW(training_step(m, {}, resolve_groups(StageConfig::defaults(1), m), opt, 1.0), ContractError);
}

TEST(Groups, FrozenGroupOverrideIsRejected) {
  auto m = small_model(2);
  auto cfg = StageConfig::defaults(1);
  cfg.group_lrs["lm_base"] = 1e-3;
  EXPECT_THROW(resolve_groups(cfg, m), ContractError);
}

EncodedSample tagged(Modality mod, int i) {
  EncodedSample s;
  s.modality = mod;
  s.id = std::string(mod == Modality::motion ? "m" : "v") + std::to_string(i);
  return s;
}

std::vector<EncodedSample> pool(Modality mod, int n) {
  std::vector<EncodedSample> out;
  for (int i = 0; i < n; ++i) out.push_back(tagged(mod, i));
  return out;
}

TEST(MixBatches, RatioOneIsAllMotion) {
  const auto mix = mix_batches(pool(Modality::motion, 5), pool(Modality::video, 5), 1.0, 3);
  for (long long k = 0; k < 50; ++k)
    for (const auto& s : mix.batch(k, 8)) EXPECT_EQ(s.modality, Modality::motion);
  // An empty video pool is fine when it can never be drawn.
  EXPECT_NO_THROW(mix_batches(pool(Modality::motion, 5), {}, 1.0, 3));
}

TEST(MixBatches, HalfRatioWithinThreeSigma) {
  const auto mix = mix_batches(pool(Modality::motion, 7), pool(Modality::video, 9), 0.5, 42);
  int motion = 0, total = 0;
  for (long long k = 0; total < 10000; ++k)
    for (const auto& s : mix.batch(k, 8)) {
      if (total == 10000) break;
      motion += s.modality == Modality::motion;
      ++total;
    }
  const double frac = motion / 10000.0;
  EXPECT_GE(frac, 0.47);
  EXPECT_LE(frac, 0.53);
}

TEST(MixBatches, SameSeedSameStream) {
  auto ids = [](std::uint64_t seed) {
    const auto mix = mix_batches(pool(Modality::motion, 6), pool(Modality::video, 6), 0.3, seed);
    std::string out;
    for (long long k = 0; k < 20; ++k) out += sample_ids(mix.batch(k, 4)) + ";";
    return out;
  };
  EXPECT_EQ(ids(5), ids(5));
  EXPECT_NE(ids(5), ids(6));
}

TEST(MixBatches, InvalidArguments) {
  EXPECT_THROW(mix_batches(pool(Modality::motion, 2), pool(Modality::video, 2), 1.5, 1), ContractError);
  EXPECT_THROW(mix_batches(pool(Modality::motion, 2), pool(Modality::video, 2), -0.1, 1), ContractError);
  EXPECT_THROW(mix_batches(pool(Modality::motion, 2), {}, 0.5, 1), ContractError);
  EXPECT_THROW(mix_batches({}, pool(Modality::video, 2), 0.5, 1), ContractError);
}

TEST(FormatLr, CompactScientific) {
  EXPECT_EQ(format_lr(1e-3), "1e-3");
  EXPECT_EQ(format_lr(2e-5), "2e-5");
  EXPECT_EQ(format_lr(2e-4), "2e-4");
  EXPECT_EQ(format_lr(0.003), "3e-3");
  EXPECT_EQ(format_lr(2.5e-4), "2.5e-4");
  EXPECT_EQ(format_lr(0.0), "0");
}

TEST(Stages, ZeroStepStageOneEqualsInitialization) {
  const auto m = small_model(4);
  auto cfg = StageConfig::defaults(1);
  cfg.steps = 0;
  const auto data = samples(m, 2, 4);
  const auto st = train_stage1(m, data, cfg);
  EXPECT_TRUE(changed(m, st.model).empty());
  EXPECT_THROW(train_stage1(m, {}, cfg), ContractError);
}

TEST(Stages, StageTwoRequiresStageOne) {
  const auto m = small_model(4);
  const auto data = samples(m, 2, 4);
  auto cfg2 = StageConfig::defaults(2);
  cfg2.lora = {4, 4.0, {true, true, true, true}};
  EXPECT_THROW(train_stage2(nullptr, data, cfg2), ContractError);
  RunState pre{0, m, {}, {}};
  EXPECT_THROW(train_stage2(&pre, data, cfg2), ContractError);
  auto cfg1 = StageConfig::defaults(1);
  cfg1.steps = 5;
  const auto s1 = train_stage1(m, data, cfg1);
  cfg2.steps = 5;
  const auto s2 = train_stage2(&s1, data, cfg2);
  EXPECT_EQ(s2.stage, 2);
  EXPECT_TRUE(s2.model.lora.has_value());
  EXPECT_EQ(base_digest(s2.model.base), base_digest(m.base));
}

TEST(Stages, DefaultLearningRates) {
  const auto c1 = StageConfig::defaults(1), c2 = StageConfig::defaults(2);
  EXPECT_EQ(c1.group_lrs.at("translators"), 1e-3);
  EXPECT_EQ(c2.group_lrs.at("translators"), 2e-5);
  EXPECT_EQ(c2.group_lrs.at("lora"), 2e-4);
  EXPECT_EQ(c2.mix_ratio, 0.5);
  EXPECT_EQ(c2.lora.rank, 64);
}

RunState trained_stage1(std::uint64_t seed, int steps) {
  const auto m = small_model(seed);
  auto cfg = StageConfig::defaults(1);
  cfg.steps = steps;
  cfg.seed = seed;
  auto st = train_stage1(m, samples(m, seed, 8), cfg);
  st.config_json = "{\"seed\":" + std::to_string(seed) + "}";
  return st;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = scratch("rt");
  for (int steps : {0, 6}) {
    const auto st = trained_stage1(3, steps);
    checkpoint::save_checkpoint(dir / "a.vmck", st);
    const auto back = checkpoint::load_checkpoint(dir / "a.vmck");
    EXPECT_EQ(back.stage, 1);
    EXPECT_EQ(back.opt.step, steps);
    EXPECT_EQ(back.config_json, st.config_json);
    EXPECT_EQ(tensor_digests(back.model), tensor_digests(st.model));
    EXPECT_EQ(back.model.vocab.to_text(), st.model.vocab.to_text());
    ASSERT_EQ(back.opt.moments.size(), st.opt.moments.size());
    for (const auto& [n, mv] : st.opt.moments) {
      EXPECT_EQ(back.opt.moments.at(n).first, mv.first);
      EXPECT_EQ(back.opt.moments.at(n).second, mv.second);
    }
  }
  fs::remove_all(dir);
}

TEST(Checkpoint, TamperedByteIsCorruption) {
  const auto dir = scratch("tamper");
  checkpoint::save_checkpoint(dir / "a.vmck", trained_stage1(3, 2));
  auto bytes = io::read_file(dir / "a.vmck");
  for (std::size_t at : {std::size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[at] ^= 0x40;
    io::write_file(dir / "b.vmck", bad);
    EXPECT_THROW(checkpoint::load_checkpoint(dir / "b.vmck"), CorruptionError) << "byte " << at;
  }
  bytes.resize(bytes.size() - 40);
  io::write_file(dir / "c.vmck", bytes);
  EXPECT_THROW(checkpoint::load_checkpoint(dir / "c.vmck"), CorruptionError);
  EXPECT_THROW(checkpoint::load_checkpoint(dir / "missing.vmck"), ResolutionError);
  fs::remove_all(dir);
}

TEST(Checkpoint, ResumeReproducesUninterruptedCurve) {
  const auto dir = scratch("resume");
  for (int stage : {1, 2}) {
    const auto m = small_model(21);
    const auto data = samples(m, 22, 10);
    auto cfg = StageConfig::defaults(stage);
    cfg.steps = 12;
    cfg.batch_size = 3;
    cfg.lora = {4, 4.0, {true, true, true, true}};
    auto fresh = [&] {
      if (stage == 1) return start_stage1(m);
      const auto s1 = trained_stage1(21, 3);
      return start_stage2(&s1, cfg);
    };
    auto full = fresh();
    const auto want = run_stage(full, data, cfg);

    auto part = fresh();
    auto half = cfg;
    half.steps = 5;
    auto got = run_stage(part, data, half);
    checkpoint::save_checkpoint(dir / "p.vmck", part);
    auto resumed = checkpoint::load_checkpoint(dir / "p.vmck");
    const auto rest = run_stage(resumed, data, cfg);
    got.insert(got.end(), rest.begin(), rest.end());

    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(got[i].step, want[i].step);
      EXPECT_EQ(got[i].loss, want[i].loss) << "stage " << stage << " step " << want[i].step;
    }
    EXPECT_EQ(tensor_digests(resumed.model), tensor_digests(full.model));
  }
  fs::remove_all(dir);
}

TEST(Checkpoint, EqualSeedsGiveIdenticalFiles) {
  const auto dir = scratch("repro");
  checkpoint::save_checkpoint(dir / "a.vmck", trained_stage1(9, 10));
  checkpoint::save_checkpoint(dir / "b.vmck", trained_stage1(9, 10));
  EXPECT_EQ(io::read_file(dir / "a.vmck"), io::read_file(dir / "b.vmck"));
  checkpoint::save_checkpoint(dir / "c.vmck", trained_stage1(10, 10));
  EXPECT_NE(io::read_file(dir / "a.vmck"), io::read_file(dir / "c.vmck"));
  fs::remove_all(dir);
}

TEST(TensorFile, RejectsDamagedInput) {
  const auto t = io::from_doubles(std::vector<double>{1, 2, 3, 4}.data(), 4, {2, 2});
  auto bytes = io::encode_tensor_file(t);
  const auto back = io::decode_tensor_file(bytes, "t");
  EXPECT_EQ(back.dims, t.dims);
  EXPECT_EQ(io::to_doubles(back), (std::vector<double>{1, 2, 3, 4}));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(io::decode_tensor_file(bad, "t"), CorruptionError);
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(io::decode_tensor_file(bad, "t"), CorruptionError);
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(io::decode_tensor_file(bad, "t"), CorruptionError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(io::decode_tensor_file(bad, "t"), CorruptionError);
  EXPECT_THROW(io::read_tensor("/nonexistent/x.vmtn"), ResolutionError);
  EXPECT_THROW(io::write_tensor("/nonexistent/dir/x.vmtn", t), IoError);
}

}  // namespace
}  // namespace vimonet::training
