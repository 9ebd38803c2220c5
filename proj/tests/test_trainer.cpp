#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "factoreeg/error.hpp"
#include "factoreeg/eval.hpp"
#include "factoreeg/trainer.hpp"

using namespace factoreeg;

namespace {

SynthConfig tiny_synth(double alpha = 0.8, double noise = 0.3, std::uint64_t seed = 1) {
  SynthConfig s;
  s.n_classes = 3;
  s.trials_per_class = 10;
  s.n_resting = 6;
  s.n_channels = 3;
  s.trial_samples = 40;
  s.specific_amplitude = alpha;
  s.noise_std = noise;
  s.seed = seed;
  return s;
}

NetConfig tiny_net() {
  NetConfig c;
  c.n_eeg_channels = 3;
  c.n_timesamples = 40;
  c.n_classes = 3;
  c.n_feature_maps = 4;
  c.temporal_kernel = 5;
  c.spatial_kernel = 3;
  c.pool_kernel = 6;
  c.pool_stride = 3;
  return c;
}

TrainConfig tiny_train(std::size_t epochs = 4) {
  TrainConfig t;
  t.epochs = epochs;
  t.checkpoint_after_epoch = epochs / 2;
  t.batch_size = 8;
  t.seed = 3;
  return t;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "factoreeg_trainer_tests" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

std::vector<int> all_task_ids(const EEGDataset& ds) {
  std::vector<int> ids;
  for (const auto& t : ds.trials) ids.push_back(t.trial_id);
  return ids;
}

}  // namespace

TEST(AdamW, HandValueFirstStep) {
  Tensor p({1}, {1.0});
  const std::vector<Tensor> g = {Tensor({1}, {1.0})};
  Tensor* params[] = {&p};
  AdamWState s = make_adamw_state(std::vector<const Tensor*>{&p});
  adamw_step(params, g, s, 0.001, 0.01);
  // mhat = vhat = 1 at step 1
  const double expected = 1.0 - 0.001 * (1.0 / (1.0 + 1e-8)) - 0.001 * 0.01 * 1.0;
  EXPECT_NEAR(p.data[0], expected, 1e-12);
  EXPECT_NEAR(p.data[0], 0.99899, 1e-10);
  EXPECT_EQ(s.t, 1u);
}

TEST(AdamW, ZeroGradientZeroDecayIsNoOp) {
  Tensor p({3}, {0.5, -2.0, 7.0});
  const Tensor before = p;
  const std::vector<Tensor> g = {Tensor::zeros({3})};
  Tensor* params[] = {&p};
  AdamWState s = make_adamw_state(std::vector<const Tensor*>{&p});
  adamw_step(params, g, s, 0.001, 0.0);
  EXPECT_EQ(p, before);
}

TEST(AdamW, PureDecoupledDecay) {
  Tensor p({1}, {1.0});
  const std::vector<Tensor> g = {Tensor::zeros({1})};
  Tensor* params[] = {&p};
  AdamWState s = make_adamw_state(std::vector<const Tensor*>{&p});
  adamw_step(params, g, s, 0.001, 0.01);
  EXPECT_NEAR(p.data[0], 0.99999, 1e-12);
}

TEST(AdamW, RejectsNonFiniteGradientWithoutSideEffects) {
  Tensor a({1}, {1.0}), b({2}, {1.0, 2.0});
  const Tensor a0 = a, b0 = b;
  const std::vector<Tensor> g = {Tensor({1}, {0.5}), Tensor({2}, {1.0, std::nan("")})};
  Tensor* params[] = {&a, &b};
  AdamWState s = make_adamw_state(std::vector<const Tensor*>{&a, &b});
  EXPECT_THROW(adamw_step(params, g, s, 0.001, 0.01), NumericError);
  EXPECT_EQ(a, a0);
  EXPECT_EQ(b, b0);
  EXPECT_EQ(s.t, 0u);

  const std::vector<Tensor> wrong = {Tensor({2}, {0, 0}), Tensor({2}, {0, 0})};
  EXPECT_THROW(adamw_step(params, wrong, s, 0.001, 0.01), ShapeError);
}

TEST(Crops, OffsetsAndContents) {
  EEGTrial t;
  t.n_channels = 2;
  t.n_samples = 1000;
  t.samples.resize(2000);
  for (std::size_t i = 0; i < 2000; ++i) t.samples[i] = static_cast<double>(i);
  const auto crops = make_crops(t, 500, 250);
  ASSERT_EQ(crops.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(crops[k].shape, (Shape{2, 500}));
    EXPECT_EQ(crops[k].at({0, 0}), static_cast<double>(k * 250));
    EXPECT_EQ(crops[k].at({1, 0}), static_cast<double>(1000 + k * 250));
  }
  const auto whole = make_crops(t, 1000, 250);
  ASSERT_EQ(whole.size(), 1u);
  EXPECT_EQ(whole[0].data, t.samples);
  EXPECT_THROW(make_crops(t, 1001, 250), DataError);
  EXPECT_THROW(make_crops(t, 500, 0), ConfigError);
}

TEST(Crops, ReferenceGeometryGivesOneCrop) {
  EEGTrial t;
  t.n_channels = 1;
  t.n_samples = 997;
  t.samples.assign(997, 0.0);
  TrainConfig cfg;
  EXPECT_EQ(cfg.stride(), 25u);
  EXPECT_EQ(make_crops(t, 997, cfg.stride()).size(), 1u);
}

TEST(TrainConfig, Validation) {
  const NetConfig net = tiny_net();
  TrainConfig c = tiny_train();
  EXPECT_NO_THROW(c.validate(net));
  c.checkpoint_after_epoch = c.epochs;
  EXPECT_THROW(c.validate(net), ConfigError);
  c = tiny_train();
  c.batch_size = 0;
  EXPECT_THROW(c.validate(net), ConfigError);
  c = tiny_train();
  c.crop_window_samples = 4;
  EXPECT_THROW(c.validate(net), ConfigError);
  c = tiny_train();
  c.lambda = -1.0;
  EXPECT_THROW(c.validate(net), ConfigError);
  EXPECT_THROW(parse_arm("neither"), ConfigError);
  EXPECT_EQ(parse_arm(to_string(Arm::NoFs)), Arm::NoFs);
}

TEST(Prediction, AveragesProbabilities) {
  EXPECT_EQ(average_and_argmax(Tensor({2, 2}, {0.6, 0.4, 0.2, 0.8})), 1u);
  EXPECT_EQ(average_and_argmax(Tensor({1, 3}, {0.2, 0.5, 0.3})), 1u);
  EXPECT_EQ(average_and_argmax(Tensor({1, 3}, {0.4, 0.2, 0.4})), 0u);  // tie -> lowest index
}

TEST(Prediction, InvariantToCropOrder) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor scores({5, 4});
    for (double& v : scores.data) v = u(rng);
    std::vector<std::size_t> rows = {0, 1, 2, 3, 4};
    std::shuffle(rows.begin(), rows.end(), rng);
    Tensor permuted({5, 4});
    for (std::size_t r = 0; r < 5; ++r)
      std::copy_n(scores.data.begin() + rows[r] * 4, 4, permuted.data.begin() + r * 4);
    EXPECT_EQ(average_and_argmax(scores), average_and_argmax(permuted));
  }
}

TEST(Prediction, SingleCropMatchesSoftmaxArgmax) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  const FactorModel m = build_model(tiny_net(), 4);
  TrainConfig cfg = tiny_train();
  for (const auto& t : ds.trials) {
    const Tensor* one[] = {nullptr};
    const auto crops = make_crops(t, 40, cfg.stride());
    ASSERT_EQ(crops.size(), 1u);
    one[0] = &crops[0];
    const Tensor logits = predict_logits(m, stack_crops(one), Arm::Both);
    const auto best = std::max_element(logits.data.begin(), logits.data.end()) - logits.data.begin();
    EXPECT_EQ(predict_trial(m, t, cfg), static_cast<std::size_t>(best));
  }
}

TEST(TrainEpoch, StepsTouchOnlyTheirGroups) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  for (Arm arm : {Arm::Both, Arm::NoFc, Arm::NoFs}) {
    FactorModel m = build_model(tiny_net(), 7);
    TrainConfig cfg = tiny_train();
    cfg.arm = arm;
    cfg.d_steps_per_batch = 2;
    Optimizers opt = make_optimizers(m, arm);
    Rng rng(1);
    const LabeledCrops train = crops_for(ds, all_task_ids(ds), cfg);

    const std::vector<ParamGroup> all = {ParamGroup::Fc, ParamGroup::Fs, ParamGroup::Classifier,
                                         ParamGroup::Discriminator};
    auto hashes = [&](const FactorModel& model) {
      std::vector<std::uint64_t> h;
      for (ParamGroup g : all) h.push_back(param_hash(model, g));
      return h;
    };
    const auto initial = hashes(m);
    auto last = initial;
    std::size_t d_steps = 0, g_steps = 0;
    train_epoch(m, train, ds, cfg, opt, rng, [&](TrainPhase phase, const FactorModel& model) {
      const auto now = hashes(model);
      const auto gen = generator_groups(arm);
      for (std::size_t i = 0; i < all.size(); ++i) {
        const bool is_d = all[i] == ParamGroup::Discriminator;
        const bool in_gen = std::find(gen.begin(), gen.end(), all[i]) != gen.end();
        const bool allowed = phase == TrainPhase::DiscriminatorStep ? is_d : in_gen;
        if (!allowed) EXPECT_EQ(now[i], last[i]) << to_string(arm) << " group " << i;
      }
      (phase == TrainPhase::DiscriminatorStep ? d_steps : g_steps)++;
      last = now;
    });
    EXPECT_EQ(g_steps, 4u);  // 30 crops in batches of 8
    if (arm == Arm::NoFc) {
      EXPECT_EQ(d_steps, 0u);
      EXPECT_EQ(last[3], initial[3]);
      EXPECT_EQ(last[0], initial[0]);
    } else {
      EXPECT_EQ(d_steps, 8u);
      EXPECT_NE(last[3], initial[3]);
    }
    if (arm == Arm::NoFs) EXPECT_EQ(last[1], initial[1]);
  }
}

TEST(TrainEpoch, NoDiscriminatorStepsLeavesDFixed) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  FactorModel m = build_model(tiny_net(), 7);
  TrainConfig cfg = tiny_train();
  cfg.d_steps_per_batch = 0;
  Optimizers opt = make_optimizers(m);
  Rng rng(1);
  const auto d0 = param_hash(m, ParamGroup::Discriminator);
  const LossRecord rec = train_epoch(m, crops_for(ds, all_task_ids(ds), cfg), ds, cfg, opt, rng);
  EXPECT_EQ(param_hash(m, ParamGroup::Discriminator), d0);
  EXPECT_GT(rec.l_adv_d, 0.0);
  EXPECT_EQ(opt.discriminator.t, 0u);
}

TEST(TrainEpoch, OneStepWhenBatchCoversData) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  FactorModel m = build_model(tiny_net(), 7);
  TrainConfig cfg = tiny_train();
  cfg.batch_size = 64;
  Optimizers opt = make_optimizers(m);
  Rng rng(1);
  train_epoch(m, crops_for(ds, all_task_ids(ds), cfg), ds, cfg, opt, rng);
  EXPECT_EQ(opt.generator.t, 1u);
  EXPECT_EQ(opt.discriminator.t, 1u);
}

TEST(TrainEpoch, LossRecordIsConsistent) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  FactorModel m = build_model(tiny_net(), 7);
  TrainConfig cfg = tiny_train();
  cfg.lambda = 0.5;
  Optimizers opt = make_optimizers(m);
  Rng rng(1);
  const LossRecord r = train_epoch(m, crops_for(ds, all_task_ids(ds), cfg), ds, cfg, opt, rng);
  EXPECT_DOUBLE_EQ(r.l_all, r.l_cls + r.l_adv_fc + 0.5 * r.l_diff);
  EXPECT_TRUE(std::isfinite(r.l_all));
}

TEST(TrainEpoch, ClassificationLossDecreasesOnSeparableData) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth(2.0, 0.05));
  FactorModel m = build_model(tiny_net(), 2);
  TrainConfig cfg = tiny_train(20);
  cfg.lambda = 0.0;
  cfg.lr = 0.003;
  Optimizers opt = make_optimizers(m);
  Rng rng(4);
  const LabeledCrops train = crops_for(ds, all_task_ids(ds), cfg);
  const double first = train_epoch(m, train, ds, cfg, opt, rng).l_cls;
  double last = first;
  for (int e = 1; e < 20; ++e) last = train_epoch(m, train, ds, cfg, opt, rng).l_cls;
  EXPECT_LT(last, 0.7 * first);
}

TEST(TrainEpoch, DifferenceLossFallsWithPositiveLambda) {
  // Mean over three seeds of first vs last epoch l_diff.
  double first = 0.0, last = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const EEGDataset ds = synthesize_sparse_dataset(tiny_synth(0.8, 0.3, seed));
    FactorModel m = build_model(tiny_net(), seed);
    TrainConfig cfg = tiny_train(15);
    Optimizers opt = make_optimizers(m);
    Rng rng(seed);
    const LabeledCrops train = crops_for(ds, all_task_ids(ds), cfg);
    first += train_epoch(m, train, ds, cfg, opt, rng).l_diff;
    double l = 0.0;
    for (int e = 1; e < 15; ++e) l = train_epoch(m, train, ds, cfg, opt, rng).l_diff;
    last += l;
  }
  EXPECT_LT(last, first);
}

TEST(TrainEpoch, BitDeterministic) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  auto run = [&] {
    FactorModel m = build_model(tiny_net(), 9);
    TrainConfig cfg = tiny_train();
    Optimizers opt = make_optimizers(m);
    Rng rng(9);
    const LabeledCrops train = crops_for(ds, all_task_ids(ds), cfg);
    std::vector<LossRecord> out;
    for (int e = 0; e < 3; ++e) out.push_back(train_epoch(m, train, ds, cfg, opt, rng));
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainEpoch, RequiresRestingForAdversarialArms) {
  EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  const TrainConfig cfg = tiny_train();
  const LabeledCrops train = crops_for(ds, all_task_ids(ds), cfg);
  ds.resting.clear();
  FactorModel m = build_model(tiny_net(), 1);
  Optimizers opt = make_optimizers(m);
  Rng rng(1);
  EXPECT_THROW(train_epoch(m, train, ds, cfg, opt, rng), DataError);
}

TEST(TrainFold, CheckpointIsMinimumAfterThreshold) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  TrainConfig cfg = tiny_train(8);
  cfg.checkpoint_after_epoch = 3;
  const auto splits = split_folds(ds, cfg.n_folds, cfg.seed);
  const FoldResult r = train_fold(ds, splits[0], tiny_net(), cfg);
  ASSERT_EQ(r.log.size(), 8u);
  EXPECT_GT(r.checkpoint.epoch, 3u);
  for (const auto& e : r.log) {
    if (e.epoch > 3) EXPECT_LE(r.checkpoint.val_loss, e.val_loss);
  }
  EXPECT_EQ(r.log[r.checkpoint.epoch - 1].val_loss, r.checkpoint.val_loss);
  EXPECT_EQ(validation_loss(r.best_model, crops_for(ds, splits[0].val_ids, cfg), cfg.arm), r.checkpoint.val_loss);
  ASSERT_TRUE(r.ortho_index.has_value());

  // Oracle: brute-force column-pair overlap of each test crop's F x T maps.
  const LabeledCrops test = crops_for(ds, splits[0].test_ids, cfg);
  const std::size_t f = tiny_net().n_feature_maps, t = tiny_net().feature_time();
  double expected = 0.0;
  for (const Tensor& crop : test.crops) {
    const Tensor* one[] = {&crop};
    const Tensor zc = forward_fc(r.best_model, stack_crops(one)), zs = forward_fs(r.best_model, stack_crops(one));
    double cross = 0.0, nc = 0.0, ns = 0.0;
    for (std::size_t a = 0; a < t; ++a) {
      for (std::size_t b = 0; b < t; ++b) {
        double dot = 0.0;
        for (std::size_t k = 0; k < f; ++k) dot += zc.data[k * t + a] * zs.data[k * t + b];
        cross += dot * dot;
      }
    }
    for (std::size_t i = 0; i < f * t; ++i) {
      nc += zc.data[i] * zc.data[i];
      ns += zs.data[i] * zs.data[i];
    }
    expected += std::sqrt(cross) / std::sqrt(nc * ns) / static_cast<double>(test.crops.size());
  }
  EXPECT_NEAR(*r.ortho_index, expected, 1e-12);
}

TEST(TrainFold, RejectsGeometryMismatch) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  const auto splits = split_folds(ds, 5, 0);
  NetConfig net = tiny_net();
  net.n_classes = 4;
  EXPECT_THROW(train_fold(ds, splits[0], net, tiny_train()), ConfigError);
  TrainConfig cfg = tiny_train();
  cfg.crop_window_samples = 30;
  EXPECT_THROW(train_fold(ds, splits[0], tiny_net(), cfg), ConfigError);
}

TEST(TrainCv, WritesArtifactsAndIsDeterministic) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  const TrainConfig cfg = tiny_train(3);
  const auto a = fresh_dir("a"), b = fresh_dir("b");
  const CVRun ra = train_cv(ds, tiny_net(), cfg, a);
  train_cv(ds, tiny_net(), cfg, b);
  for (const char* f : {"run_log.jsonl", "cv_report.json", "cv_report.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(a / f)) << f;
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  for (int k = 0; k < 5; ++k) {
    const auto ck = "fold" + std::to_string(k) + ".ckpt";
    EXPECT_EQ(read_file(a / ck), read_file(b / ck));
    EXPECT_EQ(load_checkpoint(a / ck), ra.folds[static_cast<std::size_t>(k)].best_model);
  }

  const auto& rep = ra.report;
  ASSERT_EQ(rep.fold_accuracy.size(), 5u);
  double mean = 0.0;
  for (double x : rep.fold_accuracy) mean += x;
  mean /= 5.0;
  double var = 0.0;
  for (double x : rep.fold_accuracy) var += (x - mean) * (x - mean);
  EXPECT_NEAR(rep.mean, mean, 1e-12);
  EXPECT_NEAR(rep.std, std::sqrt(var / 5.0), 1e-12);
  for (double x : rep.fold_accuracy) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }

  // run log: header line + 5 folds x 3 epochs
  std::istringstream log(read_file(a / "run_log.jsonl"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) ++lines;
  EXPECT_EQ(lines, 1u + 15u);
}

TEST(TrainCv, TestSetsPartitionTaskTrials) {
  const EEGDataset ds = synthesize_sparse_dataset(tiny_synth());
  const CVRun run = train_cv(ds, tiny_net(), tiny_train(3));
  std::size_t total = 0;
  for (const auto& f : run.folds) total += f.test_labels.size();
  EXPECT_EQ(total, ds.trials.size());
}

TEST(TrainCv, RejectsTooFewTrialsPerClass) {
  SynthConfig s = tiny_synth();
  s.trials_per_class = 4;
  const EEGDataset ds = synthesize_sparse_dataset(s);
  EXPECT_THROW(train_cv(ds, tiny_net(), tiny_train()), DataError);
}

TEST(FoldSeed, DistinctPerFold) {
  std::set<std::uint64_t> seeds;
  for (std::size_t k = 0; k < 5; ++k) seeds.insert(fold_seed(1, k));
  EXPECT_EQ(seeds.size(), 5u);
  EXPECT_EQ(fold_seed(1, 2), fold_seed(1, 2));
}
