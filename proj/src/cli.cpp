#include "factoreeg/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "factoreeg/error.hpp"
#include "factoreeg/eval.hpp"
#include "factoreeg/grad_check.hpp"

namespace factoreeg {

namespace {

struct GeometryFlags {
  std::size_t maps = reference_net_config().n_feature_maps;
  std::size_t temporal_kernel = reference_net_config().temporal_kernel;
  std::size_t spatial_kernel = 0;  // 0: every channel
  std::size_t pool_kernel = reference_net_config().pool_kernel;
  std::size_t pool_stride = reference_net_config().pool_stride;
  double dropout = reference_net_config().dropout_p;
};

struct RunFlags {
  std::string data;
  std::string out;
  TrainConfig train;
  GeometryFlags geometry;
  bool quiet = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--data", f.data, "Dataset directory")->required();
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--seed", f.train.seed, "Base seed");
  cmd->add_option("--epochs", f.train.epochs, "Epochs per fold");
  cmd->add_option("--checkpoint-after", f.train.checkpoint_after_epoch,
                  "Checkpoints are chosen among later epochs only");
  cmd->add_option("--lr", f.train.lr, "AdamW learning rate");
  cmd->add_option("--weight-decay", f.train.weight_decay, "AdamW decoupled weight decay");
  cmd->add_option("--batch", f.train.batch_size, "Minibatch size");
  cmd->add_option("--folds", f.train.n_folds, "Cross-validation folds");
  cmd->add_option("--d-steps", f.train.d_steps_per_batch, "Discriminator updates per batch");
  cmd->add_option("--window", f.train.crop_window_samples, "Crop length in samples (0: whole trial)");
  cmd->add_option("--stride", f.train.crop_stride_samples, "Crop stride in samples (0: 100 ms)");
  cmd->add_flag("--average-logits", f.train.average_logits, "Average crop logits instead of probabilities");
  cmd->add_option("--maps", f.geometry.maps, "Feature maps per encoder");
  cmd->add_option("--temporal-kernel", f.geometry.temporal_kernel, "Temporal kernel length");
  cmd->add_option("--spatial-kernel", f.geometry.spatial_kernel, "Spatial kernel height (0: all channels)");
  cmd->add_option("--pool", f.geometry.pool_kernel, "Average-pool length");
  cmd->add_option("--pool-stride", f.geometry.pool_stride, "Average-pool stride");
  cmd->add_option("--dropout", f.geometry.dropout, "Dropout probability");
  cmd->add_flag("--quiet", f.quiet, "No per-epoch progress on stderr");
}

NetConfig net_for(const EEGDataset& ds, const RunFlags& f) {
  NetConfig net;
  net.n_eeg_channels = ds.n_channels;
  net.n_timesamples = f.train.window(ds.trial_samples);
  net.n_classes = ds.n_classes();
  net.n_feature_maps = f.geometry.maps;
  net.temporal_kernel = f.geometry.temporal_kernel;
  net.spatial_kernel = f.geometry.spatial_kernel == 0 ? ds.n_channels : f.geometry.spatial_kernel;
  net.pool_kernel = f.geometry.pool_kernel;
  net.pool_stride = f.geometry.pool_stride;
  net.dropout_p = f.geometry.dropout;
  net.validate();
  return net;
}

EpochCallback progress(const RunFlags& f) {
  if (f.quiet) return {};
  return [](const EpochLog& e) {
    std::fprintf(stderr, "fold %zu epoch %zu  l_cls %.4f  l_all %.4f  val %.4f\n", e.fold, e.epoch,
                 e.losses.l_cls, e.losses.l_all, e.val_loss);
  };
}

void print_summary(const CVReport& r) { std::cout << render_report_table(r); }

std::filesystem::path sub_dir(const std::string& out, const std::string& name) {
  return out.empty() ? std::filesystem::path{} : std::filesystem::path(out) / name;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_gradcheck(std::size_t seeds, double tol) {
  bool ok = true;
  char line[128];
  for (const OpCheck& c : grad_check_suite(seeds, tol)) {
    std::snprintf(line, sizeof(line), "%-22s max_rel_error %.3e  %s\n", c.op.c_str(), c.max_rel_error,
                  c.passed ? "ok" : "FAIL");
    std::cout << line;
    ok = ok && c.passed;
  }
  return ok ? kExitOk : kExitNumeric;
}

}  // namespace

int cli_main(std::span<const std::string> argv) {
  CLI::App app{"Factorized common/specific EEG feature learning"};
  app.require_subcommand(1);

  SynthConfig synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic sparse-condition dataset");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--classes", synth.n_classes, "Task classes");
  synth_cmd->add_option("--trials-per-class", synth.trials_per_class, "Trials per task class");
  synth_cmd->add_option("--resting", synth.n_resting, "Resting-state trials");
  synth_cmd->add_option("--channels", synth.n_channels, "EEG channels");
  synth_cmd->add_option("--samples", synth.trial_samples, "Samples per trial");
  synth_cmd->add_option("--rate", synth.sample_rate_hz, "Sampling rate in Hz");
  synth_cmd->add_option("--common", synth.common_amplitude, "Common component amplitude");
  synth_cmd->add_option("--alpha", synth.specific_amplitude, "Class-specific amplitude");
  synth_cmd->add_option("--noise", synth.noise_std, "Gaussian noise standard deviation");

  RunFlags train;
  std::string train_mode = "both";
  auto* train_cmd = app.add_subcommand("train", "One cross-validated training run");
  add_run_flags(train_cmd, train);
  train_cmd->add_option("--lambda", train.train.lambda, "Difference-loss weight");
  train_cmd->add_option("--mode", train_mode, "both | no_fc | no_fs");

  RunFlags ablate;
  std::vector<std::string> ablate_modes = {"both", "no_fc", "no_fs"};
  auto* ablate_cmd = app.add_subcommand("ablate", "Cross-validate each ablation arm");
  add_run_flags(ablate_cmd, ablate);
  ablate_cmd->add_option("--lambda", ablate.train.lambda, "Difference-loss weight");
  ablate_cmd->add_option("--modes", ablate_modes, "Arms to run")->delimiter(',');

  RunFlags sweep;
  std::vector<double> lambdas = {0.0, 0.5, 1.0};
  auto* sweep_cmd = app.add_subcommand("sweep", "Cross-validate the full method at several lambdas");
  add_run_flags(sweep_cmd, sweep);
  sweep_cmd->add_option("--lambdas", lambdas, "Lambda values")->delimiter(',');

  std::size_t gc_seeds = 5;
  double gc_tol = 1e-4;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Verify every op's gradient by finite differences");
  gc_cmd->add_option("--seeds", gc_seeds, "Random inputs per op");
  gc_cmd->add_option("--tol", gc_tol, "Maximum relative error");

  std::string ex_ckpt, ex_data, ex_out, ex_mode = "both";
  std::vector<std::string> ex_sources = {"z_c", "z_s", "classifier_hidden"};
  auto* ex_cmd = app.add_subcommand("export", "Dump inference-mode features as CSV");
  ex_cmd->add_option("--checkpoint", ex_ckpt, "Checkpoint file")->required();
  ex_cmd->add_option("--data", ex_data, "Dataset directory")->required();
  ex_cmd->add_option("--out", ex_out, "CSV path (stdout when absent)");
  ex_cmd->add_option("--sources", ex_sources, "z_c, z_s, classifier_hidden")->delimiter(',');
  ex_cmd->add_option("--mode", ex_mode, "Classifier wiring for classifier_hidden");

  std::string report_in;
  auto* report_cmd = app.add_subcommand("report", "Render a CV report JSON as a text table");
  report_cmd->add_option("report", report_in, "cv_report.json")->required();

  std::vector<const char*> raw;
  for (const auto& a : argv) raw.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) {
      save_dataset(synthesize_sparse_dataset(synth), synth_out);
      std::cout << "wrote " << synth_out << "\n";
    } else if (train_cmd->parsed()) {
      train.train.arm = parse_arm(train_mode);
      const EEGDataset ds = load_dataset(train.data);
      const CVRun run = train_cv(ds, net_for(ds, train), train.train, train.out, progress(train));
      print_summary(run.report);
    } else if (ablate_cmd->parsed()) {
      std::vector<Arm> arms;
      for (const auto& m : ablate_modes) arms.push_back(parse_arm(m));
      const EEGDataset ds = load_dataset(ablate.data);
      const NetConfig net = net_for(ds, ablate);
      for (Arm arm : arms) {
        const CVRun run = run_ablation(ds, net, ablate.train, arm, sub_dir(ablate.out, to_string(arm)),
                                       progress(ablate));
        print_summary(run.report);
        std::cout << "\n";
      }
    } else if (sweep_cmd->parsed()) {
      const EEGDataset ds = load_dataset(sweep.data);
      const NetConfig net = net_for(ds, sweep);
      const auto out = sweep.out.empty() ? std::filesystem::path{} : std::filesystem::path(sweep.out);
      for (const CVRun& run : lambda_sweep(ds, net, sweep.train, lambdas, out, progress(sweep))) {
        print_summary(run.report);
        std::cout << "\n";
      }
    } else if (gc_cmd->parsed()) {
      return run_gradcheck(gc_seeds, gc_tol);
    } else if (ex_cmd->parsed()) {
      std::vector<FeatureSource> sources;
      for (const auto& s : ex_sources) sources.push_back(parse_feature_source(s));
      const Arm arm = parse_arm(ex_mode);
      const FactorModel model = load_checkpoint(ex_ckpt);
      const FeatureDump dump = export_features(model, load_dataset(ex_data), sources, arm);
      if (ex_out.empty()) {
        write_feature_csv(dump, std::cout);
      } else {
        std::ofstream out(ex_out, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + ex_out);
        write_feature_csv(dump, out);
      }
    } else if (report_cmd->parsed()) {
      std::cout << render_report_table(parse_cv_report_json(read_text(report_in)));
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace factoreeg
