#include <algorithm>
#include <cstdio>

#include "factoreeg/error.hpp"
#include "factoreeg/eval.hpp"

namespace factoreeg {

std::string to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::Zc: return "z_c";
    case FeatureSource::Zs: return "z_s";
    case FeatureSource::ClassifierHidden: return "classifier_hidden";
  }
  return "z_c";
}

FeatureSource parse_feature_source(const std::string& name) {
  if (name == "z_c") return FeatureSource::Zc;
  if (name == "z_s") return FeatureSource::Zs;
  if (name == "classifier_hidden") return FeatureSource::ClassifierHidden;
  throw ConfigError("unknown feature source '" + name + "' (expected z_c, z_s or classifier_hidden)");
}

FeatureDump export_features(const FactorModel& model, const EEGDataset& ds,
                            std::span<const FeatureSource> sources, Arm arm) {
  const NetConfig& net = model.config;
  if (ds.n_channels != net.n_eeg_channels || ds.trial_samples < net.n_timesamples) {
    throw ConfigError("export_features: dataset geometry does not fit the model");
  }
  FeatureDump dump;
  for (const EEGTrial& trial : ds.trials) {
    const auto crops = make_crops(trial, net.n_timesamples, net.n_timesamples);
    const Tensor* first[] = {&crops.front()};
    Tape tape;
    Var x = tape.leaf(stack_crops(first));
    Var z_c = encode(bind(tape, model.fc, false), x, net, {});
    Var z_s = encode(bind(tape, model.fs, false), x, net, {});
    for (FeatureSource src : sources) {
      FeatureRow row;
      row.trial_id = trial.trial_id;
      row.label = trial.label;
      row.source = src;
      if (src == FeatureSource::Zc) {
        row.values = z_c.value().data;
      } else if (src == FeatureSource::Zs) {
        row.values = z_s.value().data;
      } else {
        std::vector<Var> hidden;
        Var a = arm == Arm::NoFc ? z_s : z_c;
        Var b = arm == Arm::NoFs ? z_c : z_s;
        classify(bind(tape, model.classifier, false), a, b, net, {}, &hidden);
        row.values = hidden.back().value().data;
      }
      dump.rows.push_back(std::move(row));
    }
  }
  return dump;
}

void write_feature_csv(const FeatureDump& dump, std::ostream& out) {
  std::size_t width = 0;
  for (const auto& r : dump.rows) width = std::max(width, r.values.size());
  out << "trial_id,class,source";
  for (std::size_t i = 0; i < width; ++i) out << ",f" << i;
  out << '\n';
  char buf[32];
  for (const auto& r : dump.rows) {
    out << r.trial_id << ',' << r.label << ',' << to_string(r.source);
    for (std::size_t i = 0; i < width; ++i) {
      out << ',';
      if (i < r.values.size()) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.values[i]);
        out << buf;
      }
    }
    out << '\n';
  }
}

}  // namespace factoreeg
