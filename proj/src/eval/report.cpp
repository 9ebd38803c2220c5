#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "factoreeg/error.hpp"
#include "factoreeg/eval.hpp"

namespace factoreeg {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kOrthoMetric =
    "normalized Frobenius overlap ||Zc^T Zs||_F / (||Zc||_F ||Zs||_F) of each test crop's F x T feature maps, averaged";

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

std::string cv_report_json(const CVReport& r) {
  Json j;
  j["dataset"] = r.dataset;
  j["mode"] = to_string(r.mode);
  j["lambda"] = r.lambda;
  auto folds = Json::array();
  for (std::size_t i = 0; i < r.fold_accuracy.size(); ++i) {
    Json f;
    f["fold"] = i;
    f["accuracy"] = r.fold_accuracy[i];
    const auto& oi = i < r.fold_ortho_index.size() ? r.fold_ortho_index[i] : std::nullopt;
    f["ortho_index"] = oi ? Json(*oi) : Json(nullptr);
    if (i < r.checkpoint_paths.size()) f["checkpoint"] = r.checkpoint_paths[i].generic_string();
    folds.push_back(std::move(f));
  }
  j["folds"] = std::move(folds);
  j["mean"] = r.mean;
  j["std"] = r.std;
  j["ortho_metric"] = kOrthoMetric;
  return j.dump(2) + "\n";
}

CVReport parse_cv_report_json(const std::string& text) {
  CVReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.dataset = j.at("dataset").get<std::string>();
    r.mode = parse_arm(j.at("mode").get<std::string>());
    r.lambda = j.at("lambda").get<double>();
    for (const auto& f : j.at("folds")) {
      r.fold_accuracy.push_back(f.at("accuracy").get<double>());
      const auto& oi = f.at("ortho_index");
      r.fold_ortho_index.push_back(oi.is_null() ? std::nullopt : std::optional<double>(oi.get<double>()));
      r.checkpoint_paths.emplace_back(f.contains("checkpoint") ? f["checkpoint"].get<std::string>() : "");
    }
    r.mean = j.at("mean").get<double>();
    r.std = j.at("std").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeaderError(std::string("CV report: ") + e.what());
  }
  return r;
}

std::string cv_report_csv(const CVReport& r) {
  std::ostringstream out;
  out << "fold,test_accuracy\n";
  for (std::size_t i = 0; i < r.fold_accuracy.size(); ++i) {
    out << i << ',' << fmt("%.17g", r.fold_accuracy[i]) << '\n';
  }
  return out.str();
}

std::string render_report_table(const CVReport& r) {
  std::ostringstream out;
  out << "dataset: " << r.dataset << "\n";
  out << "mode:    " << to_string(r.mode) << "    lambda: " << fmt("%g", r.lambda) << "\n\n";
  char line[128];
  std::snprintf(line, sizeof(line), "%-6s %10s %12s\n", "fold", "accuracy", "ortho_index");
  out << line;
  for (std::size_t i = 0; i < r.fold_accuracy.size(); ++i) {
    const auto& oi = i < r.fold_ortho_index.size() ? r.fold_ortho_index[i] : std::nullopt;
    const std::string ortho = oi ? fmt("%.4f", *oi) : "-";
    std::snprintf(line, sizeof(line), "%-6zu %10.4f %12s\n", i, r.fold_accuracy[i], ortho.c_str());
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-6s %10.4f\n%-6s %10.4f\n", "mean", r.mean, "std", r.std);
  out << line;
  out << "\northo_index: " << kOrthoMetric << "\n";
  return out.str();
}

std::string run_log_header_line(const NetConfig& net, const TrainConfig& cfg) {
  Json j;
  j["event"] = "config";
  j["n_eeg_channels"] = net.n_eeg_channels;
  j["n_timesamples"] = net.n_timesamples;
  j["n_classes"] = net.n_classes;
  j["feature_shape"] = {net.n_feature_maps, net.feature_time()};
  j["classifier_widths"] = net.classifier_widths();
  j["discriminator_widths"] = net.discriminator_widths();
  j["note"] =
      "discriminator consumes one F x T feature map, so its first layer width is F*T = " +
      std::to_string(net.feature_size()) +
      "; the classifier consumes the time-concatenated pair, 2*F*T = " +
      std::to_string(2 * net.feature_size()) +
      ". A discriminator input of 2*F*T is not used.";
  j["mode"] = to_string(cfg.arm);
  j["lambda"] = cfg.lambda;
  j["epochs"] = cfg.epochs;
  j["checkpoint_after_epoch"] = cfg.checkpoint_after_epoch;
  j["lr"] = cfg.lr;
  j["weight_decay"] = cfg.weight_decay;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  return j.dump();
}

std::string epoch_log_line(const EpochLog& e) {
  Json j;
  j["fold"] = e.fold;
  j["epoch"] = e.epoch;
  j["l_cls"] = e.losses.l_cls;
  j["l_adv_d"] = e.losses.l_adv_d;
  j["l_adv_fc"] = e.losses.l_adv_fc;
  j["l_diff"] = e.losses.l_diff;
  j["l_all"] = e.losses.l_all;
  j["val_loss"] = e.val_loss;
  return j.dump();
}

}  // namespace factoreeg
