#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "../common/binary_io.hpp"
#include "factoreeg/data.hpp"
#include "factoreeg/error.hpp"

namespace factoreeg {

namespace {

constexpr std::string_view kTrialMagic = "EEGT";
constexpr std::size_t kTrialHeaderBytes = 12;

std::string trial_file_name(const EEGTrial& t) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s_%05d.eegt", t.is_resting() ? "rest" : "trial", t.trial_id);
  return buf;
}

}  // namespace

void write_trial_file(const EEGTrial& trial, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.put_bytes(kTrialMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(trial.n_channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(trial.n_samples));
  for (double v : trial.samples) w.put<float>(static_cast<float>(v));
  w.write_file(path);
}

EEGTrial read_trial_file(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  if (r.remaining() < kTrialMagic.size() || r.get_bytes(kTrialMagic.size()) != kTrialMagic) {
    throw MagicMismatchError(path.string() + ": not an EEGT trial file (bad magic)");
  }
  EEGTrial t;
  t.n_channels = r.get<std::uint32_t>();
  t.n_samples = r.get<std::uint32_t>();
  if (t.n_channels == 0 || t.n_samples == 0) {
    throw MalformedHeaderError(path.string() + ": zero channel or sample count in header");
  }
  const std::size_t n = t.n_channels * t.n_samples;
  if (r.remaining() < n * sizeof(float)) {
    throw TruncatedFileError(path.string() + ": header promises " + std::to_string(n) +
                                 " samples (" + std::to_string(kTrialHeaderBytes + n * sizeof(float)) +
                                 " bytes)",
                             r.offset() + r.remaining());
  }
  t.samples.resize(n);
  for (double& v : t.samples) v = static_cast<double>(r.get<float>());
  if (r.remaining() != 0) throw MalformedHeaderError(path.string() + ": trailing bytes after sample data");
  return t;
}

void save_dataset(const EEGDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["name"] = ds.name;
  manifest["sample_rate_hz"] = ds.sample_rate_hz;
  manifest["n_channels"] = ds.n_channels;
  manifest["trial_samples"] = ds.trial_samples;
  manifest["classes"] = ds.class_names;
  auto entries = nlohmann::ordered_json::array();
  auto emit = [&](const EEGTrial& t) {
    const std::string file = trial_file_name(t);
    write_trial_file(t, dir / file);
    nlohmann::ordered_json e;
    e["file"] = file;
    if (t.is_resting()) {
      e["class_index"] = "resting";
    } else {
      e["class_index"] = t.label;
    }
    e["session"] = t.session;
    e["trial_id"] = t.trial_id;
    entries.push_back(std::move(e));
  };
  for (const auto& t : ds.trials) emit(t);
  for (const auto& t : ds.resting) emit(t);
  manifest["trials"] = std::move(entries);

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

EEGDataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open " + manifest_path.string());

  EEGDataset ds;
  try {
    const auto m = nlohmann::json::parse(in);
    ds.name = m.at("name").get<std::string>();
    ds.sample_rate_hz = m.at("sample_rate_hz").get<double>();
    ds.n_channels = m.at("n_channels").get<std::size_t>();
    ds.trial_samples = m.at("trial_samples").get<std::size_t>();
    ds.class_names = m.at("classes").get<std::vector<std::string>>();
    for (const auto& e : m.at("trials")) {
      const auto file = e.at("file").get<std::string>();
      EEGTrial t = read_trial_file(dir / file);
      if (t.n_channels != ds.n_channels || t.n_samples != ds.trial_samples) {
        throw MalformedHeaderError(file + ": header says " + std::to_string(t.n_channels) + "x" +
                                   std::to_string(t.n_samples) + ", manifest says " +
                                   std::to_string(ds.n_channels) + "x" +
                                   std::to_string(ds.trial_samples));
      }
      const auto& label = e.at("class_index");
      if (label.is_string()) {
        if (label.get<std::string>() != "resting") {
          throw MalformedHeaderError(file + ": class_index must be an integer or \"resting\"");
        }
        t.label = kRestingLabel;
      } else {
        t.label = label.get<int>();
      }
      t.session = e.at("session").get<int>();
      t.trial_id = e.at("trial_id").get<int>();
      (t.is_resting() ? ds.resting : ds.trials).push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeaderError(manifest_path.string() + ": " + e.what());
  }
  try {
    ds.validate();
  } catch (const MalformedHeaderError&) {
    throw;
  } catch (const DataError& e) {
    throw MalformedHeaderError(manifest_path.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace factoreeg
