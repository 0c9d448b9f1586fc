#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pickstate/core.hpp"

namespace pickstate {

using Json = nlohmann::json;

// Object keys serialize in sorted order, so every dump is deterministic.

// ---------------------------------------------------------------------------
// Trial files
//
// One JSON document per trial:
//   {"id", "sample_rate_hz", "outcome": "success"|"failure", "event_time_s",
//    "channels": {"force": [[6 floats]...], "pressure": [...],
//                 "flex": [[4 floats]...], "tof": [...]}}
// Preprocessed trials additionally carry "labels" (state codes) and
// "onset_index". Provenance fields "config_digest" and "master_seed" are
// attached when known.
// ---------------------------------------------------------------------------

inline Json trial_to_json(const Trial& trial,
                          const std::vector<PickState>* labels = nullptr,
                          const std::string& config_digest = {},
                          std::optional<std::uint64_t> master_seed = {}) {
  trial.validate();
  const std::size_t t = trial.length();
  Json force = Json::array();
  Json flex = Json::array();
  for (std::size_t i = 0; i < t; ++i) {
    Json frow = Json::array();
    for (int c = 0; c < kGroupSizes[0]; ++c) frow.push_back(trial.channels[c][i]);
    force.push_back(std::move(frow));
    Json xrow = Json::array();
    int flex0 = group_offset(SensorGroup::Flex);
    for (int c = 0; c < kGroupSizes[2]; ++c)
      xrow.push_back(trial.channels[flex0 + c][i]);
    flex.push_back(std::move(xrow));
  }
  Json j;
  j["id"] = trial.id;
  j["sample_rate_hz"] = trial.sample_rate_hz;
  j["outcome"] = std::string(outcome_name(trial.outcome));
  j["event_time_s"] = trial.event_time_s;
  j["channels"]["force"] = std::move(force);
  j["channels"]["pressure"] = trial.channels[group_offset(SensorGroup::Pressure)];
  j["channels"]["flex"] = std::move(flex);
  j["channels"]["tof"] = trial.channels[group_offset(SensorGroup::Tof)];
  if (trial.onset_index >= 0) j["onset_index"] = trial.onset_index;
  if (labels) {
    if (labels->size() != t)
      throw DataError(trial.id + ": labels length does not match series length");
    Json codes = Json::array();
    for (PickState s : *labels) codes.push_back(static_cast<int>(s));
    j["labels"] = std::move(codes);
  }
  if (!config_digest.empty()) j["config_digest"] = config_digest;
  if (master_seed) j["master_seed"] = *master_seed;
  return j;
}

inline Trial trial_from_json(const Json& j,
                             std::vector<PickState>* labels_out = nullptr) {
  Trial trial;
  try {
    trial.id = j.at("id").get<std::string>();
    trial.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    trial.outcome = outcome_from_name(j.at("outcome").get<std::string>());
    trial.event_time_s = j.at("event_time_s").get<double>();
    const Json& ch = j.at("channels");
    const Json& force = ch.at("force");
    const Json& pressure = ch.at("pressure");
    const Json& flex = ch.at("flex");
    const Json& tof = ch.at("tof");
    const std::size_t t = force.size();
    for (auto& series : trial.channels) series.reserve(t);
    for (std::size_t i = 0; i < t; ++i) {
      const Json& frow = force.at(i);
      if (frow.size() != static_cast<std::size_t>(kGroupSizes[0]))
        throw DataError(trial.id + ": force row must have 6 entries");
      for (int c = 0; c < kGroupSizes[0]; ++c)
        trial.channels[c].push_back(frow.at(c).get<double>());
      const Json& xrow = flex.at(i);
      if (xrow.size() != static_cast<std::size_t>(kGroupSizes[2]))
        throw DataError(trial.id + ": flex row must have 4 entries");
      int flex0 = group_offset(SensorGroup::Flex);
      for (int c = 0; c < kGroupSizes[2]; ++c)
        trial.channels[flex0 + c].push_back(xrow.at(c).get<double>());
    }
    trial.channels[group_offset(SensorGroup::Pressure)] =
        pressure.get<std::vector<double>>();
    trial.channels[group_offset(SensorGroup::Tof)] = tof.get<std::vector<double>>();
    if (j.contains("onset_index")) trial.onset_index = j["onset_index"].get<long>();
    if (labels_out) {
      labels_out->clear();
      if (j.contains("labels"))
        for (const auto& code : j["labels"])
          labels_out->push_back(state_from_code(code.get<int>()));
    }
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed trial JSON: ") + e.what());
  }
  trial.validate();
  return trial;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void save_trial(const std::filesystem::path& path, const Trial& trial,
                       const std::vector<PickState>* labels = nullptr,
                       const std::string& config_digest = {},
                       std::optional<std::uint64_t> master_seed = {}) {
  write_text_file(path,
                  trial_to_json(trial, labels, config_digest, master_seed).dump(1) + "\n");
}

inline Trial load_trial(const std::filesystem::path& path,
                        std::vector<PickState>* labels_out = nullptr) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return trial_from_json(j, labels_out);
}

// ---------------------------------------------------------------------------
// Corpus manifest
// ---------------------------------------------------------------------------

struct CorpusManifest {
  std::vector<std::string> trial_ids;
  std::uint64_t master_seed = 0;
  std::string config_digest;
  Json stage;  // stage-specific config echo, e.g. the simulator settings
};

inline void save_manifest(const std::filesystem::path& path,
                          const CorpusManifest& m) {
  Json j;
  j["trial_ids"] = m.trial_ids;
  j["master_seed"] = m.master_seed;
  j["config_digest"] = m.config_digest;
  if (!m.stage.is_null()) j["stage"] = m.stage;
  write_text_file(path, j.dump(1) + "\n");
}

inline CorpusManifest load_manifest(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
    CorpusManifest m;
    m.trial_ids = j.at("trial_ids").get<std::vector<std::string>>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.config_digest = j.at("config_digest").get<std::string>();
    if (j.contains("stage")) m.stage = j["stage"];
    return m;
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

/// Loads all trials named by the directory's manifest, in manifest order.
inline std::vector<LabeledTrial> load_corpus(const std::filesystem::path& dir) {
  CorpusManifest m = load_manifest(dir / "manifest.json");
  std::vector<LabeledTrial> out;
  out.reserve(m.trial_ids.size());
  for (const auto& id : m.trial_ids) {
    LabeledTrial lt;
    lt.trial = load_trial(dir / (id + ".json"), &lt.labels);
    out.push_back(std::move(lt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Window tables
//
// CSV with a leading provenance comment line, then a header row:
//   trial_id,end_time_s,label_code,f0..f{n-1}
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void save_windows_csv(const std::filesystem::path& path,
                             const std::vector<WindowSample>& windows,
                             const std::string& config_digest,
                             std::uint64_t master_seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "# pickstate windows config_digest=" << config_digest
      << " master_seed=" << master_seed << "\n";
  const std::size_t width = windows.empty() ? 0 : windows.front().features.size();
  out << "trial_id,end_time_s,label_code";
  for (std::size_t f = 0; f < width; ++f) out << ",f" << f;
  out << "\n";
  for (const auto& w : windows) {
    if (w.features.size() != width)
      throw DataError("window feature widths differ within one table");
    out << w.trial_id << ',' << format_double(w.end_time_s) << ','
        << static_cast<int>(w.label);
    for (double v : w.features) out << ',' << format_double(v);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<WindowSample> load_windows_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<WindowSample> out;
  std::string line;
  bool header_seen = false;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column names are fixed by the writer
      std::size_t commas = 0;
      for (char c : line)
        if (c == ',') ++commas;
      if (commas < 2) throw IoError(path.string() + ": malformed header");
      width = commas - 2;
      continue;
    }
    WindowSample w;
    std::stringstream ss(line);
    std::string field;
    if (!std::getline(ss, field, ',')) throw IoError(path.string() + ": short row");
    w.trial_id = field;
    if (!std::getline(ss, field, ',')) throw IoError(path.string() + ": short row");
    w.end_time_s = std::stod(field);
    if (!std::getline(ss, field, ',')) throw IoError(path.string() + ": short row");
    w.label = state_from_code(std::stoi(field));
    w.features.reserve(width);
    while (std::getline(ss, field, ',')) w.features.push_back(std::stod(field));
    if (w.features.size() != width)
      throw IoError(path.string() + ": row width does not match header");
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace pickstate
