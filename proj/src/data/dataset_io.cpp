#include "mtm/data/dataset_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "MTMD container assumes a little-endian host");

namespace mtm::data {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'M', 'T', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;

json stats_to_json(const NormStats& s) {
  json out;
  for (int m = 0; m < kNumModalities; ++m) {
    out[modality_name(m)] = {{"mean", s.mean[m]}, {"std", s.stdev[m]}};
  }
  return out;
}

NormStats stats_from_json(const json& j) {
  NormStats s;
  for (int m = 0; m < kNumModalities; ++m) {
    const auto& jm = j.at(modality_name(m));
    s.mean[m] = jm.at("mean").get<std::vector<double>>();
    s.stdev[m] = jm.at("std").get<std::vector<double>>();
  }
  return s;
}

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error(std::string("load_dataset: truncated file at ") + what);
  return v;
}

void write_f32(std::ostream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_f32(std::istream& in, std::vector<float>& v, std::size_t n, const char* what) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw std::runtime_error(std::string("load_dataset: truncated file at ") + what);
}

}  // namespace

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["version"] = m.version;
  j["env_config"] = m.env_config_json.empty() ? json::object() : json::parse(m.env_config_json);
  j["env_config_hash"] = m.env_config_hash;
  j["state_dim"] = m.state_dim;
  j["action_dim"] = m.action_dim;
  j["split"] = {{"train", m.train_idx}, {"eval", m.eval_idx}};
  j["norm_stats"] = stats_to_json(m.stats);
  j["refs"] = {{"random_ref", m.random_ref}, {"expert_ref", m.expert_ref}};
  return j.dump();
}

DatasetManifest manifest_from_json(const std::string& text) {
  const json j = json::parse(text);
  DatasetManifest m;
  m.version = j.at("version").get<std::uint32_t>();
  m.env_config_json = j.at("env_config").dump();
  m.env_config_hash = j.at("env_config_hash").get<std::string>();
  m.state_dim = j.at("state_dim").get<int>();
  m.action_dim = j.at("action_dim").get<int>();
  m.train_idx = j.at("split").at("train").get<std::vector<std::int64_t>>();
  m.eval_idx = j.at("split").at("eval").get<std::vector<std::int64_t>>();
  m.stats = stats_from_json(j.at("norm_stats"));
  m.random_ref = j.at("refs").at("random_ref").get<double>();
  m.expert_ref = j.at("refs").at("expert_ref").get<double>();
  return m;
}

void save_dataset(const TrajectorySet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  const std::string manifest = manifest_to_json(set.manifest);
  write_pod(out, static_cast<std::uint32_t>(manifest.size()));
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  write_pod(out, static_cast<std::uint32_t>(set.trajs.size()));
  for (const auto& tr : set.trajs) {
    write_pod(out, static_cast<std::uint32_t>(tr.length));
    const std::uint8_t presence = static_cast<std::uint8_t>(
        (tr.has_rtg ? 1 : 0) | (tr.has_states ? 2 : 0) | (tr.has_actions ? 4 : 0));
    write_pod(out, presence);
    write_f32(out, tr.rewards);
    if (tr.has_rtg) write_f32(out, tr.rtg);
    if (tr.has_states) write_f32(out, tr.states);
    if (tr.has_actions) write_f32(out, tr.actions);
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

TrajectorySet load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("load_dataset: bad magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw std::runtime_error("load_dataset: unsupported version " + std::to_string(version));
  }
  const auto mlen = read_pod<std::uint32_t>(in, "manifest length");
  std::string manifest(mlen, '\0');
  in.read(manifest.data(), mlen);
  if (!in) throw std::runtime_error("load_dataset: truncated manifest in " + path);

  TrajectorySet set;
  set.manifest = manifest_from_json(manifest);
  const auto n = read_pod<std::uint32_t>(in, "trajectory count");
  set.trajs.resize(n);
  for (auto& tr : set.trajs) {
    tr.length = static_cast<int>(read_pod<std::uint32_t>(in, "trajectory length"));
    const auto presence = read_pod<std::uint8_t>(in, "presence");
    tr.has_rtg = presence & 1;
    tr.has_states = presence & 2;
    tr.has_actions = presence & 4;
    const std::size_t t = static_cast<std::size_t>(tr.length);
    read_f32(in, tr.rewards, t, "rewards");
    if (tr.has_rtg) read_f32(in, tr.rtg, t, "rtg");
    if (tr.has_states)
      read_f32(in, tr.states, t * static_cast<std::size_t>(set.manifest.state_dim), "states");
    if (tr.has_actions)
      read_f32(in, tr.actions, t * static_cast<std::size_t>(set.manifest.action_dim),
               "actions");
  }
  return set;
}

}  // namespace mtm::data
