#pragma once

#include <string>

#include "mtm/data/trajectory.hpp"

namespace mtm::data {

// MTMD container: little-endian, header {magic "MTMD", version u32,
// length-prefixed UTF-8 JSON manifest}, then one record per trajectory:
// {u32 T, u8 presence bits (rtg|state|action), rewards f32[T], then the
// present modality arrays in (rtg, state, action) order as f32}.
void save_dataset(const TrajectorySet& set, const std::string& path);
TrajectorySet load_dataset(const std::string& path);

// Manifest <-> JSON text (exposed for the harness run manifests and tests).
std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

}  // namespace mtm::data
