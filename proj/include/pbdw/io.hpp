// SPDX-License-Identifier: Apache-2.0
//
// Plain-text persistence: observation CSVs, dense matrices as CSV, fitted
// affine maps and partitioned models as directories of JSON and CSV files.
#pragma once

#include "pbdw/affine_map.hpp"
#include "pbdw/piecewise.hpp"
#include "pbdw/sensing.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace pbdw {

/// Shortest round-trip decimal form of a double.
std::string format_number(double value);

/// Reads raw sensor values from a CSV with header `sensor_id,value` (one
/// observation) or `sample,sensor_id,value` (several). Every sample must list
/// each sensor id 0..m-1 exactly once. Errors name the file and line.
std::vector<Observation> ingest_observations(const std::filesystem::path& path, const MeasurementSystem& system);

void export_observations(const std::filesystem::path& path, const std::vector<Observation>& observations);

/// First line `# matrix <rows> <cols>`, then one CSV row per matrix row.
void write_matrix(const std::filesystem::path& path, const Mat& matrix);
Mat read_matrix(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

/// map.json, z.csv, b.csv and complement.csv inside `dir`.
void save_affine_map(const std::filesystem::path& dir, const AffineRecoveryMap& map, std::uint64_t system_hash);
AffineRecoveryMap load_affine_map(const std::filesystem::path& dir, std::uint64_t system_hash);

/// partition.json plus cell_<k>_anchor.csv and cell_<k>_basis.csv inside `dir`.
void save_partition(const std::filesystem::path& dir, const PartitionedModel& pm, std::uint64_t system_hash);
PartitionedModel load_partition(const std::filesystem::path& dir, const MeasurementSystem& system,
                                std::uint64_t system_hash);

/// Files written by save_affine_map / save_partition, relative to their directory.
std::vector<std::string> affine_map_files();
std::vector<std::string> partition_files(const PartitionedModel& pm);

}  // namespace pbdw
