#pragma once

// On-disk dataset and checkpoint container.
//
// A container is a directory holding `meta.json` (a JSON key-value tree) and
// raw arrays. Every array file is
//
//   8 bytes   magic "GAANARR\0"
//   1 byte    element type (0=u64, 1=f32, 2=f64, 3=u8)
//   8 bytes   element count, u64 little-endian
//   payload   count elements, little-endian
//
// Graph datasets use indptr.bin, indices.bin, features.bin, and optionally
// labels.bin (u64 class ids, or u8 indicators for multi-label), split.bin
// (u8: 0 train, 1 val, 2 test) and signal.bin (f64, time-major T x N x d).

#include "gaan/graph.hpp"
#include "gaan/param_store.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gaan::io {

inline constexpr char kArrayMagic[8] = {'G', 'A', 'A', 'N', 'A', 'R', 'R', '\0'};
inline constexpr int kFormatVersion = 1;

enum class ElementType : std::uint8_t { u64 = 0, f32 = 1, f64 = 2, u8 = 3 };

void write_array(const std::filesystem::path& path, std::span<const std::uint64_t> data);
void write_array(const std::filesystem::path& path, std::span<const double> data);
void write_array(const std::filesystem::path& path, std::span<const std::uint8_t> data);

ElementType peek_array_type(const std::filesystem::path& path);
std::vector<std::uint64_t> read_array_u64(const std::filesystem::path& path);
/// Accepts f32 or f64 payloads.
std::vector<double> read_array_real(const std::filesystem::path& path);
std::vector<std::uint8_t> read_array_u8(const std::filesystem::path& path);

enum class SplitTag : std::uint8_t { train = 0, val = 1, test = 2 };

struct NodeDataset {
  Graph graph;
  Matrix features;
  std::optional<LabelSet> labels;
  std::optional<std::vector<std::uint8_t>> split;
};

NodeDataset load_graph(const std::filesystem::path& dir);
void save_graph(const std::filesystem::path& dir, const NodeDataset& data);

SequenceDataset load_sequence_dataset(const std::filesystem::path& dir);
void save_sequence_dataset(const std::filesystem::path& dir, const SequenceDataset& data);

/// Plain-text fixtures: one "src dst" arc per line, '#' starts a comment.
Graph read_edge_list(const std::filesystem::path& path, Index num_nodes, bool directed);
/// Comma-separated rows of reals, one row per node.
Matrix read_feature_csv(const std::filesystem::path& path);

/// Checkpoint: manifest.json listing (name, rows, cols, dtype, file) plus one
/// array file per tensor and the optimizer step.
void save_checkpoint(const std::filesystem::path& dir, const ParamStore& params);
/// Loads into an existing store; names and shapes must match exactly.
void load_checkpoint(const std::filesystem::path& dir, ParamStore& params);

}  // namespace gaan::io
