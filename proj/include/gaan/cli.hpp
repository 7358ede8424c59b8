#pragma once

// `gaan` command-line entry point. Every command reads one JSON config file;
// only --seed and --out (plus GAAN_OUT_DIR / GAAN_NUM_THREADS) override it.
// The effective config, defaults included, is written to <out>/config.json.

#include "gaan/classifier.hpp"
#include "gaan/ggru.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gaan::cli {

using nlohmann::json;

struct NodeRunConfig {
  std::string dataset;
  std::string out_dir = "runs/train-nc";
  std::uint64_t seed = 0;
  std::string precision = "f64";
  NodeTrainConfig train;
  double train_fraction = 0.6;  ///< used when the dataset has no split.bin
  double val_fraction = 0.2;
};

struct ForecastRunConfig {
  std::string dataset;
  std::string out_dir = "runs/train-forecast";
  std::uint64_t seed = 0;
  std::string precision = "f64";
  ForecastTrainConfig train;
  Index window_in = 0;   ///< 0: taken from the dataset
  Index window_out = 0;  ///< 0: taken from the dataset
};

/// Parse a config tree; unknown keys and type mismatches throw ConfigError.
/// Dataset-dependent fields (input width, classes, windows) are resolved later.
NodeRunConfig parse_node_config(const json& j);
ForecastRunConfig parse_forecast_config(const json& j);
json to_json(const NodeRunConfig& c);
json to_json(const ForecastRunConfig& c);

/// Keys present in `input` but absent from `effective`, as dotted paths.
std::vector<std::string> unknown_keys(const json& input, const json& effective);

json read_json_file(const std::filesystem::path& path);

/// Runs one command line (args[0] is the program name). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace gaan::cli
