#pragma once

#include <cstddef>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lfm/model.hpp"
#include "lfm/train.hpp"

namespace lfm {

enum class Command { gen_data, train, eval, infer, bench };

std::string to_string(Command c);

/// Every setting reachable from a config file or command-line flag.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  std::size_t image_size = 64;
  double dither = SynthOptions{}.dither_amplitude;
  std::size_t workers = 0;  // 0 = OpenMP default
  std::size_t bench_batch = 32;
  std::size_t bench_images = 200;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::vector<Command> commands;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;

  bool applies_to(Command c) const;
};

/// Registry in application order (layer count precedes the per-layer lists).
const std::vector<ConfigKey>& config_keys();
std::vector<const ConfigKey*> config_keys_for(Command c);

using Settings = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines, `#` starts a comment. Throws ParseError naming the line.
Settings parse_config_text(const std::string& text, const std::string& source = "config");
Settings read_config_file(const std::string& path);

/// Later entries win. Throws ConfigError for keys not accepted by `command`
/// or unparsable values. Returns the keys that were set.
std::set<std::string> apply_settings(RunConfig& cfg, Command command, const Settings& settings);

/// Effective configuration in the same `key = value` format.
std::string emit_config(const RunConfig& cfg, Command command);

}  // namespace lfm
