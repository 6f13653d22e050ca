#include "lfm/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "lfm/errors.hpp"

namespace lfm {

std::string to_string(Command c) {
  switch (c) {
    case Command::gen_data:
      return "gen-data";
    case Command::train:
      return "train";
    case Command::eval:
      return "eval";
    case Command::infer:
      return "infer";
    case Command::bench:
      return "bench";
  }
  return "?";
}

bool ConfigKey::applies_to(Command c) const {
  return std::find(commands.begin(), commands.end(), c) != commands.end();
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

using C = Command;

std::vector<ConfigKey> build_registry() {
  const std::vector<C> gen{C::gen_data};
  const std::vector<C> tr{C::train};
  std::vector<ConfigKey> keys;
  auto add = [&](std::string name, std::string help, std::vector<C> cmds,
                 std::function<void(RunConfig&, const std::string&)> set,
                 std::function<std::string(const RunConfig&)> get) {
    keys.push_back({std::move(name), std::move(help), std::move(cmds), std::move(set), std::move(get)});
  };

  add("seed", "run seed for data generation, initialisation and shuffling",
      {C::gen_data, C::train, C::bench},
      [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64("seed", v); },
      [](const RunConfig& c) { return std::to_string(c.train.seed); });
  add("n_train", "number of training images (even: half real, half fake)", gen,
      [](RunConfig& c, const std::string& v) { c.n_train = parse_size("n_train", v); },
      [](const RunConfig& c) { return std::to_string(c.n_train); });
  add("n_test", "number of test images (even: half real, half fake)", gen,
      [](RunConfig& c, const std::string& v) { c.n_test = parse_size("n_test", v); },
      [](const RunConfig& c) { return std::to_string(c.n_test); });
  add("image_size", "edge length of generated square images", {C::gen_data, C::bench},
      [](RunConfig& c, const std::string& v) { c.image_size = parse_size("image_size", v); },
      [](const RunConfig& c) { return std::to_string(c.image_size); });
  add("dither", "peak amplitude of the periodic dither planted in fakes", gen,
      [](RunConfig& c, const std::string& v) { c.dither = parse_double("dither", v); },
      [](const RunConfig& c) { return fmt(c.dither); });

  add("lr", "Adam learning rate", tr,
      [](RunConfig& c, const std::string& v) { c.train.lr = parse_double("lr", v); },
      [](const RunConfig& c) { return fmt(c.train.lr); });
  add("batch_size", "mini-batch size", tr,
      [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_size("batch_size", v); },
      [](const RunConfig& c) { return std::to_string(c.train.batch_size); });
  add("epochs", "number of passes over the training set", tr,
      [](RunConfig& c, const std::string& v) { c.train.epochs = parse_size("epochs", v); },
      [](const RunConfig& c) { return std::to_string(c.train.epochs); });
  add("beta1", "Adam first-moment decay", tr,
      [](RunConfig& c, const std::string& v) { c.train.beta1 = parse_double("beta1", v); },
      [](const RunConfig& c) { return fmt(c.train.beta1); });
  add("beta2", "Adam second-moment decay", tr,
      [](RunConfig& c, const std::string& v) { c.train.beta2 = parse_double("beta2", v); },
      [](const RunConfig& c) { return fmt(c.train.beta2); });
  add("eps", "Adam denominator epsilon", tr,
      [](RunConfig& c, const std::string& v) { c.train.eps = parse_double("eps", v); },
      [](const RunConfig& c) { return fmt(c.train.eps); });

  add("pooling", "pooling stage: tkp, gap or gmp", tr,
      [](RunConfig& c, const std::string& v) { c.model.pooling = parse_pooling(v); },
      [](const RunConfig& c) { return to_string(c.model.pooling); });
  add("k", "activations kept per channel by top-k pooling", tr,
      [](RunConfig& c, const std::string& v) { c.model.tkp.k = parse_size("k", v); },
      [](const RunConfig& c) { return std::to_string(c.model.tkp.k); });
  add("p_min", "dropout probability of the lowest kept rank", tr,
      [](RunConfig& c, const std::string& v) { c.model.tkp.p_min = parse_double("p_min", v); },
      [](const RunConfig& c) { return fmt(c.model.tkp.p_min); });
  add("p_max", "dropout probability of the highest kept rank", tr,
      [](RunConfig& c, const std::string& v) { c.model.tkp.p_max = parse_double("p_max", v); },
      [](const RunConfig& c) { return fmt(c.model.tkp.p_max); });
  add("rbld", "rank-based linear dropout during training (tkp only)", tr,
      [](RunConfig& c, const std::string& v) { c.model.tkp.rbld_enabled = parse_bool("rbld", v); },
      [](const RunConfig& c) { return fmt(c.model.tkp.rbld_enabled); });
  add("rks", "random-k auxiliary branch during training (tkp only)", tr,
      [](RunConfig& c, const std::string& v) { c.model.tkp.rks_enabled = parse_bool("rks", v); },
      [](const RunConfig& c) { return fmt(c.model.tkp.rks_enabled); });
  add("alpha", "weight of the auxiliary loss", tr,
      [](RunConfig& c, const std::string& v) { c.model.alpha = parse_double("alpha", v); },
      [](const RunConfig& c) { return fmt(c.model.alpha); });
  add("decision_threshold", "probability at or above which an image is called fake",
      {C::train, C::eval, C::infer},
      [](RunConfig& c, const std::string& v) {
        c.model.decision_threshold = parse_double("decision_threshold", v);
      },
      [](const RunConfig& c) { return fmt(c.model.decision_threshold); });

  add("num_conv_layers", "salience network depth (resets channel_plan and pool_after)", tr,
      [](RunConfig& c, const std::string& v) {
        const SNetConfig fresh = SNetConfig::with_layers(parse_size("num_conv_layers", v));
        c.model.snet.num_conv_layers = fresh.num_conv_layers;
        c.model.snet.channel_plan = fresh.channel_plan;
        c.model.snet.pool_after = fresh.pool_after;
      },
      [](const RunConfig& c) { return std::to_string(c.model.snet.num_conv_layers); });
  add("channel_plan", "comma-separated output channels per conv layer, ending in 64", tr,
      [](RunConfig& c, const std::string& v) {
        c.model.snet.channel_plan = parse_list("channel_plan", v);
      },
      [](const RunConfig& c) { return fmt_list(c.model.snet.channel_plan); });
  add("pool_after", "comma-separated 1-based conv layers followed by 2x2 max-pooling", tr,
      [](RunConfig& c, const std::string& v) { c.model.snet.pool_after = parse_list("pool_after", v); },
      [](const RunConfig& c) { return fmt_list(c.model.snet.pool_after); });
  add("activation", "activation between conv layers: relu or identity", tr,
      [](RunConfig& c, const std::string& v) { c.model.snet.activation = parse_activation(v); },
      [](const RunConfig& c) { return to_string(c.model.snet.activation); });
  add("bias", "conv layers carry bias terms", tr,
      [](RunConfig& c, const std::string& v) { c.model.snet.bias = parse_bool("bias", v); },
      [](const RunConfig& c) { return fmt(c.model.snet.bias); });
  add("npr_window", "edge of the residual down-sampling window", tr,
      [](RunConfig& c, const std::string& v) { c.model.npr.window = parse_size("npr_window", v); },
      [](const RunConfig& c) { return std::to_string(c.model.npr.window); });
  add("npr_anchor", "row-major pixel kept in each window", tr,
      [](RunConfig& c, const std::string& v) { c.model.npr.anchor_index = parse_size("npr_anchor", v); },
      [](const RunConfig& c) { return std::to_string(c.model.npr.anchor_index); });
  add("npr_abs", "feed the absolute residual to the salience network", tr,
      [](RunConfig& c, const std::string& v) { c.model.npr.take_abs = parse_bool("npr_abs", v); },
      [](const RunConfig& c) { return fmt(c.model.npr.take_abs); });

  add("workers", "inference/training threads (0 = default; env LFM_WORKERS)",
      {C::train, C::eval, C::bench},
      [](RunConfig& c, const std::string& v) { c.workers = parse_size("workers", v); },
      [](const RunConfig& c) { return std::to_string(c.workers); });
  add("bench_batch", "images per scheduling chunk in bench", {C::bench},
      [](RunConfig& c, const std::string& v) { c.bench_batch = parse_size("bench_batch", v); },
      [](const RunConfig& c) { return std::to_string(c.bench_batch); });
  add("bench_images", "synthetic images timed when no manifest is given", {C::bench},
      [](RunConfig& c, const std::string& v) { c.bench_images = parse_size("bench_images", v); },
      [](const RunConfig& c) { return std::to_string(c.bench_images); });
  return keys;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_registry();
  return keys;
}

std::vector<const ConfigKey*> config_keys_for(Command c) {
  std::vector<const ConfigKey*> out;
  for (const ConfigKey& k : config_keys()) {
    if (k.applies_to(c)) out.push_back(&k);
  }
  return out;
}

Settings parse_config_text(const std::string& text, const std::string& source) {
  Settings out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(source + ":" + std::to_string(line_no) + ": empty key");
    out.emplace_back(key, value);
  }
  return out;
}

Settings read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::set<std::string> apply_settings(RunConfig& cfg, Command command, const Settings& settings) {
  std::map<std::string, std::string> latest;
  for (const auto& [key, value] : settings) {
    const auto& keys = config_keys();
    const auto it = std::find_if(keys.begin(), keys.end(),
                                 [&](const ConfigKey& k) { return k.name == key; });
    if (it == keys.end() || !it->applies_to(command)) {
      throw ConfigError("unknown key '" + key + "' for " + to_string(command));
    }
    latest[key] = value;
  }
  std::set<std::string> applied;
  for (const ConfigKey& k : config_keys()) {
    const auto it = latest.find(k.name);
    if (it == latest.end()) continue;
    k.set(cfg, it->second);
    applied.insert(k.name);
  }
  return applied;
}

std::string emit_config(const RunConfig& cfg, Command command) {
  std::string out = "# effective " + to_string(command) + " configuration\n";
  for (const ConfigKey* k : config_keys_for(command)) {
    out += k->name + " = " + k->get(cfg) + "\n";
  }
  return out;
}

}  // namespace lfm
