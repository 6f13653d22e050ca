#include "lfm/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <vector>

#include "lfm/checkpoint.hpp"
#include "lfm/config.hpp"
#include "lfm/errors.hpp"
#include "lfm/eval.hpp"
#include "lfm/ppm.hpp"
#include "lfm/synth.hpp"
#include "lfm/train.hpp"

namespace lfm::cli {

namespace fs = std::filesystem;

namespace {

std::string flag_name(const std::string& key) {
  std::string out = key;
  for (char& c : out) {
    if (c == '_') c = '-';
  }
  return "--" + out;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw ParseError("write to '" + path.string() + "' failed");
}

std::size_t env_workers() {
  const char* v = std::getenv("LFM_WORKERS");
  if (v == nullptr || *v == '\0') return 0;
  std::size_t n = 0;
  const std::string s(v);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("LFM_WORKERS must be a non-negative integer, got '" + s + "'");
  }
  return n;
}

// Options shared by every subcommand: a config file, one flag per accepted key,
// and a switch that prints the effective configuration.
struct Subcommand {
  Command command;
  CLI::App* app = nullptr;
  std::string config_path;
  bool dump_config = false;
  std::map<std::string, std::string> flag_values;
};

void register_keys(Subcommand& sub) {
  sub.app->add_option("--config", sub.config_path, "plain-text key = value configuration file");
  sub.app->add_flag("--dump-config", sub.dump_config,
                    "print the effective configuration in config-file format and exit");
  for (const ConfigKey* key : config_keys_for(sub.command)) {
    sub.app->add_option(flag_name(key->name), sub.flag_values[key->name],
                        key->help + " [config key: " + key->name + "]");
  }
}

struct Resolved {
  RunConfig cfg;
  std::set<std::string> explicit_keys;
};

Resolved resolve(const Subcommand& sub) {
  Resolved r;
  r.cfg.workers = env_workers();
  Settings settings;
  if (!sub.config_path.empty()) settings = read_config_file(sub.config_path);
  for (const ConfigKey* key : config_keys_for(sub.command)) {
    if (sub.app->count(flag_name(key->name)) > 0) {
      settings.emplace_back(key->name, sub.flag_values.at(key->name));
    }
  }
  r.explicit_keys = apply_settings(r.cfg, sub.command, settings);
  r.cfg.model.validate();
  r.cfg.train.validate();
  if (r.cfg.workers > 0) omp_set_num_threads(static_cast<int>(r.cfg.workers));
  return r;
}

int cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  if (cfg.n_train < 2 || cfg.n_train % 2 != 0 || cfg.n_test < 2 || cfg.n_test % 2 != 0) {
    throw ConfigError("n_train and n_test must be even and >= 2 (balanced real/fake)");
  }
  SynthOptions opts;
  opts.dither_amplitude = cfg.dither;
  const Rng root(cfg.train.seed);
  const auto train_set = gen_paired(cfg.n_train / 2, cfg.image_size, root.substream(0), opts);
  const auto test_set = gen_paired(cfg.n_test / 2, cfg.image_size, root.substream(1), opts);
  write_dataset(out_dir, "train", train_set);
  write_dataset(out_dir, "test", test_set);
  out << "wrote " << train_set.size() << " training and " << test_set.size()
      << " test images to " << out_dir.string() << "\n";
  return kExitOk;
}

std::vector<SampleRecord> load_manifest_samples(const fs::path& manifest_path) {
  DatasetManifest manifest = read_manifest(manifest_path);
  manifest.validate();
  return load_dataset(manifest);
}

int cmd_train(const RunConfig& cfg, const fs::path& manifest_path, const fs::path& out_dir,
              std::ostream& out) {
  const auto data = load_manifest_samples(manifest_path);
  fs::create_directories(out_dir);
  write_text(out_dir / "config.txt", emit_config(cfg, Command::train));
  LfmModel model = init_model(cfg.model, cfg.train.seed);
  out << "training " << total_param_count(model) << " parameters on " << data.size()
      << " images\n";
  const TrainResult result = train(std::move(model), data, cfg.train, [&](const EpochStats& s) {
    out << "epoch " << s.epoch << "\tloss " << shortest(s.mean_total) << "\n";
  });
  std::string curve = "epoch\tmean_total\tmean_loss_a\tmean_loss_b\n";
  for (const EpochStats& s : result.curve) {
    curve += std::to_string(s.epoch) + "\t" + shortest(s.mean_total) + "\t" +
             shortest(s.mean_loss_a) + "\t" + shortest(s.mean_loss_b) + "\n";
  }
  write_text(out_dir / "loss_curve.tsv", curve);
  save_checkpoint(result.final_model, out_dir / "last.ckpt");
  save_checkpoint(result.best_model, out_dir / "best.ckpt");
  out << "best epoch " << result.best_epoch << "; checkpoints in " << out_dir.string() << "\n";
  return kExitOk;
}

LfmModel load_model(const fs::path& path, const Resolved& r) {
  LfmModel model = load_checkpoint(path);
  if (r.explicit_keys.count("decision_threshold")) {
    model.config.decision_threshold = r.cfg.model.decision_threshold;
  }
  return model;
}

int cmd_eval(const Resolved& r, const fs::path& ckpt, const fs::path& manifest_path,
             const std::string& out_path, bool timing, std::ostream& out) {
  const LfmModel model = load_model(ckpt, r);
  const auto data = load_manifest_samples(manifest_path);
  const EvalReport report = evaluate(model, data, r.cfg.workers, timing);
  const std::string json = to_json(report);
  if (out_path.empty()) {
    out << json;
  } else {
    write_text(out_path, json);
  }
  return kExitOk;
}

int cmd_infer(const Resolved& r, const fs::path& ckpt, const std::vector<std::string>& images,
              std::ostream& out) {
  const LfmModel model = load_model(ckpt, r);
  for (const std::string& path : images) {
    const Inference inf = infer(load_ppm(path), model);
    out << path << '\t' << shortest(inf.probability) << '\t' << inf.label << '\n';
  }
  return kExitOk;
}

int cmd_bench(const Resolved& r, const fs::path& ckpt, const std::string& manifest_path,
              std::ostream& out) {
  const LfmModel model = load_model(ckpt, r);
  std::vector<Tensor> images;
  if (!manifest_path.empty()) {
    for (SampleRecord& s : load_manifest_samples(manifest_path)) images.push_back(std::move(s.image));
  } else {
    if (r.cfg.bench_images < 1) throw ConfigError("bench_images must be >= 1");
    for (SampleRecord& s : gen_real(r.cfg.bench_images, r.cfg.image_size, Rng(r.cfg.train.seed))) {
      images.push_back(std::move(s.image));
    }
  }
  const BenchReport report = bench(model, images, r.cfg.bench_batch, r.cfg.workers);
  out << to_json(report);
  return kExitOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Local-focus deepfake detector: data generation, training, evaluation, inference"};
  app.name("lfm");
  app.require_subcommand(1);

  std::vector<std::unique_ptr<Subcommand>> subs;
  auto make = [&](Command c, const std::string& description) -> Subcommand& {
    auto sub = std::make_unique<Subcommand>();
    sub->command = c;
    sub->app = app.add_subcommand(to_string(c), description);
    register_keys(*sub);
    subs.push_back(std::move(sub));
    return *subs.back();
  };

  std::string out_dir;
  std::string manifest;
  std::string checkpoint;
  std::string report_path;
  bool timing = false;
  std::vector<std::string> images;

  Subcommand& gen = make(Command::gen_data, "write a synthetic real/fake PPM dataset and manifests");
  gen.app->add_option("--out", out_dir, "output directory")->required();

  Subcommand& tr = make(Command::train, "train a detector on a manifest");
  tr.app->add_option("--manifest", manifest, "training manifest (.tsv)")->required();
  tr.app->add_option("--out", out_dir, "directory for checkpoints and the loss curve")->required();

  Subcommand& ev = make(Command::eval, "score a manifest and write an evaluation report");
  ev.app->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev.app->add_option("--manifest", manifest, "evaluation manifest (.tsv)")->required();
  ev.app->add_option("--out", report_path, "report path (default: standard output)");
  ev.app->add_flag("--timing", timing, "measure images_per_second (makes the report time-dependent)");

  Subcommand& in = make(Command::infer, "classify PPM images");
  in.app->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  in.app->add_option("images", images, "PPM files")->required();

  Subcommand& be = make(Command::bench, "measure inference throughput");
  be.app->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  be.app->add_option("--manifest", manifest, "images to time (default: synthetic images)");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    // Help for the deepest subcommand that was named.
    const CLI::App* target = &app;
    for (const auto& s : subs) {
      if (s->app->parsed()) target = s->app;
    }
    out << target->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* target = &app;
    for (const auto& s : subs) {
      if (s->app->parsed()) target = s->app;
    }
    err << target->help();
    return kExitUsage;
  }

  const Subcommand* active = nullptr;
  for (const auto& s : subs) {
    if (s->app->parsed()) active = s.get();
  }
  if (active == nullptr) {
    err << app.help();
    return kExitUsage;
  }

  Resolved resolved;
  try {
    resolved = resolve(*active);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (active->dump_config) {
    out << emit_config(resolved.cfg, active->command);
    return kExitOk;
  }

  try {
    switch (active->command) {
      case Command::gen_data:
        return cmd_gen_data(resolved.cfg, out_dir, out);
      case Command::train:
        return cmd_train(resolved.cfg, manifest, out_dir, out);
      case Command::eval:
        return cmd_eval(resolved, checkpoint, manifest, report_path, timing, out);
      case Command::infer:
        return cmd_infer(resolved, checkpoint, images, out);
      case Command::bench:
        return cmd_bench(resolved, checkpoint, manifest, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace lfm::cli
