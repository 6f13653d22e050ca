#include "lfm/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "lfm/errors.hpp"
#include "lfm/ppm.hpp"

namespace lfm {

namespace {

// Octave box radii and amplitudes; coarse octaves dominate.
constexpr std::size_t kOctaveRadius[] = {1, 2, 4, 8};
constexpr double kOctaveAmplitude[] = {0.35, 0.6, 1.0, 1.4};
constexpr int kBoxPasses = 3;

std::size_t reflect(long i, std::size_t n) {
  const long last = static_cast<long>(n) - 1;
  while (i < 0 || i > last) {
    if (i < 0) i = -i - 1;
    if (i > last) i = 2 * last - i + 1;
  }
  return static_cast<std::size_t>(i);
}

// One box-filter pass along rows then columns, reflecting at borders.
void box_blur(std::vector<double>& field, std::size_t size, std::size_t radius) {
  std::vector<double> tmp(field.size());
  const double norm = 1.0 / static_cast<double>(2 * radius + 1);
  const long r = static_cast<long>(radius);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      double sum = 0.0;
      for (long d = -r; d <= r; ++d) sum += field[y * size + reflect(static_cast<long>(x) + d, size)];
      tmp[y * size + x] = sum * norm;
    }
  }
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      double sum = 0.0;
      for (long d = -r; d <= r; ++d) sum += tmp[reflect(static_cast<long>(y) + d, size) * size + x];
      field[y * size + x] = sum * norm;
    }
  }
}

Tensor smooth_noise_image(std::size_t size, Rng& rng) {
  Tensor image({3, size, size});
  const std::size_t plane = size * size;
  // A luminance field shared by all channels plus a weaker per-channel field.
  std::vector<double> shared(plane, 0.0);
  std::vector<std::vector<double>> own(3, std::vector<double>(plane, 0.0));
  std::vector<double> field(plane);
  for (std::size_t o = 0; o < std::size(kOctaveRadius); ++o) {
    for (int target = -1; target < 3; ++target) {
      for (double& v : field) v = rng.normal();
      for (int p = 0; p < kBoxPasses; ++p) box_blur(field, size, kOctaveRadius[o]);
      std::vector<double>& dst = target < 0 ? shared : own[static_cast<std::size_t>(target)];
      const double amp = kOctaveAmplitude[o] * (target < 0 ? 1.0 : 0.5);
      for (std::size_t i = 0; i < plane; ++i) dst[i] += amp * field[i];
    }
  }
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double v = shared[i] + own[c][i];
      image[c * plane + i] = v;
      if ((c == 0 && i == 0) || v < lo) lo = v;
      if ((c == 0 && i == 0) || v > hi) hi = v;
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (double& v : image.data()) v = std::clamp((v - lo) / span, 0.0, 1.0);
  return image;
}

void check_size(std::size_t size, std::size_t window) {
  if (window < 2) throw ConfigError("synth: window must be >= 2");
  if (size == 0 || size % window != 0) {
    throw ConfigError("synth: image size " + std::to_string(size) +
                      " must be a positive multiple of the window " + std::to_string(window));
  }
}

}  // namespace

std::vector<SampleRecord> gen_real(std::size_t n, std::size_t size, const Rng& rng,
                                   const SynthOptions& opts) {
  if (n < 1) throw ConfigError("gen_real: n must be >= 1");
  check_size(size, opts.window);
  std::vector<SampleRecord> out(n);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    Rng stream = rng.substream(idx);
    out[idx].image = smooth_noise_image(size, stream);
    out[idx].label = 0;
    out[idx].source_tag = "real:smooth-noise";
  }
  return out;
}

Tensor resample_nearest(const Tensor& image, std::size_t window) {
  require_rank(image, 3, "resample_nearest");
  if (window < 1 || image.dim(1) % window != 0 || image.dim(2) % window != 0) {
    throw DimensionError("resample_nearest: height and width must be divisible by " +
                         std::to_string(window) + ", got " + shape_to_string(image.shape()));
  }
  Tensor out(image.shape());
  for (std::size_t c = 0; c < image.dim(0); ++c) {
    for (std::size_t y = 0; y < image.dim(1); ++y) {
      for (std::size_t x = 0; x < image.dim(2); ++x) {
        out.at(c, y, x) = image.at(c, (y / window) * window, (x / window) * window);
      }
    }
  }
  return out;
}

std::vector<SampleRecord> gen_fake(std::span<const SampleRecord> reals, const Rng& rng,
                                   const SynthOptions& opts) {
  if (opts.dither_amplitude < 0.0) throw ConfigError("gen_fake: dither amplitude must be >= 0");
  std::vector<SampleRecord> out(reals.size());
  const std::size_t n = opts.window;
  const long count = static_cast<long>(reals.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const Tensor& real = reals[idx].image;
    Rng stream = rng.substream(idx);
    Tensor fake = resample_nearest(real, n);
    // Periodic offset per (channel, lattice position); the anchor stays put so the
    // residual carries the dither pattern with magnitude in [a/2, a].
    const double a = opts.dither_amplitude;
    std::vector<double> pattern(real.dim(0) * n * n, 0.0);
    for (std::size_t c = 0; c < real.dim(0); ++c) {
      for (std::size_t j = 1; j < n * n; ++j) {
        const double magnitude = a * (0.5 + 0.5 * stream.uniform());
        pattern[c * n * n + j] = stream.uniform() < 0.5 ? -magnitude : magnitude;
      }
    }
    for (std::size_t c = 0; c < fake.dim(0); ++c) {
      for (std::size_t y = 0; y < fake.dim(1); ++y) {
        for (std::size_t x = 0; x < fake.dim(2); ++x) {
          const double d = pattern[c * n * n + (y % n) * n + (x % n)];
          fake.at(c, y, x) = std::clamp(fake.at(c, y, x) + d, 0.0, 1.0);
        }
      }
    }
    out[idx].image = std::move(fake);
    out[idx].label = 1;
    out[idx].source_tag = "fake:nearest-up+dither";
  }
  return out;
}

std::vector<SampleRecord> gen_paired(std::size_t n, std::size_t size, const Rng& rng,
                                     const SynthOptions& opts) {
  std::vector<SampleRecord> out = gen_real(n, size, rng.substream(0), opts);
  std::vector<SampleRecord> fakes = gen_fake(out, rng.substream(1), opts);
  out.insert(out.end(), std::make_move_iterator(fakes.begin()),
             std::make_move_iterator(fakes.end()));
  return out;
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  bool has_real = false;
  bool has_fake = false;
  for (const ManifestEntry& e : entries) {
    if (!seen.insert(e.path).second) throw ConfigError("manifest lists '" + e.path + "' twice");
    has_real |= e.label == 0;
    has_fake |= e.label == 1;
  }
  if (!has_real || !has_fake) throw ConfigError("manifest must contain both real and fake entries");
}

DatasetManifest read_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError("cannot open manifest '" + file.string() + "'");
  DatasetManifest m;
  m.root = file.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = file.string() + ":" + std::to_string(line_no);
    if (line.back() == '\r') throw ParseError(where + ": CR line ending (manifest requires LF)");
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw ParseError(where + ": expected 3 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(where + ": empty path");
    if (fields[1] != "0" && fields[1] != "1") {
      throw ParseError(where + ": label must be 0 or 1, got '" + fields[1] + "'");
    }
    m.entries.push_back({fields[0], fields[1] == "1" ? 1 : 0, fields[2]});
  }
  return m;
}

void write_manifest(const std::filesystem::path& file, std::span<const ManifestEntry> entries) {
  std::ostringstream os;
  for (const ManifestEntry& e : entries) {
    if (e.path.find_first_of("\t\n") != std::string::npos ||
        e.source_tag.find_first_of("\t\n") != std::string::npos) {
      throw ConfigError("manifest fields may not contain tabs or newlines");
    }
    os << e.path << '\t' << e.label << '\t' << e.source_tag << '\n';
  }
  const std::string text = os.str();
  write_file_bytes(file, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<SampleRecord> load_dataset(const DatasetManifest& manifest) {
  std::vector<SampleRecord> out;
  out.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = manifest.root / p;
    out.push_back({load_ppm(p), e.label, e.source_tag});
  }
  return out;
}

DatasetManifest write_dataset(const std::filesystem::path& dir, const std::string& split,
                              std::span<const SampleRecord> samples) {
  std::filesystem::create_directories(dir / split);
  DatasetManifest m;
  m.root = dir;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.ppm", i);
    const std::string rel = split + "/" + (samples[i].label ? "fake_" : "real_") + name;
    save_ppm(samples[i].image, dir / rel);
    m.entries.push_back({rel, samples[i].label, samples[i].source_tag});
  }
  write_manifest(dir / (split + ".tsv"), m.entries);
  return m;
}

}  // namespace lfm
