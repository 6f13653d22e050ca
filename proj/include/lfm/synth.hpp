#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lfm/rng.hpp"
#include "lfm/tensor.hpp"

namespace lfm {

/// One labelled image: 0 = real, 1 = generated.
struct SampleRecord {
  Tensor image;  // [3 x H x W], values in [0, 1]
  int label = 0;
  std::string source_tag;
};

struct SynthOptions {
  std::size_t window = 2;          // resampling lattice of the fake generator
  double dither_amplitude = 0.06;  // peak offset of the periodic 2x2 dither
};

/// Smooth multi-octave noise images (sum of box-blurred noise fields,
/// rescaled to [0, 1]). Image i draws from `rng.substream(i)`.
std::vector<SampleRecord> gen_real(std::size_t n, std::size_t size, const Rng& rng,
                                   const SynthOptions& opts = {});

/// Down-sample on the window lattice keeping the top-left pixel, replicate it
/// back over the window.
Tensor resample_nearest(const Tensor& image, std::size_t window = 2);

/// Fake counterpart of every real: resample_nearest plus a per-image periodic
/// dither on the window lattice, clamped to [0, 1]. Fake i draws from
/// `rng.substream(i)`.
std::vector<SampleRecord> gen_fake(std::span<const SampleRecord> reals, const Rng& rng,
                                   const SynthOptions& opts = {});

/// n reals followed by their n fakes.
std::vector<SampleRecord> gen_paired(std::size_t n, std::size_t size, const Rng& rng,
                                     const SynthOptions& opts = {});

// Manifest files --------------------------------------------------------------

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory unless absolute
  int label = 0;
  std::string source_tag;
};

struct DatasetManifest {
  std::filesystem::path root;  // directory holding the manifest file
  std::vector<ManifestEntry> entries;

  /// Throws ConfigError for duplicated paths or a missing class.
  void validate() const;
};

/// Tab-separated `path<TAB>label<TAB>source_tag`, one record per LF-terminated line.
DatasetManifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, std::span<const ManifestEntry> entries);

/// Loads every image listed in the manifest.
std::vector<SampleRecord> load_dataset(const DatasetManifest& manifest);

/// Writes PPMs into `dir/<split>/` and the manifest `dir/<split>.tsv`.
DatasetManifest write_dataset(const std::filesystem::path& dir, const std::string& split,
                              std::span<const SampleRecord> samples);

}  // namespace lfm
