#include "lfm/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <string>

#include "lfm/errors.hpp"
#include "lfm/ppm.hpp"

namespace lfm {

namespace {

constexpr char kMagic[4] = {'L', 'F', 'M', '1'};
constexpr std::uint32_t kMaxLayers = 64;
constexpr std::uint32_t kMaxRank = 8;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void count(std::size_t v) {
    if (v > 0xffffffffULL) throw DimensionError("checkpoint: value exceeds 32-bit field");
    u32(static_cast<std::uint32_t>(v));
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("checkpoint: " + what + " at byte offset " + std::to_string(pos_));
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated data");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool flag() {
    const std::uint8_t v = u8();
    if (v > 1) fail("boolean field holds " + std::to_string(v));
    return v == 1;
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void write_config(Writer& w, const ModelConfig& cfg) {
  w.count(cfg.npr.window);
  w.count(cfg.npr.anchor_index);
  w.u8(cfg.npr.take_abs ? 1 : 0);

  w.count(cfg.snet.in_channels);
  w.count(cfg.snet.num_conv_layers);
  for (std::size_t c : cfg.snet.channel_plan) w.count(c);
  w.count(cfg.snet.pool_after.size());
  for (std::size_t p : cfg.snet.pool_after) w.count(p);
  w.u8(static_cast<std::uint8_t>(cfg.snet.activation));
  w.u8(cfg.snet.bias ? 1 : 0);

  w.u8(static_cast<std::uint8_t>(cfg.pooling));
  w.count(cfg.tkp.k);
  w.f64(cfg.tkp.p_min);
  w.f64(cfg.tkp.p_max);
  w.u8(cfg.tkp.rbld_enabled ? 1 : 0);
  w.u8(cfg.tkp.rks_enabled ? 1 : 0);

  w.f64(cfg.decision_threshold);
  w.f64(cfg.alpha);
}

ModelConfig read_config(Reader& r) {
  ModelConfig cfg;
  cfg.npr.window = r.u32();
  cfg.npr.anchor_index = r.u32();
  cfg.npr.take_abs = r.flag();

  cfg.snet.in_channels = r.u32();
  const std::uint32_t layers = r.u32();
  if (layers == 0 || layers > kMaxLayers) r.fail("implausible layer count " + std::to_string(layers));
  cfg.snet.num_conv_layers = layers;
  cfg.snet.channel_plan.resize(layers);
  for (std::size_t& c : cfg.snet.channel_plan) c = r.u32();
  const std::uint32_t pools = r.u32();
  if (pools > layers) r.fail("more pooling stages than layers");
  cfg.snet.pool_after.resize(pools);
  for (std::size_t& p : cfg.snet.pool_after) p = r.u32();
  const std::uint8_t activation = r.u8();
  if (activation > static_cast<std::uint8_t>(Activation::identity)) r.fail("unknown activation code");
  cfg.snet.activation = static_cast<Activation>(activation);
  cfg.snet.bias = r.flag();

  const std::uint8_t pooling = r.u8();
  if (pooling > static_cast<std::uint8_t>(Pooling::gmp)) r.fail("unknown pooling code");
  cfg.pooling = static_cast<Pooling>(pooling);
  cfg.tkp.k = r.u32();
  cfg.tkp.p_min = r.f64();
  cfg.tkp.p_max = r.f64();
  cfg.tkp.rbld_enabled = r.flag();
  cfg.tkp.rks_enabled = r.flag();

  cfg.decision_threshold = r.f64();
  cfg.alpha = r.f64();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid model config: ") + e.what());
  }
  return cfg;
}

// Parameter shapes implied by a config, in LfmModel::parameters() order.
std::vector<Shape> expected_shapes(const ModelConfig& cfg) {
  std::vector<Shape> shapes;
  std::size_t cin = cfg.snet.in_channels;
  for (std::size_t l = 0; l < cfg.snet.num_conv_layers; ++l) {
    const std::size_t k = cfg.snet.kernel_size(l);
    const std::size_t cout = cfg.snet.channel_plan[l];
    shapes.push_back({cout, cin, k, k});
    if (cfg.snet.bias) shapes.push_back({cout});
    cin = cout;
  }
  shapes.push_back({1, cfg.feature_width()});
  shapes.push_back({1});
  return shapes;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const LfmModel& model) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  write_config(w, model.config);
  const auto params = model.parameters();
  const auto shapes = expected_shapes(model.config);
  if (shapes.size() != params.size()) throw StateError("checkpoint: model layout mismatch");
  w.count(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = *params[i];
    if (t.shape() != shapes[i]) {
      throw DimensionError("checkpoint: parameter " + std::to_string(i) + " has shape " +
                           shape_to_string(t.shape()) + ", config implies " +
                           shape_to_string(shapes[i]));
    }
    w.count(t.rank());
    for (std::size_t extent : t.shape()) w.count(extent);
    for (double v : t.data()) w.f32(static_cast<float>(v));
  }
  w.u32(crc_of(w.buffer()));
  return std::move(w.buffer());
}

LfmModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("checkpoint: bad magic (expected \"LFM1\") at byte offset 0");
  }
  if (bytes.size() < sizeof(kMagic) + 8) {
    throw ParseError("checkpoint: truncated data at byte offset " + std::to_string(bytes.size()));
  }
  const std::span<const std::uint8_t> body = bytes.first(bytes.size() - 4);
  Reader trailer(bytes.subspan(bytes.size() - 4));
  const std::uint32_t stored_crc = trailer.u32();
  if (stored_crc != crc_of(body)) {
    throw ParseError("checkpoint: checksum mismatch (file truncated or corrupted), trailer at byte offset " +
                     std::to_string(bytes.size() - 4));
  }

  Reader r(body);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  LfmModel model;
  model.config = read_config(r);
  const auto shapes = expected_shapes(model.config);
  const std::uint32_t arrays = r.u32();
  if (arrays != shapes.size()) {
    r.fail("array count " + std::to_string(arrays) + " does not match config (" +
           std::to_string(shapes.size()) + ")");
  }
  std::vector<Tensor> tensors;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > kMaxRank) r.fail("implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (std::size_t& extent : shape) extent = r.u32();
    if (shape != shapes[i]) {
      r.fail("parameter " + std::to_string(i) + " has shape " + shape_to_string(shape) +
             ", config implies " + shape_to_string(shapes[i]));
    }
    const std::size_t n = shape_numel(shape);
    r.need(n * 4);
    std::vector<double> values(n);
    for (double& v : values) v = static_cast<double>(r.f32());
    tensors.emplace_back(shape, std::move(values));
  }
  if (r.remaining() != 0) r.fail("unexpected trailing data");

  std::size_t next = 0;
  for (std::size_t l = 0; l < model.config.snet.num_conv_layers; ++l) {
    ConvLayer layer;
    layer.weight = std::move(tensors[next++]);
    if (model.config.snet.bias) layer.bias = std::move(tensors[next++]);
    model.snet.layers.push_back(std::move(layer));
  }
  model.fc_weight = std::move(tensors[next++]);
  model.fc_bias = std::move(tensors[next++]);
  return model;
}

void save_checkpoint(const LfmModel& model, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(model));
}

LfmModel load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

LfmModel quantize_to_float(const LfmModel& model) {
  LfmModel out = model;
  for (Tensor* t : out.parameters()) {
    for (double& v : t->data()) v = static_cast<double>(static_cast<float>(v));
  }
  return out;
}

}  // namespace lfm
