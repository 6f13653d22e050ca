#include "lfm/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "lfm/errors.hpp"

namespace lfm {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("ppm: " + what + " at byte offset " + std::to_string(pos_));
  }

  void skip_whitespace_and_comments() {
    while (pos_ < bytes_.size()) {
      const std::uint8_t c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (is_space(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* field) {
    skip_whitespace_and_comments();
    if (pos_ >= bytes_.size()) fail(std::string("truncated header, missing ") + field);
    if (bytes_[pos_] < '0' || bytes_[pos_] > '9') fail(std::string("expected digits for ") + field);
    std::size_t value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (1U << 24)) fail(std::string(field) + " too large");
      ++pos_;
    }
    return value;
  }

  void expect_magic() {
    if (bytes_.size() < 2) fail("truncated magic number");
    if (bytes_[0] != 'P' || bytes_[1] != '6') {
      fail("bad magic number (expected P6)");
    }
    pos_ = 2;
  }

  void expect_single_space() {
    if (pos_ >= bytes_.size()) fail("truncated header after maxval");
    if (!is_space(bytes_[pos_])) fail("expected one whitespace byte after maxval");
    ++pos_;
  }

 private:
  static bool is_space(std::uint8_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  HeaderReader reader(bytes);
  reader.expect_magic();
  const std::size_t width = reader.read_uint("width");
  const std::size_t height = reader.read_uint("height");
  const std::size_t maxval = reader.read_uint("maxval");
  if (width == 0 || height == 0) reader.fail("zero image extent");
  if (maxval != 255) reader.fail("unsupported maxval " + std::to_string(maxval) + " (only 255)");
  reader.expect_single_space();

  const std::size_t start = reader.offset();
  const std::size_t payload = width * height * 3;
  if (bytes.size() - start < payload) {
    throw ParseError("ppm: truncated payload, expected " + std::to_string(payload) +
                     " bytes from byte offset " + std::to_string(start) + ", found " +
                     std::to_string(bytes.size() - start));
  }
  if (bytes.size() - start > payload) {
    throw ParseError("ppm: unexpected trailing data at byte offset " +
                     std::to_string(start + payload));
  }

  Tensor image({3, height, width});
  const std::uint8_t* src = bytes.data() + start;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        image.at(c, y, x) = static_cast<double>(src[(y * width + x) * 3 + c]) / 255.0;
      }
    }
  }
  return image;
}

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  require_rank(image, 3, "encode_ppm");
  if (image.dim(0) != 3) {
    throw DimensionError("encode_ppm: channel axis must be 3, got " + shape_to_string(image.shape()));
  }
  const std::size_t height = image.dim(1);
  const std::size_t width = image.dim(2);
  const std::string header =
      "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + width * height * 3);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = image.at(c, y, x);
        if (!std::isfinite(v)) throw DomainError("encode_ppm: non-finite pixel value");
        const double level = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
        out.push_back(static_cast<std::uint8_t>(level));
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParseError("write to '" + path.string() + "' failed");
}

Tensor load_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_ppm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_ppm(const Tensor& image, const std::filesystem::path& path) {
  write_file_bytes(path, encode_ppm(image));
}

}  // namespace lfm
