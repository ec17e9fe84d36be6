#include "canet/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "canet/errors.hpp"

namespace canet {
namespace {

struct Header {
  int width = 0;
  int height = 0;
  std::size_t payload_offset = 0;
};

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expect_magic(const char* magic) {
    if (bytes_.size() < 2 || bytes_[0] != magic[0] || bytes_[1] != magic[1]) {
      throw ParseError(std::string("expected magic '") + magic + "'", 0);
    }
    pos_ = 2;
  }

  int next_int(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) {
        throw ParseError(std::string(what) + " is out of range", start);
      }
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError(std::string("expected ") + what, start);
    }
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t end_of_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ParseError("expected whitespace after maxval", pos_);
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Header parse_header(std::span<const std::uint8_t> bytes, const char* magic) {
  HeaderReader r(bytes);
  r.expect_magic(magic);
  Header h;
  h.width = r.next_int("width");
  h.height = r.next_int("height");
  const int maxval = r.next_int("maxval");
  if (h.width < 1 || h.height < 1) throw ParseError("zero image extent", 2);
  if (maxval != 255) {
    throw ParseError("maxval must be 255, got " + std::to_string(maxval), 2);
  }
  h.payload_offset = r.end_of_header();
  return h;
}

void check_payload(std::span<const std::uint8_t> bytes, const Header& h,
                   std::size_t expected) {
  const std::size_t actual = bytes.size() - h.payload_offset;
  if (actual < expected) {
    throw ParseError("truncated payload: expected " + std::to_string(expected) +
                         " bytes, got " + std::to_string(actual),
                     bytes.size());
  }
}

std::vector<std::uint8_t> header_bytes(const char* magic, int w, int h) {
  const std::string s = std::string(magic) + "\n" + std::to_string(w) + " " +
                        std::to_string(h) + "\n255\n";
  return {s.begin(), s.end()};
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 3) {
    throw ShapeError("encode_ppm expects (1,3,H,W), got " + s.str());
  }
  auto out = header_bytes("P6", s.w, s.h);
  out.reserve(out.size() + s.numel());
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(0, c, y, x), 0.0, 1.0);
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
      }
    }
  }
  return out;
}

Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  const Header h = parse_header(bytes, "P6");
  check_payload(bytes, h, static_cast<std::size_t>(h.width) * h.height * 3);
  Tensor image(Shape{1, 3, h.height, h.width});
  const std::uint8_t* p = bytes.data() + h.payload_offset;
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      for (int c = 0; c < 3; ++c) image.at(0, c, y, x) = *p++ / 255.0;
    }
  }
  return image;
}

std::vector<std::uint8_t> encode_pgm(const LabelMap& label) {
  if (label.n != 1) throw ShapeError("encode_pgm expects a single label map");
  auto out = header_bytes("P5", label.w, label.h);
  for (int v : label.values) {
    if (v < 0 || v > 255) {
      throw ShapeError("label value " + std::to_string(v) +
                       " does not fit in 8 bits");
    }
    out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

LabelMap decode_pgm(std::span<const std::uint8_t> bytes) {
  const Header h = parse_header(bytes, "P5");
  check_payload(bytes, h, static_cast<std::size_t>(h.width) * h.height);
  LabelMap label(1, h.height, h.width);
  std::copy_n(bytes.data() + h.payload_offset, label.size(),
              label.values.begin());
  return label;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  write_file(path, encode_ppm(image));
}

Tensor read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_ppm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

void write_label(const std::filesystem::path& path, const LabelMap& label) {
  write_file(path, encode_pgm(label));
}

LabelMap read_label(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_pgm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

}  // namespace canet
