#include "soilref/core/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace soilref::io {

std::uint8_t to_byte(double v) {
  const double s = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(s);
}

double from_byte(std::uint8_t b) { return static_cast<double>(b) / 255.0; }

namespace {

struct NetpbmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

// Parses "Px <w> <h> <maxval>" with '#' comments; exactly one whitespace byte
// separates maxval from the raster.
NetpbmHeader parse_netpbm(const std::vector<std::uint8_t>& b, char kind) {
  if (b.size() < 2 || b[0] != 'P' || b[1] != kind) {
    throw FormatError(std::string("netpbm: expected magic P") + kind);
  }
  std::size_t pos = 2;
  auto next_int = [&]() {
    for (;;) {
      while (pos < b.size() && std::isspace(b[pos])) ++pos;
      if (pos < b.size() && b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= b.size() || !std::isdigit(b[pos])) throw FormatError("netpbm: malformed header");
    long v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
      v = v * 10 + (b[pos++] - '0');
      if (v > 1'000'000) throw FormatError("netpbm: header value too large");
    }
    return static_cast<int>(v);
  };
  NetpbmHeader h;
  h.width = next_int();
  h.height = next_int();
  h.maxval = next_int();
  if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError("netpbm: truncated header");
  h.data_offset = pos + 1;
  if (h.width <= 0 || h.height <= 0) throw FormatError("netpbm: empty raster");
  if (h.maxval != 255) throw FormatError("netpbm: only maxval 255 is supported");
  return h;
}

std::vector<std::uint8_t> header_bytes(char kind, int w, int h) {
  const std::string s = std::string("P") + kind + "\n" + std::to_string(w) + " " +
                        std::to_string(h) + "\n255\n";
  return {s.begin(), s.end()};
}

void put_u16(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(x & 0xFF);
  v.push_back((x >> 8) & 0xFF);
}
void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  put_u16(v, x & 0xFFFF);
  put_u16(v, x >> 16);
}
std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}
std::uint16_t get_u16(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  auto out = header_bytes('6', img.width(), img.height());
  out.reserve(out.size() + img.data().size());
  for (double v : img.data()) out.push_back(to_byte(v));
  return out;
}

Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  const auto h = parse_netpbm(bytes, '6');
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height * 3;
  if (bytes.size() < h.data_offset + n) throw FormatError("ppm: truncated raster");
  std::vector<double> rgb(n);
  for (std::size_t i = 0; i < n; ++i) rgb[i] = from_byte(bytes[h.data_offset + i]);
  return Image(h.width, h.height, std::move(rgb));
}

std::vector<std::uint8_t> encode_pgm(const LabelMap& map) {
  auto out = header_bytes('5', map.width(), map.height());
  out.insert(out.end(), map.data().begin(), map.data().end());
  return out;
}

LabelMap decode_pgm(const std::vector<std::uint8_t>& bytes) {
  const auto h = parse_netpbm(bytes, '5');
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() < h.data_offset + n) throw FormatError("pgm: truncated raster");
  std::vector<std::uint8_t> codes(bytes.begin() + h.data_offset,
                                  bytes.begin() + h.data_offset + n);
  try {
    return LabelMap(h.width, h.height, std::move(codes));
  } catch (const ShapeError& e) {
    throw FormatError(std::string("pgm: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_bmp(const Image& img) {
  const int w = img.width();
  const int h = img.height();
  const std::uint32_t row_bytes = (static_cast<std::uint32_t>(w) * 3 + 3) & ~3u;
  const std::uint32_t pixel_bytes = row_bytes * h;
  std::vector<std::uint8_t> out;
  out.reserve(54 + pixel_bytes);
  out.push_back('B');
  out.push_back('M');
  put_u32(out, 54 + pixel_bytes);
  put_u32(out, 0);
  put_u32(out, 54);
  put_u32(out, 40);
  put_u32(out, w);
  put_u32(out, h);
  put_u16(out, 1);
  put_u16(out, 24);
  put_u32(out, 0);  // BI_RGB
  put_u32(out, pixel_bytes);
  put_u32(out, 2835);
  put_u32(out, 2835);
  put_u32(out, 0);
  put_u32(out, 0);
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      out.push_back(to_byte(img.at(y, x, 2)));
      out.push_back(to_byte(img.at(y, x, 1)));
      out.push_back(to_byte(img.at(y, x, 0)));
    }
    for (std::uint32_t p = static_cast<std::uint32_t>(w) * 3; p < row_bytes; ++p) out.push_back(0);
  }
  return out;
}

Image decode_bmp(const std::vector<std::uint8_t>& b) {
  if (b.size() < 54 || b[0] != 'B' || b[1] != 'M') throw FormatError("bmp: bad magic");
  const std::uint32_t offset = get_u32(b, 10);
  const auto w = static_cast<std::int32_t>(get_u32(b, 18));
  const auto h = static_cast<std::int32_t>(get_u32(b, 22));
  if (get_u16(b, 28) != 24 || get_u32(b, 30) != 0) {
    throw FormatError("bmp: only uncompressed 24-bit images are supported");
  }
  if (w <= 0 || h <= 0) throw FormatError("bmp: only bottom-up images are supported");
  const std::uint32_t row_bytes = (static_cast<std::uint32_t>(w) * 3 + 3) & ~3u;
  if (b.size() < offset + static_cast<std::size_t>(row_bytes) * h) {
    throw FormatError("bmp: truncated raster");
  }
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    const std::size_t row = offset + static_cast<std::size_t>(h - 1 - y) * row_bytes;
    for (int x = 0; x < w; ++x) {
      img.set(y, x, 2, from_byte(b[row + x * 3]));
      img.set(y, x, 1, from_byte(b[row + x * 3 + 1]));
      img.set(y, x, 0, from_byte(b[row + x * 3 + 2]));
    }
  }
  return img;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  write_file(p, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const std::filesystem::path& p) {
  const auto bytes = read_file(p);
  return {bytes.begin(), bytes.end()};
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    s.push_back(kHex[digest[i] >> 4]);
    s.push_back(kHex[digest[i] & 0xF]);
  }
  return s;
}

std::string sha256_file(const std::filesystem::path& p) { return sha256_hex(read_file(p)); }

}  // namespace soilref::io
