#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "soilref/core/types.hpp"

namespace soilref::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unit-range channel to byte: round(v * 255), clamped.
std::uint8_t to_byte(double v);
double from_byte(std::uint8_t b);

std::vector<std::uint8_t> encode_ppm(const Image& img);
Image decode_ppm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pgm(const LabelMap& map);
LabelMap decode_pgm(const std::vector<std::uint8_t>& bytes);

/// 24-bit BI_RGB bitmap, bottom-up rows padded to 4 bytes.
std::vector<std::uint8_t> encode_bmp(const Image& img);
Image decode_bmp(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& p, const std::string& text);
std::string read_text(const std::filesystem::path& p);

inline Image load_ppm(const std::filesystem::path& p) { return decode_ppm(read_file(p)); }
inline LabelMap load_pgm(const std::filesystem::path& p) { return decode_pgm(read_file(p)); }
inline void save_ppm(const std::filesystem::path& p, const Image& img) {
  write_file(p, encode_ppm(img));
}
inline void save_pgm(const std::filesystem::path& p, const LabelMap& map) {
  write_file(p, encode_pgm(map));
}
inline void save_bmp(const std::filesystem::path& p, const Image& img) {
  write_file(p, encode_bmp(img));
}

/// Lower-case hex SHA-256 of a byte buffer / file.
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& p);

}  // namespace soilref::io
