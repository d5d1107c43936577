#include "slotvid/core/binio.hpp"

#include <cstring>

#include "slotvid/core/tensor.hpp"

namespace slotvid {

BinWriter::BinWriter(const std::string& path)
    : f_(path, std::ios::binary | std::ios::trunc), path_(path) {
  require(f_.good(), "cannot open " + path + " for writing");
}

void BinWriter::bytes(const void* src, size_t n) {
  f_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
  require(f_.good(), "write to " + path_ + " failed at offset " +
                         std::to_string(off_));
  off_ += n;
}

void BinWriter::u8(uint8_t v) { bytes(&v, 1); }

void BinWriter::u16(uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  bytes(b, 2);
}

void BinWriter::u32(uint32_t v) {
  uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
  bytes(b, 4);
}

void BinWriter::u64(uint64_t v) {
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
  bytes(b, 8);
}

void BinWriter::f32(float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  u32(bits);
}

void BinWriter::f64(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  u64(bits);
}

void BinWriter::str(const std::string& s) {
  u32(static_cast<uint32_t>(s.size()));
  if (!s.empty()) bytes(s.data(), s.size());
}

void BinWriter::close() {
  f_.flush();
  require(f_.good(), "flush of " + path_ + " failed");
  f_.close();
}

BinReader::BinReader(const std::string& path)
    : f_(path, std::ios::binary), path_(path) {
  require(f_.good(), "cannot open " + path + " for reading");
}

void BinReader::bytes(void* dst, size_t n) {
  f_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(f_.gcount()) != n)
    fail(path_ + ": truncated at offset " + std::to_string(off_) +
         " (wanted " + std::to_string(n) + " bytes)");
  off_ += n;
}

uint8_t BinReader::u8() {
  uint8_t v;
  bytes(&v, 1);
  return v;
}

uint16_t BinReader::u16() {
  uint8_t b[2];
  bytes(b, 2);
  return static_cast<uint16_t>(b[0] | (static_cast<uint16_t>(b[1]) << 8));
}

uint32_t BinReader::u32() {
  uint8_t b[4];
  bytes(b, 4);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

uint64_t BinReader::u64() {
  uint8_t b[8];
  bytes(b, 8);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

float BinReader::f32() {
  uint32_t bits = u32();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double BinReader::f64() {
  uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string BinReader::str(size_t max_len) {
  uint32_t n = u32();
  if (n > max_len)
    fail(path_ + ": string of " + std::to_string(n) +
         " bytes exceeds limit at offset " + std::to_string(off_ - 4));
  std::string s(n, '\0');
  if (n) bytes(s.data(), n);
  return s;
}

bool BinReader::at_eof() { return f_.peek() == std::ifstream::traits_type::eof(); }

}  // namespace slotvid
