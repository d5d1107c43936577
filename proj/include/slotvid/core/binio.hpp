#pragma once

#include <cstdint>
#include <fstream>
#include <string>

namespace slotvid {

// Little-endian binary file writer that tracks its offset for error reports.
class BinWriter {
 public:
  explicit BinWriter(const std::string& path);

  void u8(uint8_t v);
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(const void* src, size_t n);
  void str(const std::string& s);  // u32 length + raw bytes

  uint64_t offset() const { return off_; }
  void close();

 private:
  std::ofstream f_;
  std::string path_;
  uint64_t off_ = 0;
};

// Little-endian binary reader; short reads raise errors naming the offset.
class BinReader {
 public:
  explicit BinReader(const std::string& path);

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  float f32();
  double f64();
  void bytes(void* dst, size_t n);
  std::string str(size_t max_len = 1 << 20);

  uint64_t offset() const { return off_; }
  bool at_eof();

 private:
  std::ifstream f_;
  std::string path_;
  uint64_t off_ = 0;
};

}  // namespace slotvid
