#include <cstring>

#include "slotvid/core/binio.hpp"
#include "slotvid/model/checkpoint.hpp"

namespace slotvid {

namespace {
constexpr char kMagic[17] = "SLOTVID.CKPT.v01";  // 16 bytes on disk
constexpr uint32_t kVersion = 1;
constexpr uint32_t kMaxName = 256;
constexpr uint8_t kDtypeF64 = 0;
constexpr uint8_t kMaxNdim = 8;
}  // namespace

Real Checkpoint::meta_value(const std::string& name) const {
  for (const auto& [n, v] : meta)
    if (n == name) return v;
  fail("checkpoint is missing metadata entry '" + name + "'");
}

bool Checkpoint::has_meta(const std::string& name) const {
  for (const auto& [n, v] : meta)
    if (n == name) return true;
  return false;
}

const Tensor* Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  BinWriter w(path);
  w.bytes(kMagic, 16);
  w.u32(kVersion);
  w.u32(static_cast<uint32_t>(ckpt.meta.size()));
  for (const auto& [name, value] : ckpt.meta) {
    w.str(name);
    w.f64(value);
  }
  w.u32(static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.str(name);
    w.u8(kDtypeF64);
    w.u8(static_cast<uint8_t>(t.dim()));
    for (int64_t d = 0; d < t.dim(); ++d)
      w.u64(static_cast<uint64_t>(t.size(d)));
    for (Real v : t.data()) w.f64(v);
  }
  w.close();
}

Checkpoint load_checkpoint(const std::string& path) {
  BinReader r(path);
  char magic[16];
  r.bytes(magic, 16);
  if (std::memcmp(magic, kMagic, 16) != 0)
    fail(path + ": bad checkpoint magic at offset 0");
  const uint32_t version = r.u32();
  if (version != kVersion)
    fail(path + ": unsupported checkpoint version " +
         std::to_string(version));
  Checkpoint ckpt;
  const uint32_t n_meta = r.u32();
  ckpt.meta.reserve(n_meta);
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string name = r.str(kMaxName);
    const Real value = r.f64();
    ckpt.meta.emplace_back(std::move(name), value);
  }
  const uint32_t n_tensors = r.u32();
  ckpt.tensors.reserve(n_tensors);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str(kMaxName);
    const uint8_t dtype = r.u8();
    if (dtype != kDtypeF64)
      fail(path + ": tensor '" + name + "' has unsupported dtype tag " +
           std::to_string(dtype));
    const uint8_t ndim = r.u8();
    if (ndim == 0 || ndim > kMaxNdim)
      fail(path + ": tensor '" + name + "' has implausible rank " +
           std::to_string(ndim));
    std::vector<int64_t> dims(ndim);
    int64_t numel = 1;
    for (auto& d : dims) {
      const uint64_t raw = r.u64();
      if (raw == 0 || raw > (1ull << 32))
        fail(path + ": tensor '" + name + "' has implausible dimension " +
             std::to_string(raw));
      d = static_cast<int64_t>(raw);
      numel *= d;
    }
    Tensor t = Tensor::zeros(dims, false);
    for (int64_t j = 0; j < numel; ++j) t.data()[static_cast<size_t>(j)] = r.f64();
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.at_eof())
    fail(path + ": trailing bytes after checkpoint payload at offset " +
         std::to_string(r.offset()));
  return ckpt;
}

}  // namespace slotvid
