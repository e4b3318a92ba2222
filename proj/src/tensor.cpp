#include "lsn/tensor.hpp"

#include <cstdio>
#include <fstream>

namespace lsn {

namespace {

const char kMagic[4] = {'L', 'S', 'N', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_tensor_container(const std::string& path, const ParamStore<float>& tensors,
                           const ContainerMeta* meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xffff)
      throw std::runtime_error("tensor name too long: " + name);
    put_u16(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(4);
    put_u32(os, static_cast<std::uint32_t>(t.shape.n));
    put_u32(os, static_cast<std::uint32_t>(t.shape.c));
    put_u32(os, static_cast<std::uint32_t>(t.shape.h));
    put_u32(os, static_cast<std::uint32_t>(t.shape.w));
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * 4));
  }
  if (meta && meta->present) {
    if (meta->fingerprint.size() != 32)
      throw std::runtime_error("checkpoint fingerprint must be 32 hex chars");
    put_u64(os, meta->iteration);
    os.write(meta->fingerprint.data(), 32);
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

ParamStore<float> load_tensor_container(const std::string& path, ContainerMeta* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path + " for reading");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error(path + ": bad magic, expected LSNT");
  std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw std::runtime_error(path + ": unsupported container version " + std::to_string(version));
  std::uint32_t count = get_u32(is);
  ParamStore<float> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t len = get_u16(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    int ndim = is.get();
    if (ndim != 4)
      throw std::runtime_error(path + ": tensor " + name + " has ndim " +
                               std::to_string(ndim) + ", expected 4");
    Shape s;
    s.n = static_cast<int>(get_u32(is));
    s.c = static_cast<int>(get_u32(is));
    s.h = static_cast<int>(get_u32(is));
    s.w = static_cast<int>(get_u32(is));
    TensorF t(s);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * 4));
    if (!is)
      throw std::runtime_error(path + ": truncated payload at tensor " + name +
                               " (offset " + std::to_string(is.tellg()) + ")");
    out.emplace(std::move(name), std::move(t));
  }
  if (meta) {
    meta->present = false;
    std::uint64_t iter = get_u64(is);
    if (is) {
      std::string fp(32, '\0');
      is.read(fp.data(), 32);
      if (is) {
        meta->present = true;
        meta->iteration = iter;
        meta->fingerprint = fp;
      }
    }
    is.clear();
  }
  return out;
}

}  // namespace lsn
