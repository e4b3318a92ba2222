#pragma once

// Dense 4-D tensor in batch/channel/height/width row-major order.
// Float tensors are the training currency; double tensors back the
// gradient-verification and span-analysis paths.

#include <cstdint>
#include <cstring>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lsn {

struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  std::int64_t count() const {
    return static_cast<std::int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" +
           std::to_string(h) + "x" + std::to_string(w);
  }
};

template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), data(checked_size(s), T(0)) {}
  static size_t checked_size(Shape s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
      throw std::invalid_argument("tensor dims must be non-negative, got " + s.str());
    return static_cast<size_t>(s.count());
  }

  Tensor(Shape s, std::vector<T> d) : shape(s), data(std::move(d)) {
    if (static_cast<std::int64_t>(data.size()) != s.count())
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + s.str());
  }

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, T v) {
    Tensor t(s);
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  T& at(int n, int c, int h, int w) {
    return data[((static_cast<std::int64_t>(n) * shape.c + c) * shape.h + h) * shape.w + w];
  }
  T at(int n, int c, int h, int w) const {
    return data[((static_cast<std::int64_t>(n) * shape.c + c) * shape.h + h) * shape.w + w];
  }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  std::int64_t count() const { return shape.count(); }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::int64_t i = 0; i < count(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Ordered named-parameter table. Deterministic iteration order matters for
// reproducible optimizer sweeps and serialization.
template <class T>
using ParamStore = std::map<std::string, Tensor<T>>;

// --- tensor container file -------------------------------------------------
//
// magic "LSNT", version u32 LE, tensor count u32 LE, then per tensor:
// name length u16, UTF-8 name, ndim u8 (always 4), four u32 dims,
// raw 32-bit little-endian floats row-major. An optional trailing metadata
// record carries (iteration u64, 32 hex chars) for checkpoints.

struct ContainerMeta {
  bool present = false;
  std::uint64_t iteration = 0;
  std::string fingerprint;  // 32 hex chars
};

void save_tensor_container(const std::string& path, const ParamStore<float>& tensors,
                           const ContainerMeta* meta = nullptr);
ParamStore<float> load_tensor_container(const std::string& path, ContainerMeta* meta = nullptr);

}  // namespace lsn
