#pragma once

// Flat binary tensor files: magic "VMTN", u32 version, u8 dtype, u8 rank,
// u64 dims[rank], then little-endian payload.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vimonet/core.hpp"

namespace vimonet::io {

enum class DType : std::uint8_t { f32 = 0, f64 = 1, u8 = 2, i32 = 3 };

inline std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::u8: return 1;
    case DType::i32: return 4;
  }
  throw ContractError("unknown dtype");
}

inline constexpr char kTensorMagic[4] = {'V', 'M', 'T', 'N'};
inline constexpr std::uint32_t kTensorVersion = 1;

// Raw little-endian bytes plus shape.
struct RawTensor {
  DType dtype = DType::f64;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> bytes;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  friend bool operator==(const RawTensor&, const RawTensor&) = default;
};

// Byte-order helpers; the in-memory representation is native.
template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

template <class T>
T get_le(const std::uint8_t* p) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

inline RawTensor from_doubles(const double* data, std::size_t n, std::vector<std::uint64_t> dims) {
  RawTensor t{DType::f64, std::move(dims), {}};
  t.bytes.reserve(n * 8);
  for (std::size_t i = 0; i < n; ++i) put_le(t.bytes, data[i]);
  return t;
}

inline std::vector<double> to_doubles(const RawTensor& t) {
  if (t.dtype != DType::f64 && t.dtype != DType::f32) throw CorruptionError("tensor is not floating point");
  const std::size_t n = t.element_count();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = t.dtype == DType::f64 ? get_le<double>(t.bytes.data() + 8 * i)
                                   : static_cast<double>(get_le<float>(t.bytes.data() + 4 * i));
  return out;
}

// Appends header + payload of one tensor (no magic) to `out`.
inline void encode_tensor_body(std::vector<std::uint8_t>& out, const RawTensor& t) {
  if (t.bytes.size() != t.element_count() * dtype_size(t.dtype)) throw ContractError("tensor byte size mismatch");
  if (t.dims.size() > 255) throw ContractError("tensor rank too large");
  out.push_back(static_cast<std::uint8_t>(t.dtype));
  out.push_back(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) put_le<std::uint64_t>(out, d);
  out.insert(out.end(), t.bytes.begin(), t.bytes.end());
}

// Bounds-checked reader over a byte buffer.
class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size, std::string what) : p_(data), n_(size), what_(std::move(what)) {}

  const std::uint8_t* take(std::size_t k) {
    if (k > n_ - off_) throw CorruptionError(what_ + ": truncated");
    const auto* r = p_ + off_;
    off_ += k;
    return r;
  }
  template <class T>
  T read() {
    return get_le<T>(take(sizeof(T)));
  }
  std::string read_string(std::size_t k) {
    const auto* b = take(k);
    return std::string(reinterpret_cast<const char*>(b), k);
  }
  std::size_t offset() const { return off_; }
  std::size_t remaining() const { return n_ - off_; }

  RawTensor read_tensor_body() {
    RawTensor t;
    const auto code = read<std::uint8_t>();
    if (code > 3) throw CorruptionError(what_ + ": unknown dtype code " + std::to_string(code));
    t.dtype = static_cast<DType>(code);
    const auto rank = read<std::uint8_t>();
    std::uint64_t count = 1;
    for (int i = 0; i < rank; ++i) {
      t.dims.push_back(read<std::uint64_t>());
      if (t.dims.back() != 0 && count > (std::uint64_t{1} << 40) / t.dims.back())
        throw CorruptionError(what_ + ": tensor too large");
      count *= t.dims.back();
    }
    const auto bytes = count * dtype_size(t.dtype);
    if (bytes > remaining()) throw CorruptionError(what_ + ": truncated tensor payload");
    const auto* b = take(static_cast<std::size_t>(bytes));
    t.bytes.assign(b, b + bytes);
    return t;
  }

 private:
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t off_ = 0;
  std::string what_;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResolutionError("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::vector<std::uint8_t> encode_tensor_file(const RawTensor& t) {
  std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 4);
  put_le(out, kTensorVersion);
  encode_tensor_body(out, t);
  return out;
}

inline RawTensor decode_tensor_file(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  Reader r(bytes.data(), bytes.size(), what);
  if (std::memcmp(r.take(4), kTensorMagic, 4) != 0) throw CorruptionError(what + ": bad magic");
  if (auto v = r.read<std::uint32_t>(); v != kTensorVersion)
    throw CorruptionError(what + ": unsupported version " + std::to_string(v));
  auto t = r.read_tensor_body();
  if (r.remaining() != 0) throw CorruptionError(what + ": trailing bytes");
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const RawTensor& t) {
  write_file(path, encode_tensor_file(t));
}

inline RawTensor read_tensor(const std::filesystem::path& path) {
  return decode_tensor_file(read_file(path), path.string());
}

// Motion payloads: f64 (F, J, 3).
inline RawTensor motion_tensor(const MotionSequence& m) {
  return from_doubles(m.frames().data(), static_cast<std::size_t>(m.frames().size()),
                      {static_cast<std::uint64_t>(m.frame_count()), static_cast<std::uint64_t>(m.joint_count()), 3});
}

inline MotionSequence motion_from_tensor(const RawTensor& t, double fps) {
  if (t.dims.size() != 3 || t.dims[2] != 3) throw CorruptionError("motion tensor must have shape (F, J, 3)");
  auto values = to_doubles(t);
  const auto F = static_cast<Eigen::Index>(t.dims[0]), J = static_cast<Eigen::Index>(t.dims[1]);
  Mat frames = Eigen::Map<const Mat>(values.data(), F, 3 * J);
  return MotionSequence(std::move(frames), static_cast<int>(J), fps);
}

// Video payloads: u8 (T, H, W, C).
inline RawTensor video_tensor(const VideoClip& v) {
  return {DType::u8,
          {static_cast<std::uint64_t>(v.frame_count()), static_cast<std::uint64_t>(v.height()),
           static_cast<std::uint64_t>(v.width()), static_cast<std::uint64_t>(v.channels())},
          v.pixels()};
}

inline VideoClip video_from_tensor(const RawTensor& t) {
  if (t.dtype != DType::u8 || t.dims.size() != 4) throw CorruptionError("video tensor must be u8 (T, H, W, C)");
  return VideoClip(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), static_cast<int>(t.dims[2]),
                   static_cast<int>(t.dims[3]), t.bytes);
}

}  // namespace vimonet::io
