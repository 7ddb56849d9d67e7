#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pgff/core/pgnn.hpp"
#include "pgff/error.hpp"

namespace pgff {

// Model file layout (all integers and doubles little-endian):
//
//   "PGNN"                      magic, 4 bytes
//   u32 version                 currently 1
//   u8  direction               0 forward, 1 inverse
//   u8  physics_enabled
//   u32 na, nb, nk
//   f64 sample_time
//   f64 coefficients[3]
//   u64 config_hash
//   u32 R                       regressor length
//   u32 D                       differenced output block (0: none)
//   f64 center[R], half_range[R]
//   u32 K                       number of masked-in entries
//   u32 inputs[K]
//   u32 L                       number of layers (hidden + output)
//   per layer: u32 rows, u32 cols, f64 weights[rows*cols] (row-major), f64 bias[rows]
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  void expect(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DecodeError("truncated model stream", pos_);
  }

 private:
  std::uint64_t get(int n) {
    expect(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_model(const PgnnModel& model) {
  model.validate();
  detail::ByteWriter w;
  w.raw("PGNN", 4);
  w.u32(kModelFormatVersion);
  w.u8(model.direction() == ModelDirection::forward ? 0 : 1);
  w.u8(model.physics_enabled ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(model.orders.na));
  w.u32(static_cast<std::uint32_t>(model.orders.nb));
  w.u32(static_cast<std::uint32_t>(model.orders.nk));
  w.f64(model.physics.sample_time);
  for (int i = 0; i < 3; ++i) w.f64(model.physics.coefficients[i]);
  w.u64(model.config_hash);
  const auto& net = model.network;
  w.u32(static_cast<std::uint32_t>(net.regressor_size()));
  w.u32(static_cast<std::uint32_t>(net.difference_block));
  for (Eigen::Index i = 0; i < net.center.size(); ++i) w.f64(net.center[i]);
  for (Eigen::Index i = 0; i < net.half_range.size(); ++i) w.f64(net.half_range[i]);
  w.u32(static_cast<std::uint32_t>(net.inputs.size()));
  for (auto i : net.inputs) w.u32(static_cast<std::uint32_t>(i));
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    w.u32(static_cast<std::uint32_t>(l.weights.rows()));
    w.u32(static_cast<std::uint32_t>(l.weights.cols()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.f64(l.weights(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.f64(l.bias[r]);
  }
  return w.take();
}

inline PgnnModel deserialize_model(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.expect(4);
  if (std::memcmp(bytes.data(), "PGNN", 4) != 0) throw DecodeError("bad magic", 0);
  for (int i = 0; i < 4; ++i) r.u8();
  const std::size_t version_at = r.offset();
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw DecodeError("unsupported model format version " + std::to_string(version), version_at);
  }
  PgnnModel m;
  const std::size_t dir_at = r.offset();
  const auto dir = r.u8();
  if (dir > 1) throw DecodeError("bad direction flag", dir_at);
  m.physics.direction = dir == 0 ? ModelDirection::forward : ModelDirection::inverse;
  m.physics_enabled = r.u8() != 0;
  m.orders.na = static_cast<int>(r.u32());
  m.orders.nb = static_cast<int>(r.u32());
  m.orders.nk = static_cast<int>(r.u32());
  m.physics.sample_time = r.f64();
  for (int i = 0; i < 3; ++i) m.physics.coefficients[i] = r.f64();
  m.config_hash = r.u64();

  const std::size_t size_at = r.offset();
  const auto n = r.u32();
  if (n != m.orders.size()) throw DecodeError("regressor length disagrees with orders", size_at);
  const auto block = r.u32();
  if (block > n) throw DecodeError("difference block longer than the regressor", r.offset() - 4);
  m.network.difference_block = block;
  r.expect(16ull * n);
  m.network.center.resize(n);
  m.network.half_range.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) m.network.center[i] = r.f64();
  for (std::uint32_t i = 0; i < n; ++i) m.network.half_range[i] = r.f64();
  const auto k = r.u32();
  if (k > n) throw DecodeError("input mask longer than the regressor", r.offset() - 4);
  for (std::uint32_t i = 0; i < k; ++i) m.network.inputs.push_back(r.u32());
  const auto layers = r.u32();
  if (layers > 64) throw DecodeError("implausible layer count", r.offset() - 4);
  for (std::uint32_t i = 0; i < layers; ++i) {
    const auto rows = r.u32();
    const auto cols = r.u32();
    const std::size_t count = static_cast<std::size_t>(rows) * cols + rows;
    r.expect(8 * count);
    DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (std::uint32_t a = 0; a < rows; ++a) {
      for (std::uint32_t b = 0; b < cols; ++b) l.weights(a, b) = r.f64();
    }
    for (std::uint32_t a = 0; a < rows; ++a) l.bias[a] = r.f64();
    m.network.layers.push_back(std::move(l));
  }
  if (!r.at_end()) throw DecodeError("trailing bytes after model", r.offset());
  try {
    m.validate();
  } catch (const ContractError& e) {
    throw DecodeError(std::string("decoded model is invalid: ") + e.what(), r.offset());
  }
  return m;
}

inline void save_model(const PgnnModel& model, const std::string& path) {
  const auto bytes = serialize_model(model);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline PgnnModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open model file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace pgff
