#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

namespace crom {

/// Incremental 64-bit FNV-1a hash over raw little-endian bytes.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001B3ULL;
    }
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void add(T value) {
    bytes(&value, sizeof(T));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void add(std::span<const T> values) {
    add(static_cast<std::uint64_t>(values.size()));
    bytes(values.data(), values.size_bytes());
  }

  template <typename T>
  void add(const std::vector<T>& values) {
    add(std::span<const T>(values));
  }

  void add(std::string_view s) {
    add(static_cast<std::uint64_t>(s.size()));
    bytes(s.data(), s.size());
  }

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

}  // namespace crom
