// SPDX-License-Identifier: Apache-2.0
// Shared vocabulary: error classes, labels, seed derivation,
// little-endian byte streams and key-value files.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seizurekd {

// Values double as CLI exit codes.
enum class ErrorKind : int { usage = 2, io = 3, invariant = 4, numerical = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

struct UsageError : Error {
  UsageError(std::string module, const std::string& m) : Error(ErrorKind::usage, std::move(module), m) {}
};
struct IoError : Error {
  IoError(std::string module, const std::string& m) : Error(ErrorKind::io, std::move(module), m) {}
};
struct InvariantError : Error {
  InvariantError(std::string module, const std::string& m)
      : Error(ErrorKind::invariant, std::move(module), m) {}
};
struct NumericalError : Error {
  NumericalError(std::string module, const std::string& m)
      : Error(ErrorKind::numerical, std::move(module), m) {}
};

// Class index 0 is non-seizure, 1 is seizure; softmax outputs follow this order.
enum class Label : std::uint8_t { non_seizure = 0, seizure = 1 };

inline constexpr std::size_t class_index(Label l) noexcept { return static_cast<std::size_t>(l); }

inline constexpr std::string_view to_string(Label l) noexcept {
  return l == Label::seizure ? "seizure" : "non-seizure";
}

inline constexpr std::size_t kSampleRate = 256;
inline constexpr std::size_t kWindowLength = 768;
inline constexpr std::size_t kWindowOverlap = 100;
inline constexpr std::size_t kNumChannels = 3;

// Channel order used everywhere a fixed-size array of modalities appears.
enum class Modality : std::size_t { ecg = 0, eeg1 = 1, eeg2 = 2 };
inline constexpr std::string_view kChannelNames[kNumChannels] = {"ECG", "EEG1", "EEG2"};

struct WindowOrigin {
  std::string record_id;
  std::size_t start = 0;

  bool operator==(const WindowOrigin&) const = default;
};

// ---------------------------------------------------------------------------
// Seeds. One master seed is expanded per named component with splitmix64, so a
// new component never shifts the stream of an existing one.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                                           std::uint64_t counter = 0) noexcept {
  return splitmix64(splitmix64(master ^ fnv1a(component)) + counter);
}

// ---------------------------------------------------------------------------
// Little-endian byte streams.

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void i16(std::int16_t v) { put(static_cast<std::uint16_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  const std::vector<std::uint8_t>& bytes() const& noexcept { return bytes_; }
  std::vector<std::uint8_t> bytes() && noexcept { return std::move(bytes_); }

 private:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string module)
      : bytes_(bytes), module_(std::move(module)) {}

  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int16_t i16() { return static_cast<std::int16_t>(get<std::uint16_t>()); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  std::string raw(std::size_t n) {
    require(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

 private:
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw IoError(module_, "truncated input at byte " + std::to_string(pos_));
  }
  template <typename U>
  U get() {
    require(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string module_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path, const std::string& module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(module, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes,
                             const std::string& module) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(module, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(module, "short write to '" + path + "'");
}

// ---------------------------------------------------------------------------
// Human-readable `key = value` files. '#' starts a comment; keys may repeat.

class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, const std::string& module) {
    KeyValueFile kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw InvariantError(module, "line " + std::to_string(lineno) + ": expected 'key = value'");
      kv.entries_.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
  }

  static KeyValueFile parse_string(const std::string& text, const std::string& module) {
    std::istringstream in(text);
    return parse(in, module);
  }

  static KeyValueFile load(const std::string& path, const std::string& module) {
    std::ifstream in(path);
    if (!in) throw IoError(module, "cannot open '" + path + "'");
    return parse(in, module);
  }

  bool has(std::string_view key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return true;
    return false;
  }

  // Last occurrence wins for scalar keys.
  const std::string& get(std::string_view key, const std::string& module) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
      if (it->first == key) return it->second;
    throw InvariantError(module, "missing key '" + std::string(key) + "'");
  }

  double get_double(std::string_view key, const std::string& module) const {
    const auto& s = get(key, module);
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InvariantError(module, "key '" + std::string(key) + "' is not a number: '" + s + "'");
    }
  }

  std::vector<std::string> get_all(std::string_view key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
      if (k == key) out.push_back(v);
    return out;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace seizurekd
