#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace finharness {

/// Base class for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FileNotFoundError : public IoError {
 public:
  explicit FileNotFoundError(const std::filesystem::path& path)
      : IoError("file not found: " + path.string()), path_(path) {}
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// Selects the serial reference loop or the OpenMP loop in batch kernels.
/// Both produce bit-identical results; reductions always run in item order.
enum class Execution { Serial, Parallel };

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// 64-bit FNV-1a; used for cheap deterministic bucketing, never for integrity.
std::uint64_t fnv1a64(std::string_view data) noexcept;

/// Current UTC time as ISO-8601 with second precision, e.g. 2024-05-01T12:00:00Z.
std::string utc_timestamp();

/// Splits on '\n', dropping a trailing '\r' from each line. A final empty
/// line after the last newline is not reported.
std::vector<std::string_view> split_lines(std::string_view text);

std::string to_lower_ascii(std::string_view s);
std::string_view trim(std::string_view s);

inline bool is_word_byte(unsigned char c) noexcept {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

/// Uniform integer in [0, bound) by rejecting the top partial bucket.
inline std::uint64_t uniform_below(std::uint64_t bound, std::mt19937_64& engine) {
  constexpr auto max = std::mt19937_64::max();
  const std::uint64_t limit = max - (max % bound);
  std::uint64_t r;
  do {
    r = engine();
  } while (r >= limit);
  return r % bound;
}

/// Fisher-Yates over a 64-bit Mersenne Twister. Written out rather than using
/// std::shuffle so that the permutation is identical across standard library
/// implementations.
template <class T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(i, engine));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace finharness
