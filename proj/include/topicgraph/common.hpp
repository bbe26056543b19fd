#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace topicgraph {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (files, records, arguments).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Warnings go through a process-wide sink so tests and the CLI can capture them.
using WarningHandler = std::function<void(std::string_view)>;

void warn(std::string_view message);

/// Installs `handler` and returns the previous one. An empty handler restores stderr output.
WarningHandler set_warning_handler(WarningHandler handler);

/// Collects warnings for the lifetime of the object, then restores the previous sink.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(std::string_view fragment) const;

 private:
  std::vector<std::string> messages_;
  WarningHandler previous_;
};

/// 64-bit FNV-1a. Stable across platforms, used for cache keys.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// SplitMix64 finalizer; derives independent seeds from (seed, a, b).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Shortest decimal that round-trips the double.
std::string format_double(double value);

}  // namespace topicgraph
