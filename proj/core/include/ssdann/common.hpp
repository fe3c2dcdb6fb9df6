#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ssdann {

using NodeId = std::uint32_t;

inline constexpr NodeId kInvalidNode = 0xFFFFFFFFu;
inline constexpr std::size_t kPageSize = 4096;

/// Durations on both the simulated and the real clock are kept in integer
/// nanoseconds so that simulated runs stay bit-reproducible.
using Nanos = std::int64_t;

inline double to_micros(Nanos ns) { return static_cast<double>(ns) / 1e3; }
inline double to_seconds(Nanos ns) { return static_cast<double>(ns) / 1e9; }

inline Nanos steady_now() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

enum class Errc {
  InvalidArgument,
  InconsistentDim,
  Truncated,
  DimMismatch,
  InsufficientPoints,
  BadMagic,
  BadVersion,
  PageOverflow,
  OutOfRange,
  BackendClosed,
  NoTraffic,
  ProtocolViolation,
  StaleWait,
  PoisonedCompletion,
  Io,
  Config,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ssdann
