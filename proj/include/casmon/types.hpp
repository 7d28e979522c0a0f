#ifndef CASMON_TYPES_HPP
#define CASMON_TYPES_HPP

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace casmon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using AgentId = std::size_t;
using Turn = std::int64_t;

/// Global guard constant used by every ratio and normalization.
inline constexpr double kEpsilon = 1e-8;

/// Interaction modality of a directed event.
enum class Channel : std::uint8_t { comm = 0, mem = 1, tool = 2, exec = 3 };

inline constexpr std::size_t kChannelCount = 4;
inline constexpr std::array<Channel, kChannelCount> kChannels{
    Channel::comm, Channel::mem, Channel::tool, Channel::exec};

constexpr std::size_t index_of(Channel c) noexcept { return static_cast<std::size_t>(c); }

constexpr std::string_view to_string(Channel c) noexcept {
  switch (c) {
    case Channel::comm: return "comm";
    case Channel::mem: return "mem";
    case Channel::tool: return "tool";
    case Channel::exec: return "exec";
  }
  return "?";
}

constexpr std::optional<Channel> channel_from_string(std::string_view s) noexcept {
  for (Channel c : kChannels) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed wire record; `field()` names the offending field.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace casmon

#endif  // CASMON_TYPES_HPP
