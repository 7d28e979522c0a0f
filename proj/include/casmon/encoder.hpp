#ifndef CASMON_ENCODER_HPP
#define CASMON_ENCODER_HPP

#include "casmon/event.hpp"
#include "casmon/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace casmon {

/// Where the four runtime features of an exec event are written.
struct ExecSlots {
  std::size_t latency = 0;
  std::size_t tokens = 1;
  std::size_t status = 2;
  std::size_t error = 3;
};

/// Encoder parameters.
///
/// Text channels use the layout `[0, dim - meta_dims)` for signed hashed token
/// counts and `[dim - meta_dims, dim)` for metadata:
///   - slot 0 of the metadata block: log1p(turn), source side only
///   - remaining slots: operation labels folded in by hashing
/// The source view folds `meta.op` (and `meta.tool` on the tool channel); the
/// target view folds `meta.recv_op`.
struct EncoderConfig {
  std::size_t dim = 32;
  std::uint64_t seed = 0;
  std::size_t meta_dims = 4;
  ExecSlots exec_slots{};

  void validate() const {
    if (dim == 0 || dim > 32) throw ConfigError("encoder.dim must be in [1, 32]");
    if (meta_dims < 2 || meta_dims >= dim)
      throw ConfigError("encoder.meta_dims must be in [2, dim)");
    const std::size_t slots[] = {exec_slots.latency, exec_slots.tokens, exec_slots.status,
                                 exec_slots.error};
    for (std::size_t a = 0; a < 4; ++a) {
      if (slots[a] >= dim) throw ConfigError("encoder.exec_slots entries must be < dim");
      for (std::size_t b = a + 1; b < 4; ++b)
        if (slots[a] == slots[b]) throw ConfigError("encoder.exec_slots entries must be distinct");
    }
  }
};

/// Source-side and target-side features of one event.
struct EncodedEvent {
  Vector source;
  Vector target;
};

/// Payload-to-feature interface; a learned embedding backend can implement it.
/// Encodings depend on the event content only, never on its target, so a
/// broadcast is encoded once for all of its observers.
class FeatureEncoder {
 public:
  virtual ~FeatureEncoder() = default;
  virtual std::size_t dim() const noexcept = 0;
  virtual EncodedEvent encode(const ChannelEvent& event) const = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline std::uint64_t hash_token(std::string_view token, std::uint64_t seed) noexcept {
  std::uint64_t h = kFnvOffset;
  for (unsigned char ch : token) {
    h ^= ch;
    h *= kFnvPrime;
  }
  return splitmix64(h ^ splitmix64(seed));
}

inline bool token_char(unsigned char ch) noexcept { return std::isalnum(ch) || ch >= 0x80; }
inline unsigned char lower_ascii(unsigned char ch) noexcept { return ch >= 'A' && ch <= 'Z' ? ch - 'A' + 'a' : ch; }

/// Lowercases ASCII and splits on anything that is not alphanumeric.
/// Non-ASCII bytes are kept inside tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (token_char(ch)) {
      cur.push_back(static_cast<char>(lower_ascii(ch)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline double numeric_field(const Json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) return 0.0;
  if (it->is_number()) return it->get<double>();
  if (it->is_boolean()) return it->get<bool>() ? 1.0 : 0.0;
  return 0.0;
}

}  // namespace detail

/// Deterministic hashed bag-of-tokens encoder; no learned parameters.
class HashedEncoder final : public FeatureEncoder {
 public:
  explicit HashedEncoder(EncoderConfig config = {}) : config_(config) { config_.validate(); }

  std::size_t dim() const noexcept override { return config_.dim; }
  const EncoderConfig& config() const noexcept { return config_; }

  EncodedEvent encode(const ChannelEvent& ev) const override {
    if (ev.channel == Channel::exec) return encode_exec(ev);
    return encode_text(ev);
  }

 private:
  std::size_t token_dims() const noexcept { return config_.dim - config_.meta_dims; }
  std::size_t meta_base() const noexcept { return token_dims(); }

  // Hashes the tokens of detail::tokenize(text) while scanning, without
  // materializing them.
  void add_tokens(Vector& out, std::string_view text) const {
    const std::uint64_t salt = detail::splitmix64(config_.seed);
    std::uint64_t h = detail::kFnvOffset;
    bool in_token = false;
    auto flush = [&] {
      if (!in_token) return;
      const std::uint64_t g = detail::splitmix64(h ^ salt);
      out[static_cast<Eigen::Index>(g % token_dims())] += (g >> 63) ? -1.0 : 1.0;
      h = detail::kFnvOffset;
      in_token = false;
    };
    for (unsigned char ch : text) {
      if (detail::token_char(ch)) {
        h ^= detail::lower_ascii(ch);
        h *= detail::kFnvPrime;
        in_token = true;
      } else {
        flush();
      }
    }
    flush();
  }

  void fold_label(Vector& out, const Json& meta, const char* key) const {
    auto it = meta.find(key);
    if (it == meta.end() || !it->is_string()) return;
    const std::size_t label_slots = config_.meta_dims - 1;
    std::uint64_t h = detail::hash_token(it->get<std::string>(), config_.seed ^ 0x5bd1e995ull);
    out[static_cast<Eigen::Index>(meta_base() + 1 + h % label_slots)] += 1.0;
  }

  static std::string_view view_text(const Json& payload, const char* key) {
    if (payload.is_string()) return payload.get_ref<const std::string&>();
    if (!payload.is_object()) return {};
    if (auto it = payload.find(key); it != payload.end() && it->is_string()) return it->get_ref<const std::string&>();
    const char* other = std::string_view(key) == "source" ? "target" : "source";
    if (auto it = payload.find(other); it != payload.end() && it->is_string()) return it->get_ref<const std::string&>();
    return {};
  }

  EncodedEvent encode_text(const ChannelEvent& ev) const {
    const auto d = static_cast<Eigen::Index>(config_.dim);
    EncodedEvent out{Vector::Zero(d), Vector::Zero(d)};
    add_tokens(out.source, view_text(ev.payload, "source"));
    add_tokens(out.target, view_text(ev.payload, "target"));
    out.source[static_cast<Eigen::Index>(meta_base())] = std::log1p(static_cast<double>(ev.turn));
    fold_label(out.source, ev.meta, "op");
    if (ev.channel == Channel::tool) fold_label(out.source, ev.meta, "tool");
    fold_label(out.target, ev.meta, "recv_op");
    return out;
  }

  Vector exec_vector(const Json& record) const {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(config_.dim));
    const auto& s = config_.exec_slots;
    v[static_cast<Eigen::Index>(s.latency)] = detail::numeric_field(record, "latency");
    v[static_cast<Eigen::Index>(s.tokens)] = detail::numeric_field(record, "tokens");
    double status = 0.0;
    bool failed = false;
    if (auto it = record.find("status"); it != record.end()) {
      if (it->is_string()) {
        status = it->get<std::string>() == "ok" ? 1.0 : 0.0;
        failed = status == 0.0;
      } else {
        status = detail::numeric_field(record, "status");
      }
    }
    v[static_cast<Eigen::Index>(s.status)] = status;
    double error = failed ? 1.0 : 0.0;
    if (auto it = record.find("error"); it != record.end()) {
      error = it->is_string() ? (it->get<std::string>().empty() ? 0.0 : 1.0)
                              : detail::numeric_field(record, "error");
    }
    v[static_cast<Eigen::Index>(s.error)] = error;
    return v;
  }

  EncodedEvent encode_exec(const ChannelEvent& ev) const {
    const Json* source = &ev.meta;
    if (ev.payload.is_object()) {
      if (auto it = ev.payload.find("source"); it != ev.payload.end() && it->is_object()) source = &*it;
    }
    const Json* target = source;
    if (ev.payload.is_object()) {
      if (auto it = ev.payload.find("target"); it != ev.payload.end() && it->is_object()) target = &*it;
    }
    return {exec_vector(*source), exec_vector(*target)};
  }

  EncoderConfig config_;
};

/// Convenience wrapper around HashedEncoder.
inline EncodedEvent encode_event(const ChannelEvent& event, std::size_t dim, std::uint64_t seed) {
  EncoderConfig cfg;
  cfg.dim = dim;
  cfg.seed = seed;
  cfg.meta_dims = std::min<std::size_t>(cfg.meta_dims, dim > 2 ? dim - 1 : 2);
  return HashedEncoder(cfg).encode(event);
}

}  // namespace casmon

#endif  // CASMON_ENCODER_HPP
