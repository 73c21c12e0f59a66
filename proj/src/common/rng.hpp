#pragma once

#include <cstdint>
#include <string_view>

namespace sf {

/// Counter-based generator. A stream is identified by (key, stream id), so
/// any sample or parameter can be regenerated without replaying the others.
/// Output is a pure function of (key, stream, counter).
class CounterRng {
 public:
  CounterRng(std::uint64_t key, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 24 bits of resolution (exact in float).
  float uniform();
  float uniform(float lo, float hi);
  double uniform_double();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  float normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s);

}  // namespace sf
