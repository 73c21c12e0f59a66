#include "common/rng.hpp"

#include <cmath>

namespace sf {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

CounterRng::CounterRng(std::uint64_t key, std::uint64_t stream)
    : key_(key), stream_(stream) {}

std::uint64_t CounterRng::next_u64() {
  const std::uint64_t base = mix64(key_ ^ mix64(stream_ + 0x632be59bd9b4e019ULL));
  return mix64(base + mix64(counter_++));
}

float CounterRng::uniform() {
  return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
}

float CounterRng::uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

double CounterRng::uniform_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  // rejection keeps the draw unbiased
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

float CounterRng::normal() {
  // Box-Muller on the 53-bit uniform, first output only.
  double u1 = uniform_double();
  if (u1 < 1e-300) u1 = 1e-300;
  const double u2 = uniform_double();
  return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2));
}

}  // namespace sf
