#include "gansearch/rng.hpp"

#include <cmath>
#include <numbers>

namespace gansearch {

std::uint64_t Rng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng Rng::split(std::uint64_t stream_id) const {
  Rng child;
  child.key_ = mix(key_ ^ mix(stream_id + 0xD1B54A32D192ED03ULL));
  child.counter_ = 0;
  return child;
}

double Rng::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::uniform_index(std::size_t n) {
  const std::uint64_t bound = n;
  const std::uint64_t limit = max() - max() % bound;
  std::uint64_t x;
  do {
    x = (*this)();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

}  // namespace gansearch
