/*
 * Copyright 2026 The oodkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Seeded random streams with a fully specified layout, so that runs are
// reproducible regardless of the standard library in use.
//
//   engine     std::mt19937_64 (its output sequence is fixed by the standard)
//   uniform    top 53 bits of one engine draw, scaled to [0, 1)
//   index      Lemire's multiply-shift with rejection, one or more draws
//   normal     Marsaglia polar method; the spare deviate is cached and
//              returned by the next call
//   substream  engine seeded with
//              SplitMix64(seed ^ SplitMix64(tag * 0x100000001 + index))

#ifndef OODKIT_RANDOM_HPP_
#define OODKIT_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <random>

namespace oodkit {

constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream tags keep independent consumers of one seed apart.
enum class StreamTag : std::uint64_t {
  kValidationSubset = 0x5641,
  kSynthesis = 0x5359,
  kWorldId = 0x4944,
  kWorldOod = 0x4f4f,
  kUniformLogits = 0x554e,
  kWorldPairs = 0x5041,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream derived from (seed, tag, index).
  static Rng Substream(std::uint64_t seed, StreamTag tag,
                       std::uint64_t index = 0) {
    const auto t = static_cast<std::uint64_t>(tag);
    return Rng(SplitMix64(seed ^ SplitMix64(t * 0x100000001ULL + index)));
  }

  std::uint64_t Next() { return engine_(); }

  double Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t Index(std::uint64_t bound) {
    __uint128_t product = static_cast<__uint128_t>(Next()) * bound;
    auto low = static_cast<std::uint64_t>(product);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        product = static_cast<__uint128_t>(Next()) * bound;
        low = static_cast<std::uint64_t>(product);
      }
    }
    return static_cast<std::uint64_t>(product >> 64);
  }

  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * Uniform() - 1.0;
      v = 2.0 * Uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace oodkit

#endif  // OODKIT_RANDOM_HPP_
