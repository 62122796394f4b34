/*
 * Copyright 2026 The UniSLAM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef UNISLAM_RANDOM_HPP_
#define UNISLAM_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <string_view>

#include <Eigen/Core>

namespace unislam {

// Deterministic splitmix64 stream. Used everywhere instead of <random>
// distributions so that outputs are bit-identical across platforms and
// standard-library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t NextU64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in the open interval (0, 1).
  double NextUniform() {
    return (static_cast<double>(NextU64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; one spare value is cached.
  double NextNormal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = NextUniform();
    const double u2 = NextUniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  Eigen::Vector3d NextNormal3() {
    Eigen::Vector3d v;
    v.x() = NextNormal();
    v.y() = NextNormal();
    v.z() = NextNormal();
    return v;
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent substream seed from a base seed, a stream tag and an
// index. FNV-1a over the tag, then splitmix-style finalization.
inline uint64_t DeriveSeed(uint64_t base, std::string_view stream,
                           uint64_t index = 0) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : stream) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  h ^= base + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  h ^= index * 0xD1342543DE82EF95ULL + 1;
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  return h ^ (h >> 31);
}

}  // namespace unislam

#endif  // UNISLAM_RANDOM_HPP_
