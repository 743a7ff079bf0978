// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Splittable random streams. A stream is fully determined by the key
// (seed, stream id, substream id), so any trial can be regenerated in
// isolation and results do not depend on how trials are scheduled.

#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include <cstdint>
#include <limits>

namespace fbmac {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Mixes a stream key into a single 64-bit value.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream,
                                   std::uint64_t substream = 0) {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ (stream * 0xd1b54a32d192ed03ULL));
  k = splitmix64(k ^ (substream * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL));
  return k;
}

/// xoshiro256** generator keyed by (seed, stream, substream). Satisfies
/// UniformRandomBitGenerator, so Boost.Random distributions accept it.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0,
                        std::uint64_t substream = 0) {
    std::uint64_t x = derive_key(seed, stream, substream);
    for (auto& s : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      s = splitmix64(x);
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() { return normal_(*this); }

  double chi_squared(double dof) {
    return boost::random::chi_squared_distribution<double>(dof)(*this);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  boost::random::normal_distribution<double> normal_;
};

}  // namespace fbmac
