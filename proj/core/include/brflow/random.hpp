// Copyright 2026 The brflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BRFLOW_RANDOM_HPP_
#define BRFLOW_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace brflow {

// Stream tags keep the random streams of unrelated consumers disjoint even
// when they share a user seed and counters.
enum class StreamTag : std::uint64_t {
  kSampling = 1,
  kLangevin = 2,
  kReplacement = 3,
  kSlicing = 4,
  kSpecGeneration = 5,
};

std::uint64_t splitmix64(std::uint64_t x);

// Hashes (seed, tag, a, b) into a 64-bit seed. Every particle of every outer
// step gets its own stream this way, so results do not depend on how work is
// split across threads.
std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                          std::uint64_t b = 0);

std::mt19937_64 make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                            std::uint64_t b = 0);

}  // namespace brflow

#endif  // BRFLOW_RANDOM_HPP_
