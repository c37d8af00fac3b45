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

#ifndef BRFLOW_PARALLEL_HPP_
#define BRFLOW_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace brflow {

// Number of worker threads used inside solvers. Honors the BRFLOW_THREADS
// environment variable as a cap; defaults to the hardware concurrency.
std::size_t thread_count();

// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each chunk,
// one chunk per thread. The first exception thrown by any chunk is rethrown.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t threads = 0);

}  // namespace brflow

#endif  // BRFLOW_PARALLEL_HPP_
