// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace cfmimo {

/// Runs body(i) for i in [0, count) on up to `workers` threads. Each index is
/// visited exactly once; callers keep results index-addressed so the outcome
/// does not depend on the worker count. workers <= 1 runs inline.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace cfmimo
