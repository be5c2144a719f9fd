#pragma once

#include <cstddef>
#include <functional>

namespace ubpf {

/// Runs fn(i) for i in [0, count) on up to `width` threads. Work items are
/// claimed from a shared counter, so callers must write results by index.
/// If any call throws, the exception from the lowest failing index is
/// rethrown after all threads finish, wrapped with that index when `label`
/// is non-empty.
void parallel_for(std::size_t count, std::size_t width,
                  const std::function<void(std::size_t)>& fn,
                  const char* label = "replicate");

}  // namespace ubpf
