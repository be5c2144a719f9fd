#include "ubpf/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ubpf/errors.hpp"

namespace ubpf {

namespace {

[[noreturn]] void rethrow_with_index(std::exception_ptr error, std::size_t index,
                                     const char* label) {
  if (label == nullptr || *label == '\0') std::rethrow_exception(error);
  const std::string prefix = std::string(label) + " " + std::to_string(index) + ": ";
  try {
    std::rethrow_exception(error);
  } catch (const WeightCollapse& e) {
    throw NumericalError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + e.what());
  }
}

}  // namespace

void parallel_for(std::size_t count, std::size_t width,
                  const std::function<void(std::size_t)>& fn, const char* label) {
  if (count == 0) return;
  width = std::clamp<std::size_t>(width, 1, count);

  std::mutex mutex;
  std::size_t failed_index = count;
  std::exception_ptr failure;

  auto record = [&](std::size_t i, std::exception_ptr e) {
    std::lock_guard lock(mutex);
    if (i < failed_index) {
      failed_index = i;
      failure = e;
    }
  };

  if (width == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        record(i, std::current_exception());
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          record(i, std::current_exception());
        }
      }
    };
    std::vector<std::jthread> threads;
    threads.reserve(width);
    for (std::size_t t = 0; t < width; ++t) threads.emplace_back(worker);
  }

  if (failure) rethrow_with_index(failure, failed_index, label);
}

}  // namespace ubpf
