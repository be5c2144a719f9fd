#include <atomic>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ubpf/errors.hpp"
#include "ubpf/parallel.hpp"

using namespace ubpf;

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (std::size_t width : {1u, 2u, 8u}) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), width, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ParallelFor, ZeroCountIsANoOp) {
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(ParallelFor, RethrowsLowestFailingIndexWithItsType) {
  for (std::size_t width : {1u, 4u}) {
    try {
      parallel_for(50, width, [](std::size_t i) {
        if (i == 17 || i == 31) throw NumericalError("boom " + std::to_string(i));
      });
      FAIL() << "expected an exception";
    } catch (const NumericalError& e) {
      EXPECT_NE(std::string(e.what()).find("replicate 17"), std::string::npos) << e.what();
    }
  }
  EXPECT_THROW(parallel_for(3, 2, [](std::size_t) { throw ConfigError("bad"); }), ConfigError);
}
