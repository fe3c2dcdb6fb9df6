#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "ssdann/minmax_heap.hpp"

using ssdann::BoundedMinMaxHeap;

TEST(MinMaxHeap, MatchesMultisetUnderRandomOps) {
  std::mt19937 rng(7);
  for (std::size_t cap : {1u, 2u, 3u, 7u, 64u}) {
    BoundedMinMaxHeap<int> h(cap);
    std::multiset<int> ref;
    for (int it = 0; it < 5000; ++it) {
      const int op = static_cast<int>(rng() % 4);
      if (op < 2 || ref.empty()) {
        const int v = static_cast<int>(rng() % 200);
        int ev = -1;
        bool did = false;
        const bool ok = h.push(v, &ev, &did);
        if (ref.size() < cap) {
          EXPECT_TRUE(ok);
          ref.insert(v);
        } else if (v < *ref.rbegin()) {
          EXPECT_TRUE(ok);
          EXPECT_TRUE(did);
          EXPECT_EQ(ev, *ref.rbegin());
          ref.erase(std::prev(ref.end()));
          ref.insert(v);
        } else {
          EXPECT_FALSE(ok);
        }
      } else if (op == 2) {
        EXPECT_EQ(h.pop_min(), *ref.begin());
        ref.erase(ref.begin());
      } else {
        EXPECT_EQ(h.pop_max(), *ref.rbegin());
        ref.erase(std::prev(ref.end()));
      }
      ASSERT_EQ(h.size(), ref.size());
      ASSERT_TRUE(h.valid());
      if (!ref.empty()) {
        EXPECT_EQ(h.min(), *ref.begin());
        EXPECT_EQ(h.max(), *ref.rbegin());
      }
    }
  }
}

TEST(MinMaxHeap, ZeroCapacityRejects) {
  BoundedMinMaxHeap<int> h(0);
  EXPECT_FALSE(h.push(1));
  EXPECT_TRUE(h.empty());
}

TEST(MinMaxHeap, DrainsSorted) {
  BoundedMinMaxHeap<int> h(100);
  for (int i = 0; i < 100; ++i) h.push((i * 37) % 100);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(h.pop_min(), i);
}
