#pragma once

#include <bit>
#include <cassert>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace ssdann {

/// Array-backed min-max heap with a hard capacity. Even levels are min
/// levels, odd levels max levels, so both ends are reachable in O(1) and
/// removable in O(log n). When full, a push either evicts the current
/// maximum or is rejected if the new element would itself be the maximum.
template <typename T, typename Less = std::less<T>>
class BoundedMinMaxHeap {
 public:
  explicit BoundedMinMaxHeap(std::size_t capacity, Less less = Less{}) : capacity_(capacity), less_(less) {
    data_.reserve(capacity);
  }

  std::size_t size() const noexcept { return data_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return data_.empty(); }
  bool full() const noexcept { return data_.size() >= capacity_; }
  void clear() noexcept { data_.clear(); }

  const T& min() const {
    assert(!empty());
    return data_[0];
  }
  const T& max() const {
    assert(!empty());
    return data_[max_index()];
  }

  /// Returns false when the element was rejected. `evicted` receives the
  /// displaced maximum when one was dropped to make room.
  bool push(const T& value, T* evicted = nullptr, bool* did_evict = nullptr) {
    if (did_evict) *did_evict = false;
    if (capacity_ == 0) return false;
    if (full()) {
      const std::size_t mi = max_index();
      if (!less_(value, data_[mi])) return false;
      if (evicted) *evicted = data_[mi];
      if (did_evict) *did_evict = true;
      remove_at(mi);
    }
    data_.push_back(value);
    bubble_up(data_.size() - 1);
    return true;
  }

  T pop_min() {
    assert(!empty());
    T out = std::move(data_[0]);
    remove_at(0);
    return out;
  }

  T pop_max() {
    assert(!empty());
    const std::size_t mi = max_index();
    T out = std::move(data_[mi]);
    remove_at(mi);
    return out;
  }

  /// Raw storage in heap order; for invariant checks.
  const std::vector<T>& raw() const noexcept { return data_; }

  /// Verifies the min-max ordering over the whole array.
  bool valid() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      for (std::size_t d = first_descendant(i); d < data_.size() && d <= last_grandchild(i); ++d) {
        if (!is_descendant(d, i)) continue;
        if (is_min_level(i) ? less_(data_[d], data_[i]) : less_(data_[i], data_[d])) return false;
      }
    }
    return true;
  }

 private:
  static bool is_min_level(std::size_t i) { return (std::bit_width(i + 1) - 1) % 2 == 0; }
  static std::size_t parent(std::size_t i) { return (i - 1) / 2; }
  static std::size_t first_descendant(std::size_t i) { return 2 * i + 1; }
  static std::size_t last_grandchild(std::size_t i) { return 4 * i + 6; }
  static bool is_descendant(std::size_t d, std::size_t i) {
    while (d > i) d = parent(d);
    return d == i;
  }

  std::size_t max_index() const {
    if (data_.size() == 1) return 0;
    if (data_.size() == 2) return 1;
    return less_(data_[1], data_[2]) ? 2 : 1;
  }

  void remove_at(std::size_t i) {
    data_[i] = std::move(data_.back());
    data_.pop_back();
    if (i < data_.size()) {
      trickle_down(i);
      bubble_up(i);
    }
  }

  void bubble_up(std::size_t i) {
    if (i == 0) return;
    const std::size_t p = parent(i);
    if (is_min_level(i)) {
      if (less_(data_[p], data_[i])) {
        std::swap(data_[i], data_[p]);
        bubble_up_level(p, /*toward_min=*/false);
      } else {
        bubble_up_level(i, /*toward_min=*/true);
      }
    } else {
      if (less_(data_[i], data_[p])) {
        std::swap(data_[i], data_[p]);
        bubble_up_level(p, /*toward_min=*/true);
      } else {
        bubble_up_level(i, /*toward_min=*/false);
      }
    }
  }

  void bubble_up_level(std::size_t i, bool toward_min) {
    while (i > 2) {
      const std::size_t g = parent(parent(i));
      const bool move = toward_min ? less_(data_[i], data_[g]) : less_(data_[g], data_[i]);
      if (!move) break;
      std::swap(data_[i], data_[g]);
      i = g;
    }
  }

  // Among the children and grandchildren of i, the index of the extreme
  // element (smallest when toward_min, largest otherwise).
  std::size_t extreme_descendant(std::size_t i, bool toward_min) const {
    std::size_t best = first_descendant(i);
    auto better = [&](std::size_t a, std::size_t b) {
      return toward_min ? less_(data_[a], data_[b]) : less_(data_[b], data_[a]);
    };
    const std::size_t c2 = best + 1;
    if (c2 < data_.size() && better(c2, best)) best = c2;
    for (std::size_t g = 4 * i + 3; g <= last_grandchild(i) && g < data_.size(); ++g) {
      if (better(g, best)) best = g;
    }
    return best;
  }

  void trickle_down(std::size_t i) {
    const bool toward_min = is_min_level(i);
    while (first_descendant(i) < data_.size()) {
      const std::size_t m = extreme_descendant(i, toward_min);
      const bool better = toward_min ? less_(data_[m], data_[i]) : less_(data_[i], data_[m]);
      if (!better) return;
      std::swap(data_[m], data_[i]);
      if (m <= 2 * i + 2) return;  // direct child: done
      const std::size_t p = parent(m);
      const bool misplaced = toward_min ? less_(data_[p], data_[m]) : less_(data_[m], data_[p]);
      if (misplaced) std::swap(data_[m], data_[p]);
      i = m;
    }
  }

  std::size_t capacity_;
  Less less_;
  std::vector<T> data_;
};

}  // namespace ssdann
