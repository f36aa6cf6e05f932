#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <iterator>
#include <ostream>
#include <vector>

namespace claimnav {

/// Integer identifier tagged with the entity kind it names.
template <class Tag>
struct Id {
  int value = -1;

  constexpr Id() = default;
  constexpr explicit Id(int v) : value(v) {}
  constexpr auto operator<=>(const Id&) const = default;
  constexpr bool valid() const { return value >= 0; }
};

template <class Tag>
std::ostream& operator<<(std::ostream& os, Id<Tag> id) {
  return os << id.value;
}

using AreaId = Id<struct AreaTag>;
using BoundaryId = Id<struct BoundaryTag>;
using InterfaceId = Id<struct InterfaceTag>;
using AgentId = Id<struct AgentTag>;

/// Small ordered set backed by a sorted vector. Area families and claim sets
/// hold a handful of elements, so this beats node-based sets and iterates in a
/// deterministic order.
template <class T>
class SortedSet {
 public:
  SortedSet() = default;
  SortedSet(std::initializer_list<T> init) : items_(init) { normalize(); }
  explicit SortedSet(std::vector<T> items) : items_(std::move(items)) { normalize(); }

  bool insert(T v) {
    auto it = std::lower_bound(items_.begin(), items_.end(), v);
    if (it != items_.end() && *it == v) return false;
    items_.insert(it, v);
    return true;
  }
  void insert_all(const SortedSet& o) {
    std::vector<T> merged;
    merged.reserve(items_.size() + o.items_.size());
    std::set_union(items_.begin(), items_.end(), o.items_.begin(), o.items_.end(), std::back_inserter(merged));
    items_ = std::move(merged);
  }
  bool erase(T v) {
    auto it = std::lower_bound(items_.begin(), items_.end(), v);
    if (it == items_.end() || !(*it == v)) return false;
    items_.erase(it);
    return true;
  }
  bool contains(T v) const { return std::binary_search(items_.begin(), items_.end(), v); }
  bool intersects(const SortedSet& o) const {
    auto a = items_.begin();
    auto b = o.items_.begin();
    while (a != items_.end() && b != o.items_.end()) {
      if (*a < *b) {
        ++a;
      } else if (*b < *a) {
        ++b;
      } else {
        return true;
      }
    }
    return false;
  }
  SortedSet intersection(const SortedSet& o) const {
    SortedSet out;
    std::set_intersection(items_.begin(), items_.end(), o.items_.begin(), o.items_.end(),
                          std::back_inserter(out.items_));
    return out;
  }

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  const std::vector<T>& items() const { return items_; }
  bool operator==(const SortedSet&) const = default;

 private:
  void normalize() {
    std::sort(items_.begin(), items_.end());
    items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
  }

  std::vector<T> items_;
};

using AreaSet = SortedSet<AreaId>;
using InterfaceSet = SortedSet<InterfaceId>;

}  // namespace claimnav

template <class Tag>
struct std::hash<claimnav::Id<Tag>> {
  std::size_t operator()(claimnav::Id<Tag> id) const noexcept { return std::hash<int>{}(id.value); }
};
