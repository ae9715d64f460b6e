#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace flipscale {

// Disjoint sets with union by size and path halving.
class UnionFind {
 public:
  using Index = std::uint32_t;

  UnionFind() = default;
  explicit UnionFind(std::size_t n) { reset(n); }

  void reset(std::size_t n) {
    parent_.resize(n);
    size_.assign(n, 1);
    std::iota(parent_.begin(), parent_.end(), Index{0});
    components_ = n;
    unions_ = 0;
  }

  std::size_t size() const noexcept { return parent_.size(); }
  std::size_t components() const noexcept { return components_; }

  // Number of successful merges since the last reset.
  std::size_t unions() const noexcept { return unions_; }

  Index find(Index x) noexcept {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Returns false when a and b were already connected.
  bool unite(Index a, Index b) noexcept {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    --components_;
    ++unions_;
    return true;
  }

  bool connected(Index a, Index b) noexcept { return find(a) == find(b); }

  std::uint32_t component_size(Index x) noexcept { return size_[find(x)]; }

 private:
  std::vector<Index> parent_;
  std::vector<std::uint32_t> size_;
  std::size_t components_ = 0;
  std::size_t unions_ = 0;
};

}  // namespace flipscale
