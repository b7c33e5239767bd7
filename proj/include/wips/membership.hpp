#pragma once

#include <cstddef>
#include <vector>

namespace wips {

/// Either explicit per-type counts or per-type proportions (summing to 1).
struct MembershipSpec {
  std::vector<std::size_t> counts;
  std::vector<double> proportions;
  friend bool operator==(const MembershipSpec&, const MembershipSpec&) = default;
};

/// Fixed assignment of vertices 0..N-1 to types 0..K-1. Types occupy
/// contiguous index blocks in type order.
class MembershipMap {
 public:
  MembershipMap() = default;
  explicit MembershipMap(std::vector<std::size_t> counts);

  std::size_t size() const noexcept { return assignment_.size(); }
  int types() const noexcept { return static_cast<int>(counts_.size()); }
  int type_of(std::size_t vertex) const { return assignment_[vertex]; }
  std::size_t count(int type) const { return counts_[static_cast<std::size_t>(type)]; }
  std::size_t first(int type) const { return offsets_[static_cast<std::size_t>(type)]; }
  std::size_t last(int type) const { return offsets_[static_cast<std::size_t>(type) + 1]; }
  /// N-bar: smallest type population.
  std::size_t min_count() const noexcept { return min_count_; }
  const std::vector<int>& assignments() const noexcept { return assignment_; }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }

  friend bool operator==(const MembershipMap&, const MembershipMap&) = default;

 private:
  std::vector<int> assignment_;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> offsets_;
  std::size_t min_count_ = 0;
};

/// Counts from proportions by the largest-remainder method: floor every
/// share, then hand the leftover vertices to the largest fractional parts,
/// ties going to the lower type index.
std::vector<std::size_t> largest_remainder_counts(const std::vector<double>& proportions, std::size_t n);

MembershipMap build_membership(const MembershipSpec& spec, std::size_t n);

}  // namespace wips
