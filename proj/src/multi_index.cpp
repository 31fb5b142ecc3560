#include "qpce/multi_index.hpp"

#include <limits>

#include <fmt/format.h>

#include "qpce/errors.hpp"

namespace qpce {

std::size_t hierarchy_size(std::size_t S, unsigned P) {
  if (S == 0)
    throw Error(Errc::invalid_argument, "stochastic dimension S must be >= 1");
  // C(S+P, P) = prod_{i=1..P} (S+i)/i; every partial product is itself a
  // binomial coefficient, so the division is exact.
  unsigned __int128 count = 1;
  constexpr auto limit =
      static_cast<unsigned __int128>(std::numeric_limits<std::size_t>::max());
  for (unsigned i = 1; i <= P; ++i) {
    const unsigned __int128 next = count * (S + i);
    if (next / (S + i) != count || next / i > limit)
      throw Error(Errc::capacity,
                  fmt::format("hierarchy size for S={}, P={} overflows", S, P));
    count = next / i;
  }
  return static_cast<std::size_t>(count);
}

namespace {

// Appends every composition of `remaining` into the tail positions
// [pos, S), first entry ascending, which yields lexicographic order.
void compositions(std::vector<unsigned>& current, std::size_t pos,
                  unsigned remaining, std::vector<unsigned>& out) {
  if (pos + 1 == current.size()) {
    current[pos] = remaining;
    out.insert(out.end(), current.begin(), current.end());
    return;
  }
  for (unsigned k = 0; k <= remaining; ++k) {
    current[pos] = k;
    compositions(current, pos + 1, remaining - k, out);
  }
}

}  // namespace

MultiIndexSet enumerate_indices(std::size_t S, unsigned P) {
  const std::size_t count = hierarchy_size(S, P);
  if (count > std::numeric_limits<std::uint32_t>::max() ||
      count > std::numeric_limits<std::size_t>::max() / S)
    throw Error(Errc::capacity,
                fmt::format("hierarchy of {} equations is too large", count));

  MultiIndexSet set;
  set.dimension_ = S;
  set.order_ = P;
  set.count_ = count;
  set.entries_.reserve(count * S);
  std::vector<unsigned> current(S, 0);
  for (unsigned grade = 0; grade <= P; ++grade)
    compositions(current, 0, grade, set.entries_);

  if (set.entries_.size() != count * S)
    throw Error(Errc::numerical_consistency,
                "multi-index enumeration disagrees with the closed-form count");
  for (std::size_t pos = 0; pos < count; ++pos) {
    const auto idx = set[pos];
    set.lookup_.emplace(std::vector<unsigned>(idx.begin(), idx.end()), pos);
  }
  return set;
}

std::optional<std::size_t> MultiIndexSet::position(
    std::span<const unsigned> index) const {
  if (index.size() != dimension_) return std::nullopt;
  const auto it = lookup_.find(std::vector<unsigned>(index.begin(), index.end()));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

unsigned MultiIndexSet::total_degree(std::size_t pos) const {
  unsigned sum = 0;
  for (unsigned n : (*this)[pos]) sum += n;
  return sum;
}

double MultiIndexSet::norm_squared(std::size_t pos) const {
  double value = 1.0;
  for (unsigned n : (*this)[pos])
    for (unsigned k = 2; k <= n; ++k) value *= k;
  return value;
}

GalerkinCouplings build_couplings(const MultiIndexSet& basis) {
  GalerkinCouplings g;
  g.dimension = basis.dimension();
  g.offsets.reserve(basis.size() + 1);
  g.offsets.push_back(0);
  std::vector<unsigned> partner(basis.dimension());
  for (std::size_t m = 0; m < basis.size(); ++m) {
    const auto idx = basis[m];
    for (std::size_t n = 0; n < basis.dimension(); ++n) {
      partner.assign(idx.begin(), idx.end());
      if (idx[n] >= 1) {
        partner[n] = idx[n] - 1;
        const auto l = basis.position(partner);
        g.entries.push_back({static_cast<std::uint32_t>(m),
                             static_cast<std::uint32_t>(n),
                             static_cast<std::uint32_t>(*l), 1.0});
      }
      partner[n] = idx[n] + 1;
      if (const auto l = basis.position(partner))
        g.entries.push_back({static_cast<std::uint32_t>(m),
                             static_cast<std::uint32_t>(n),
                             static_cast<std::uint32_t>(*l),
                             static_cast<double>(idx[n] + 1)});
    }
    g.offsets.push_back(g.entries.size());
  }
  return g;
}

}  // namespace qpce
