#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace qpce {

/// Total-degree truncated set of Hermite multi-indices n in Z_{>=0}^S with
/// |n|_1 <= P, in graded lexicographic order (ascending |n|_1, then
/// lexicographic). Position 0 is always the zero index.
class MultiIndexSet {
 public:
  std::size_t dimension() const { return dimension_; }
  unsigned order() const { return order_; }
  std::size_t size() const { return count_; }

  std::span<const unsigned> operator[](std::size_t pos) const {
    return {entries_.data() + pos * dimension_, dimension_};
  }
  std::optional<std::size_t> position(std::span<const unsigned> index) const;

  unsigned total_degree(std::size_t pos) const;
  /// E[Phi_n^2] = prod_j n_j! for probabilists' Hermite polynomials.
  double norm_squared(std::size_t pos) const;

  bool operator==(const MultiIndexSet& other) const {
    return dimension_ == other.dimension_ && order_ == other.order_ &&
           entries_ == other.entries_;
  }

 private:
  friend MultiIndexSet enumerate_indices(std::size_t S, unsigned P);

  std::size_t dimension_ = 0;
  unsigned order_ = 0;
  std::size_t count_ = 0;
  std::vector<unsigned> entries_;
  std::map<std::vector<unsigned>, std::size_t> lookup_;
};

/// (S+P)! / (S! P!), computed in exact integer arithmetic. Throws a capacity
/// error if the count does not fit in std::size_t.
std::size_t hierarchy_size(std::size_t S, unsigned P);

MultiIndexSet enumerate_indices(std::size_t S, unsigned P);

/// Non-zero Galerkin projection E[Phi_m xi_n Phi_l] / E[Phi_m^2] of the
/// truncated basis. `mode` is 0-based.
struct Coupling {
  std::uint32_t m = 0;
  std::uint32_t mode = 0;
  std::uint32_t l = 0;
  double weight = 0.0;

  bool operator==(const Coupling&) const = default;
};

/// Coupling entries grouped by row m (CSR layout).
struct GalerkinCouplings {
  std::size_t dimension = 0;
  std::vector<Coupling> entries;
  std::vector<std::size_t> offsets;  // size() + 1 row starts

  std::size_t size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::span<const Coupling> row(std::size_t m) const {
    return {entries.data() + offsets[m], offsets[m + 1] - offsets[m]};
  }
};

/// For each m and mode n: the lowering partner (l_n = m_n - 1, weight 1)
/// when m_n >= 1 and the raising partner (l_n = m_n + 1, weight m_n + 1)
/// when it stays inside the set.
GalerkinCouplings build_couplings(const MultiIndexSet& basis);

}  // namespace qpce
