#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "spherot/alpha.hpp"

namespace spherot {

// Facet incidence of the k-simplices over GF(2), columns bit-packed into
// 64-bit words.
struct BoundaryMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::vector<std::uint64_t>> columns;  // one word block per column

  bool get(int r, int c) const {
    return (columns[static_cast<std::size_t>(c)][static_cast<std::size_t>(r) >> 6] >>
            (static_cast<std::size_t>(r) & 63)) & 1ULL;
  }
  void set(int r, int c) {
    columns[static_cast<std::size_t>(c)][static_cast<std::size_t>(r) >> 6] |=
        1ULL << (static_cast<std::size_t>(r) & 63);
  }
};

// Column j of boundary_k has ones at the rows of the (k-1)-facets of the
// j-th k-simplex, in stored order.
inline BoundaryMatrix boundary_matrix(const SimplicialComplex& c, int k) {
  if (k < 1 || k > c.maxdim())
    fail(ErrorKind::DimensionOutOfRange, "boundary dimension out of range");
  const auto& faces = c.simplices_by_dim[static_cast<std::size_t>(k - 1)];
  const auto& cells = c.simplices_by_dim[static_cast<std::size_t>(k)];

  std::unordered_map<std::vector<int>, int, detail::TupleHash> face_index;
  face_index.reserve(faces.size());
  for (std::size_t i = 0; i < faces.size(); ++i)
    face_index[faces[i]] = static_cast<int>(i);

  BoundaryMatrix m;
  m.rows = static_cast<int>(faces.size());
  m.cols = static_cast<int>(cells.size());
  std::size_t words = (static_cast<std::size_t>(m.rows) + 63) / 64;
  m.columns.assign(static_cast<std::size_t>(m.cols),
                   std::vector<std::uint64_t>(words, 0));
  for (std::size_t j = 0; j < cells.size(); ++j) {
    const auto& s = cells[j];
    std::vector<int> face(s.size() - 1);
    for (std::size_t drop = 0; drop < s.size(); ++drop) {
      for (std::size_t t = 0, w = 0; t < s.size(); ++t)
        if (t != drop) face[w++] = s[t];
      auto it = face_index.find(face);
      if (it == face_index.end())
        fail(ErrorKind::DomainError, "complex not closed under faces");
      m.set(it->second, static_cast<int>(j));
    }
  }
  return m;
}

// Rank over GF(2): column-major elimination, pivoting each column on its
// first set bit.
inline int rank_gf2(const BoundaryMatrix& m) {
  if (m.rows == 0 || m.cols == 0) return 0;
  std::unordered_map<int, std::vector<std::uint64_t>> pivot_of_row;
  int rank = 0;
  for (int j = 0; j < m.cols; ++j) {
    std::vector<std::uint64_t> col = m.columns[static_cast<std::size_t>(j)];
    while (true) {
      int pivot = -1;
      for (std::size_t w = 0; w < col.size(); ++w) {
        if (col[w]) {
          pivot = static_cast<int>(w * 64) + __builtin_ctzll(col[w]);
          break;
        }
      }
      if (pivot < 0) break;
      auto it = pivot_of_row.find(pivot);
      if (it == pivot_of_row.end()) {
        pivot_of_row.emplace(pivot, std::move(col));
        ++rank;
        break;
      }
      for (std::size_t w = 0; w < col.size(); ++w) col[w] ^= it->second[w];
    }
  }
  return rank;
}

// beta_k = #X_k - rank d_k - rank d_{k+1} for 0 <= k <= top, rank d_0 = 0.
// The complex must have been built through dimension top+1 so that rank
// d_{top+1} is available (an empty stored level is fine).
inline std::vector<int> betti_numbers(const SimplicialComplex& c, int top) {
  if (top < 0) fail(ErrorKind::DimensionOutOfRange, "top must be >= 0");
  if (top + 1 > c.maxdim())
    fail(ErrorKind::InsufficientDimension,
         "complex was not built through dimension top+1");
  std::vector<int> ranks(static_cast<std::size_t>(top) + 2, 0);  // ranks[k] = rank d_k
  for (int k = 1; k <= top + 1; ++k)
    ranks[static_cast<std::size_t>(k)] = rank_gf2(boundary_matrix(c, k));
  std::vector<int> betti(static_cast<std::size_t>(top) + 1, 0);
  for (int k = 0; k <= top; ++k)
    betti[static_cast<std::size_t>(k)] =
        static_cast<int>(c.count(k)) - ranks[static_cast<std::size_t>(k)] -
        ranks[static_cast<std::size_t>(k) + 1];
  return betti;
}

}  // namespace spherot
