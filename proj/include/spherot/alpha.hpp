#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "spherot/detail/active_set_qp.hpp"
#include "spherot/sphere.hpp"

namespace spherot {

// Simplices are sorted index tuples, grouped by dimension. simplices_by_dim
// always has maxdim+1 entries, possibly empty, so consumers can tell "no
// simplices in this dimension" from "dimension never computed".
struct SimplicialComplex {
  std::vector<UnitPoint> vertices;
  std::vector<std::vector<std::vector<int>>> simplices_by_dim;

  int maxdim() const { return static_cast<int>(simplices_by_dim.size()) - 1; }
  std::size_t count(int k) const {
    if (k < 0 || k > maxdim()) return 0;
    return simplices_by_dim[static_cast<std::size_t>(k)].size();
  }
};

namespace detail {

struct TupleHash {
  std::size_t operator()(const std::vector<int>& v) const {
    std::size_t h = 1469598103934665603ULL;
    for (int x : v) {
      h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

}  // namespace detail

// Checks face closure and tuple ordering; throws on violation.
inline void validate_complex(const SimplicialComplex& c) {
  std::unordered_set<std::vector<int>, detail::TupleHash> seen;
  for (int k = 0; k <= c.maxdim(); ++k) {
    for (const auto& s : c.simplices_by_dim[static_cast<std::size_t>(k)]) {
      if (static_cast<int>(s.size()) != k + 1)
        fail(ErrorKind::DomainError, "simplex arity does not match dimension");
      if (!std::is_sorted(s.begin(), s.end()) ||
          std::adjacent_find(s.begin(), s.end()) != s.end())
        fail(ErrorKind::DomainError, "simplex tuple not strictly sorted");
      for (int v : s)
        if (v < 0 || v >= static_cast<int>(c.vertices.size()))
          fail(ErrorKind::DomainError, "simplex vertex out of range");
      if (k > 0) {
        for (std::size_t drop = 0; drop < s.size(); ++drop) {
          std::vector<int> face;
          for (std::size_t i = 0; i < s.size(); ++i)
            if (i != drop) face.push_back(s[i]);
          if (!seen.count(face))
            fail(ErrorKind::DomainError, "complex is not closed under faces");
        }
      }
      seen.insert(s);
    }
  }
}

struct FeasibilityResult {
  bool feasible = false;
  std::optional<Vec> witness;
  double min_sq_radius = std::numeric_limits<double>::infinity();
};

// All index pairs at Euclidean distance <= 2r, found with a cell grid of
// side 2r (quadratic fallback when the grid would not pay off).
inline std::vector<std::pair<int, int>> neighbor_pairs(
    const std::vector<UnitPoint>& S, double r) {
  if (!(r > 0.0)) fail(ErrorKind::DomainError, "neighbor radius must be positive");
  const int n = static_cast<int>(S.size());
  std::vector<std::pair<int, int>> out;
  if (n < 2) return out;
  const int d = S[0].dim();
  const double cell = 2.0 * r;
  const double cap_sq = 4.0 * r * r;

  if (d > 8 || n < 64) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if ((S[i].coords() - S[j].coords()).squaredNorm() <= cap_sq)
          out.emplace_back(i, j);
    return out;
  }

  auto key_of = [&](const Vec& p) {
    std::vector<int> key(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k)
      key[static_cast<std::size_t>(k)] = static_cast<int>(std::floor(p[k] / cell));
    return key;
  };
  std::unordered_map<std::vector<int>, std::vector<int>, detail::TupleHash> grid;
  for (int i = 0; i < n; ++i) grid[key_of(S[i].coords())].push_back(i);

  for (int i = 0; i < n; ++i) {
    std::vector<int> base = key_of(S[i].coords());
    std::vector<int> probe(base);
    // walk the 3^d neighborhood
    std::vector<int> digit(static_cast<std::size_t>(d), -1);
    while (true) {
      for (int k = 0; k < d; ++k)
        probe[static_cast<std::size_t>(k)] = base[static_cast<std::size_t>(k)] + digit[static_cast<std::size_t>(k)];
      auto it = grid.find(probe);
      if (it != grid.end()) {
        for (int j : it->second)
          if (j > i && (S[i].coords() - S[j].coords()).squaredNorm() <= cap_sq)
            out.emplace_back(i, j);
      }
      int k = 0;
      while (k < d && digit[static_cast<std::size_t>(k)] == 1) {
        digit[static_cast<std::size_t>(k)] = -1;
        ++k;
      }
      if (k == d) break;
      ++digit[static_cast<std::size_t>(k)];
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

inline std::string simplex_label(const std::vector<int>& sigma) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < sigma.size(); ++i)
    os << (i ? "," : "") << sigma[i];
  os << "}";
  return os.str();
}

}  // namespace detail

// Nerve membership test for sigma at radius r: is there an x with
// ||x - s_i|| <= r for every i in sigma, and ||x - s_i|| <= ||x - s_j||
// for every i in sigma, j outside? Answered by a two-phase active-set QP:
// phase I finds a point of the Voronoi polyhedron (an LP), phase II
// minimizes z = max_i ||x - s_i||^2 over it via variables (x, w), w = |x|^2 - z.
// Feasible iff optimal z <= r^2 + 1e-9.
//
// Voronoi rows are pruned to sites within prune_factor*r of the simplex
// barycenter; any witness lies within r of every sigma vertex, so farther
// sites cannot bind whenever the verdict is positive.
inline FeasibilityResult simplex_alpha_test(const std::vector<int>& sigma,
                                            const std::vector<UnitPoint>& S,
                                            double r, double prune_factor = 4.0,
                                            bool voronoi = true) {
  if (sigma.empty()) fail(ErrorKind::DomainError, "empty simplex");
  const int n = static_cast<int>(S.size());
  for (int v : sigma)
    if (v < 0 || v >= n) fail(ErrorKind::DomainError, "simplex index out of range");
  const int d = S[0].dim();

  Vec bary = Vec::Zero(d);
  for (int v : sigma) bary += S[static_cast<std::size_t>(v)].coords();
  bary /= static_cast<double>(sigma.size());

  std::vector<int> others;
  if (voronoi) {
    std::vector<char> in_sigma(static_cast<std::size_t>(n), 0);
    for (int v : sigma) in_sigma[static_cast<std::size_t>(v)] = 1;
    const double prune_sq = prune_factor * prune_factor * r * r;
    for (int j = 0; j < n; ++j) {
      if (in_sigma[static_cast<std::size_t>(j)]) continue;
      if ((S[static_cast<std::size_t>(j)].coords() - bary).squaredNorm() <= prune_sq)
        others.push_back(j);
    }
  }

  const int nb = static_cast<int>(sigma.size());
  const int nv = static_cast<int>(others.size()) * nb;

  // Phase I: find a point of the Voronoi polyhedron, or certify it empty.
  Vec x_feas = bary;
  if (nv > 0) {
    Mat A(nv + 1, d + 1);
    Vec b(nv + 1);
    int row = 0;
    for (int i : sigma) {
      const Vec& si = S[static_cast<std::size_t>(i)].coords();
      for (int j : others) {
        const Vec& sj = S[static_cast<std::size_t>(j)].coords();
        A.row(row).head(d) = 2.0 * (sj - si).transpose();
        A(row, d) = -1.0;
        b[row] = sj.squaredNorm() - si.squaredNorm();
        ++row;
      }
    }
    A.row(nv).setZero();
    A(nv, d) = -1.0;
    b[nv] = 1.0;  // v >= -1 keeps the LP bounded
    Vec c = Vec::Zero(d + 1);
    c[d] = 1.0;
    Vec u0(d + 1);
    u0.head(d) = bary;
    double worst = 0.0;
    for (int k = 0; k < nv; ++k)
      worst = std::max(worst, A.row(k).head(d).dot(bary) - b[k]);
    u0[d] = worst + 1.0;
    auto phase1 = detail::solve_qp_active_set(Mat::Zero(d + 1, d + 1), c, A, b, u0);
    if (phase1.status != detail::QpStatus::Optimal &&
        phase1.status != detail::QpStatus::Unbounded)
      fail(ErrorKind::SolverFailure,
           "phase-1 LP stalled on simplex " + detail::simplex_label(sigma));
    if (phase1.status == detail::QpStatus::Optimal && phase1.x[d] > 1e-9)
      return FeasibilityResult{};  // Voronoi region empty: infeasible at any r
    x_feas = phase1.x.head(d);
  }

  // Phase II: minimize |x|^2 - w subject to w <= 2 x.s_i - |s_i|^2 and the
  // Voronoi half-spaces.
  Mat A(nb + nv, d + 1);
  Vec b(nb + nv);
  int row = 0;
  for (int i : sigma) {
    const Vec& si = S[static_cast<std::size_t>(i)].coords();
    A.row(row).head(d) = -2.0 * si.transpose();
    A(row, d) = 1.0;
    b[row] = -si.squaredNorm();
    ++row;
  }
  for (int i : sigma) {
    const Vec& si = S[static_cast<std::size_t>(i)].coords();
    for (int j : others) {
      const Vec& sj = S[static_cast<std::size_t>(j)].coords();
      A.row(row).head(d) = 2.0 * (sj - si).transpose();
      A(row, d) = 0.0;
      b[row] = sj.squaredNorm() - si.squaredNorm();
      ++row;
    }
  }
  Mat Q = Mat::Zero(d + 1, d + 1);
  Q.topLeftCorner(d, d) = 2.0 * Mat::Identity(d, d);
  Vec c = Vec::Zero(d + 1);
  c[d] = -1.0;
  Vec u0(d + 1);
  u0.head(d) = x_feas;
  double wmin = std::numeric_limits<double>::infinity();
  for (int i : sigma) {
    const Vec& si = S[static_cast<std::size_t>(i)].coords();
    wmin = std::min(wmin, 2.0 * si.dot(x_feas) - si.squaredNorm());
  }
  u0[d] = wmin;
  auto phase2 = detail::solve_qp_active_set(Q, c, A, b, u0);
  if (phase2.status != detail::QpStatus::Optimal)
    fail(ErrorKind::SolverFailure,
         "phase-2 QP stalled on simplex " + detail::simplex_label(sigma));

  FeasibilityResult res;
  res.min_sq_radius = phase2.objective;
  res.feasible = phase2.objective <= r * r + 1e-9;
  if (res.feasible) res.witness = phase2.x.head(d);
  return res;
}

// Plain smallest-enclosing-ball test (the Cech condition): the same program
// with the Voronoi half-spaces dropped.
inline FeasibilityResult simplex_cech_test(const std::vector<int>& sigma,
                                           const std::vector<UnitPoint>& S,
                                           double r) {
  return simplex_alpha_test(sigma, S, r, 4.0, false);
}

// Derivative-free check of the same nerve condition: dense grid over the
// simplex bounding box padded by r, zooming refinement around the incumbent,
// and a Nelder-Mead polish. Any evaluated point with nonpositive violation
// certifies feasibility outright; infeasibility is concluded from the
// refined minimum of the (convex) violation.
inline bool nerve_oracle(const std::vector<int>& sigma,
                         const std::vector<UnitPoint>& S, double r,
                         int resolution) {
  if (sigma.empty()) fail(ErrorKind::DomainError, "empty simplex");
  const int n = static_cast<int>(S.size());
  for (int v : sigma)
    if (v < 0 || v >= n) fail(ErrorKind::DomainError, "simplex index out of range");
  const int d = S[0].dim();
  if (d > 4)
    fail(ErrorKind::DomainError, "oracle limited to ambient dimension <= 4");
  if (resolution < 4)
    fail(ErrorKind::ResolutionTooCoarse, "need at least 4 grid points per axis");

  std::vector<char> in_sigma(static_cast<std::size_t>(n), 0);
  for (int v : sigma) in_sigma[static_cast<std::size_t>(v)] = 1;
  const double r_sq = r * r;
  auto violation = [&](const Vec& x) {
    double worst = -std::numeric_limits<double>::infinity();
    double ball_max = 0.0;
    for (int i : sigma) {
      double di = (x - S[static_cast<std::size_t>(i)].coords()).squaredNorm();
      ball_max = std::max(ball_max, di);
    }
    worst = ball_max - r_sq;
    for (int j = 0; j < n; ++j) {
      if (in_sigma[static_cast<std::size_t>(j)]) continue;
      double dj = (x - S[static_cast<std::size_t>(j)].coords()).squaredNorm();
      worst = std::max(worst, ball_max - dj);
    }
    return worst;
  };

  Vec lo = S[static_cast<std::size_t>(sigma[0])].coords();
  Vec hi = lo;
  for (int v : sigma) {
    lo = lo.cwiseMin(S[static_cast<std::size_t>(v)].coords());
    hi = hi.cwiseMax(S[static_cast<std::size_t>(v)].coords());
  }
  lo.array() -= r;
  hi.array() += r;

  double best = std::numeric_limits<double>::infinity();
  Vec best_x = 0.5 * (lo + hi);
  auto sweep = [&](const Vec& box_lo, const Vec& box_hi) {
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    Vec x(d);
    while (true) {
      for (int k = 0; k < d; ++k) {
        double f = resolution == 1 ? 0.5
                                   : static_cast<double>(idx[static_cast<std::size_t>(k)]) /
                                         (resolution - 1);
        x[k] = box_lo[k] + f * (box_hi[k] - box_lo[k]);
      }
      double v = violation(x);
      if (v < best) {
        best = v;
        best_x = x;
      }
      if (best <= 1e-9) return true;
      int k = 0;
      while (k < d && idx[static_cast<std::size_t>(k)] == resolution - 1) {
        idx[static_cast<std::size_t>(k)] = 0;
        ++k;
      }
      if (k == d) return false;
      ++idx[static_cast<std::size_t>(k)];
    }
  };

  if (sweep(lo, hi)) return true;
  Vec span = hi - lo;
  for (int round = 0; round < 60; ++round) {
    span *= 6.0 / resolution;
    if (span.maxCoeff() < 1e-12) break;
    Vec blo = best_x - 0.5 * span;
    Vec bhi = best_x + 0.5 * span;
    if (sweep(blo, bhi)) return true;
  }

  // Nelder-Mead polish; the violation is convex, so this reliably tightens
  // conical minima the axis-aligned zoom tracks poorly.
  {
    std::vector<Vec> simplex(static_cast<std::size_t>(d + 1), best_x);
    std::vector<double> val(static_cast<std::size_t>(d + 1));
    for (int k = 0; k < d; ++k) simplex[static_cast<std::size_t>(k + 1)][k] += 1e-4;
    for (int k = 0; k <= d; ++k) val[static_cast<std::size_t>(k)] = violation(simplex[static_cast<std::size_t>(k)]);
    for (int it = 0; it < 600; ++it) {
      std::vector<int> ord(static_cast<std::size_t>(d + 1));
      std::iota(ord.begin(), ord.end(), 0);
      std::sort(ord.begin(), ord.end(), [&](int a, int b2) {
        return val[static_cast<std::size_t>(a)] < val[static_cast<std::size_t>(b2)];
      });
      if (val[static_cast<std::size_t>(ord[0])] <= 1e-9) return true;
      Vec centroid = Vec::Zero(d);
      for (int k = 0; k < d; ++k) centroid += simplex[static_cast<std::size_t>(ord[static_cast<std::size_t>(k)])];
      centroid /= static_cast<double>(d);
      int worst = ord[static_cast<std::size_t>(d)];
      Vec refl = centroid + (centroid - simplex[static_cast<std::size_t>(worst)]);
      double fr = violation(refl);
      if (fr < val[static_cast<std::size_t>(ord[0])]) {
        Vec expd = centroid + 2.0 * (centroid - simplex[static_cast<std::size_t>(worst)]);
        double fe = violation(expd);
        if (fe < fr) { simplex[static_cast<std::size_t>(worst)] = expd; val[static_cast<std::size_t>(worst)] = fe; }
        else { simplex[static_cast<std::size_t>(worst)] = refl; val[static_cast<std::size_t>(worst)] = fr; }
      } else if (fr < val[static_cast<std::size_t>(ord[static_cast<std::size_t>(d - 1)])]) {
        simplex[static_cast<std::size_t>(worst)] = refl;
        val[static_cast<std::size_t>(worst)] = fr;
      } else {
        Vec cont = centroid + 0.5 * (simplex[static_cast<std::size_t>(worst)] - centroid);
        double fc = violation(cont);
        if (fc < val[static_cast<std::size_t>(worst)]) {
          simplex[static_cast<std::size_t>(worst)] = cont;
          val[static_cast<std::size_t>(worst)] = fc;
        } else {
          for (int k = 1; k <= d; ++k) {
            int j = ord[static_cast<std::size_t>(k)];
            simplex[static_cast<std::size_t>(j)] =
                simplex[static_cast<std::size_t>(ord[0])] +
                0.5 * (simplex[static_cast<std::size_t>(j)] - simplex[static_cast<std::size_t>(ord[0])]);
            val[static_cast<std::size_t>(j)] = violation(simplex[static_cast<std::size_t>(j)]);
          }
        }
      }
      for (int k = 0; k <= d; ++k) best = std::min(best, val[static_cast<std::size_t>(k)]);
      if (best <= 1e-9) return true;
    }
  }
  return best <= 1e-9;
}

struct BuildOptions {
  double prune_factor = 4.0;
  unsigned threads = 1;
};

// Alpha complex at radius inflate*r up to maxdim: vertices always enter, edge
// candidates come from the neighbor grid, and k-simplices extend (k-1)-simplices
// by common 1-skeleton neighbors, testing only candidates whose faces all
// passed. Face closure holds by construction.
inline SimplicialComplex build_complex(const std::vector<UnitPoint>& S, double r,
                                       int maxdim, double inflate = 1.0,
                                       BuildOptions opts = {}) {
  if (maxdim < 0) fail(ErrorKind::DomainError, "maxdim must be >= 0");
  if (!(inflate >= 1.0)) fail(ErrorKind::DomainError, "inflate must be >= 1");
  const double r_eff = inflate * r;
  const int n = static_cast<int>(S.size());

  SimplicialComplex cx;
  cx.vertices = S;
  cx.simplices_by_dim.assign(static_cast<std::size_t>(maxdim) + 1, {});
  for (int i = 0; i < n; ++i) cx.simplices_by_dim[0].push_back({i});
  if (n == 0 || maxdim == 0) return cx;

  auto test_batch = [&](const std::vector<std::vector<int>>& candidates) {
    std::vector<char> pass(candidates.size(), 0);
    std::optional<Error> first_failure;
    std::mutex mu;
    parallel_for(candidates.size(), opts.threads, [&](std::size_t i) {
      try {
        pass[i] = simplex_alpha_test(candidates[i], S, r_eff, opts.prune_factor)
                      .feasible
                      ? 1
                      : 0;
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_failure) first_failure = e;
      }
    });
    if (first_failure) throw *first_failure;
    return pass;
  };

  // Edges.
  std::vector<std::vector<int>> edge_cands;
  for (auto [i, j] : neighbor_pairs(S, r_eff)) edge_cands.push_back({i, j});
  std::vector<char> edge_pass = test_batch(edge_cands);
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(n));
  for (std::size_t e = 0; e < edge_cands.size(); ++e) {
    if (!edge_pass[e]) continue;
    cx.simplices_by_dim[1].push_back(edge_cands[e]);
    adjacency[static_cast<std::size_t>(edge_cands[e][0])].push_back(edge_cands[e][1]);
    adjacency[static_cast<std::size_t>(edge_cands[e][1])].push_back(edge_cands[e][0]);
  }
  for (auto& a : adjacency) std::sort(a.begin(), a.end());

  std::unordered_set<std::vector<int>, detail::TupleHash> present(
      cx.simplices_by_dim[1].begin(), cx.simplices_by_dim[1].end());

  for (int k = 2; k <= maxdim; ++k) {
    const auto& lower = cx.simplices_by_dim[static_cast<std::size_t>(k - 1)];
    std::vector<std::vector<int>> cands;
    for (const auto& s : lower) {
      // common neighbors above max(s)
      std::vector<int> common = adjacency[static_cast<std::size_t>(s[0])];
      for (std::size_t v = 1; v < s.size(); ++v) {
        std::vector<int> merged;
        std::set_intersection(common.begin(), common.end(),
                              adjacency[static_cast<std::size_t>(s[v])].begin(),
                              adjacency[static_cast<std::size_t>(s[v])].end(),
                              std::back_inserter(merged));
        common.swap(merged);
      }
      for (int j : common) {
        if (j <= s.back()) continue;
        std::vector<int> cand = s;
        cand.push_back(j);
        bool faces_ok = true;
        for (std::size_t drop = 0; drop + 1 < cand.size() && faces_ok; ++drop) {
          std::vector<int> face;
          for (std::size_t t = 0; t < cand.size(); ++t)
            if (t != drop) face.push_back(cand[t]);
          faces_ok = present.count(face) > 0;
        }
        if (faces_ok) cands.push_back(std::move(cand));
      }
    }
    std::vector<char> pass = test_batch(cands);
    auto& level = cx.simplices_by_dim[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (pass[i]) level.push_back(cands[i]);
    present.clear();
    present.insert(level.begin(), level.end());
    if (level.empty()) break;
  }
  return cx;
}

}  // namespace spherot
