#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "spherot/kde.hpp"

namespace testutil {

using spherot::KdeModel;
using spherot::Mat;
using spherot::UnitPoint;
using spherot::Vec;

inline UnitPoint random_unit_point(std::mt19937_64& eng, int d) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(d);
  do {
    for (int i = 0; i < d; ++i) v[i] = gauss(eng);
  } while (v.norm() < 1e-8);
  return spherot::normalize(v);
}

inline std::vector<UnitPoint> random_unit_points(std::mt19937_64& eng, int n, int d) {
  std::vector<UnitPoint> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pts.push_back(random_unit_point(eng, d));
  return pts;
}

inline KdeModel random_model(std::mt19937_64& eng, int n, int d, double t,
                             bool random_weights = false) {
  auto pts = random_unit_points(eng, n, d);
  Vec w = Vec::Ones(n);
  if (random_weights) {
    std::uniform_real_distribution<double> u(0.2, 2.0);
    for (int i = 0; i < n; ++i) w[i] = u(eng);
  }
  return KdeModel(pts, w, t);
}

// Circle model from explicit angles.
inline KdeModel circle_model(const std::vector<double>& angles, double t,
                             const std::vector<double>& weights = {}) {
  std::vector<UnitPoint> pts;
  Vec w(static_cast<Eigen::Index>(angles.size()));
  for (std::size_t i = 0; i < angles.size(); ++i) {
    Vec v(2);
    v << std::cos(angles[i]), std::sin(angles[i]);
    pts.push_back(UnitPoint(v));
    w[static_cast<Eigen::Index>(i)] = weights.empty() ? 1.0 : weights[i];
  }
  return KdeModel(pts, w, t);
}

// A point in supp(f), found by jittering data points.
inline UnitPoint random_support_point(std::mt19937_64& eng, const KdeModel& m) {
  std::uniform_int_distribution<int> pick(0, m.size() - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vec base = m.points().col(pick(eng));
    Vec v(m.dim());
    for (int i = 0; i < m.dim(); ++i) v[i] = gauss(eng);
    v = base + 0.35 * v;
    if (v.norm() < 1e-8) continue;
    UnitPoint p = spherot::normalize(v);
    if (spherot::density(m, p) > 1e-12) return p;
  }
  return m.point(0);
}

// Central intrinsic finite difference of psi along a tangent direction:
// step along the tangent, re-normalize, difference the log densities.
inline double fd_directional_derivative(const KdeModel& m, const UnitPoint& x,
                                        const Vec& dir, double h) {
  auto psi_at = [&](double s) {
    Vec v = x.coords() + s * dir;
    return std::log(spherot::density_moment(m, v / v.norm()).density);
  };
  return (psi_at(h) - psi_at(-h)) / (2.0 * h);
}

// Orthonormal tangent frame at x (d-1 directions).
inline std::vector<Vec> tangent_frame(const UnitPoint& x) {
  const int d = x.dim();
  std::vector<Vec> frame;
  for (int j = 0; j < d && static_cast<int>(frame.size()) < d - 1; ++j) {
    Vec v = Vec::Unit(d, j);
    v -= v.dot(x.coords()) * x.coords();
    for (const Vec& b : frame) v -= v.dot(b) * b;
    double n = v.norm();
    if (n > 1e-6) frame.push_back(v / n);
  }
  return frame;
}

// Regularized lower incomplete gamma P(a, x), series + continued fraction.
inline double regularized_gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) return 0.0;
  if (x == 0.0) return 0.0;
  double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-14) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-14) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

// chi^2 upper critical value for the given dof and tail probability.
inline double chi2_critical(int dof, double tail) {
  double lo = 0.0, hi = 1e4;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double cdf = regularized_gamma_p(dof / 2.0, mid / 2.0);
    if (cdf < 1.0 - tail)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// psi^cc versus psi on circle grids: conjugates from the brute-force oracle
// on an ny-grid, then the supremum over y for each of nx query angles.
// psi^c is an infimum with corners, so the grid supremum gets a parabolic
// polish plus golden maximization inside the competitive brackets.
struct PsiCcCheck {
  double max_gap = 0.0;     // max (psi - sup), the envelope shortfall
  double max_excess = 0.0;  // max (term - psi), the c-convexity direction
};

inline PsiCcCheck psi_cc_check(const KdeModel& m, int ny, int nx,
                               unsigned threads) {
  const double t = m.exponent();
  spherot::ConjugateBruteforceOptions opt;
  opt.divergence_floor = -1e4;
  auto cp = [](double u) {
    Vec v(2);
    v << std::cos(u), std::sin(u);
    return UnitPoint(v);
  };

  std::vector<double> yang(ny), psic(ny);
  spherot::parallel_for(ny, threads, [&](std::size_t k) {
    yang[k] = -M_PI + 2 * M_PI * (k + 0.5) / ny;
    spherot::LogValue v = spherot::conjugate_bruteforce(m, cp(yang[k]), ny, opt);
    psic[k] = v.is_neg_inf() ? -std::numeric_limits<double>::infinity()
                             : v.finite_value();
  });

  std::vector<double> gaps(nx, 0.0), excesses(nx, 0.0);
  spherot::parallel_for(nx, threads, [&](std::size_t k) {
    double u = -M_PI + 2 * M_PI * (k + 0.5) / nx;
    double f = spherot::density(m, cp(u));
    if (f <= 0.0) return;
    double psi = std::log(f);
    auto term = [&](int j) {
      if (std::isinf(psic[j])) return -std::numeric_limits<double>::infinity();
      double cd = std::cos(u - yang[j]);
      if (cd <= 0.0) return -std::numeric_limits<double>::infinity();
      return psic[j] + t * std::log(cd);
    };
    std::vector<double> vals(ny);
    double best = -std::numeric_limits<double>::infinity();
    int best_j = -1;
    for (int j = 0; j < ny; ++j) {
      vals[j] = term(j);
      if (vals[j] > best) { best = vals[j]; best_j = j; }
      if (std::isfinite(vals[j]))
        excesses[k] = std::max(excesses[k], vals[j] - psi);
    }
    if (best_j < 0) return;
    double vm = vals[(best_j + ny - 1) % ny], vp = vals[(best_j + 1) % ny];
    if (std::isfinite(vm) && std::isfinite(vp)) {
      double den = vm - 2 * best + vp;
      if (den < -1e-12) best += (vm - vp) * (vm - vp) / (-8.0 * den);
    }
    if (psi - best > 5e-4) {
      // collect competitive local maxima brackets and golden-maximize the
      // exact term inside each
      std::vector<int> brackets;
      for (int j = 0; j < ny; ++j) {
        if (!std::isfinite(vals[j])) continue;
        double l = vals[(j + ny - 1) % ny], r = vals[(j + 1) % ny];
        if (vals[j] >= l && vals[j] >= r && vals[j] > best - 1.0)
          brackets.push_back(j);
      }
      std::sort(brackets.begin(), brackets.end(),
                [&](int a, int b) { return vals[a] > vals[b]; });
      if (brackets.size() > 4) brackets.resize(4);
      auto exact_term = [&](double y) {
        double cd = std::cos(u - y);
        if (cd <= 0.0) return -1e300;
        spherot::LogValue v = spherot::conjugate_bruteforce(m, cp(y), 200, opt);
        if (v.is_neg_inf()) return -1e300;
        return v.finite_value() + t * std::log(cd);
      };
      const double du = 2 * M_PI / ny;
      for (int j : brackets) {
        double lo = yang[j] - du, hi = yang[j] + du;
        const double inv_phi = 0.6180339887498949;
        double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
        double f1 = exact_term(x1), f2 = exact_term(x2);
        best = std::max(best, std::max(f1, f2));
        for (int it = 0; it < 48; ++it) {
          if (f1 >= f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = exact_term(x1);
          } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = exact_term(x2);
          }
          best = std::max(best, std::max(f1, f2));
        }
      }
    }
    gaps[k] = std::max(psi - best, 0.0);
  });

  PsiCcCheck out;
  for (int k = 0; k < nx; ++k) {
    out.max_gap = std::max(out.max_gap, gaps[k]);
    out.max_excess = std::max(out.max_excess, excesses[k]);
  }
  return out;
}

// Independent GF(2) rank: dense byte-matrix row-echelon elimination.
inline int dense_mod2_rank(std::vector<std::vector<int>> m) {
  if (m.empty() || m[0].empty()) return 0;
  std::size_t rows = m.size(), cols = m[0].size();
  int rank = 0;
  std::size_t row = 0;
  for (std::size_t col = 0; col < cols && row < rows; ++col) {
    std::size_t pivot = row;
    while (pivot < rows && m[pivot][col] % 2 == 0) ++pivot;
    if (pivot == rows) continue;
    std::swap(m[pivot], m[row]);
    for (std::size_t r = 0; r < rows; ++r) {
      if (r != row && m[r][col] % 2 == 1)
        for (std::size_t c = 0; c < cols; ++c) m[r][c] = (m[r][c] + m[row][c]) % 2;
    }
    ++row;
    ++rank;
  }
  return rank;
}

}  // namespace testutil
