#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "spherot/sphere.hpp"

namespace spherot {

// Cosine-similarity kernel density model on S^{d-1}:
//   f(x) = sum_i a_i max(x . x_i, 0)^t,  t > 1.
// Immutable after construction; every evaluation below is pure, so queries
// can run concurrently without restriction.
class KdeModel {
 public:
  KdeModel(Mat points_columns, Vec weights, double exponent)
      : points_(std::move(points_columns)),
        weights_(std::move(weights)),
        exponent_(exponent) {
    if (points_.cols() == 0) fail(ErrorKind::EmptyModel, "no data points");
    if (points_.rows() < 2)
      fail(ErrorKind::DimensionOutOfRange, "model needs ambient d >= 2");
    if (weights_.size() != points_.cols())
      fail(ErrorKind::DimensionOutOfRange, "one weight per point required");
    if (!(exponent_ > 1.0))
      fail(ErrorKind::DomainError, "exponent t must exceed 1");
    for (Eigen::Index i = 0; i < weights_.size(); ++i)
      if (!(weights_[i] > 0.0))
        fail(ErrorKind::DomainError, "weights must be positive");
    for (Eigen::Index i = 0; i < points_.cols(); ++i)
      if (std::abs(points_.col(i).norm() - 1.0) > kUnitNormTol)
        fail(ErrorKind::DomainError, "data point is not unit norm");
  }

  KdeModel(const std::vector<UnitPoint>& points, Vec weights, double exponent)
      : KdeModel(pack(points), std::move(weights), exponent) {}

  static KdeModel uniform_weights(const std::vector<UnitPoint>& points,
                                  double exponent) {
    return KdeModel(points, Vec::Ones(static_cast<Eigen::Index>(points.size())),
                    exponent);
  }

  int dim() const { return static_cast<int>(points_.rows()); }
  int size() const { return static_cast<int>(points_.cols()); }
  double exponent() const { return exponent_; }
  const Mat& points() const { return points_; }
  const Vec& weights() const { return weights_; }
  UnitPoint point(int i) const { return UnitPoint(points_.col(i)); }

 private:
  static Mat pack(const std::vector<UnitPoint>& pts) {
    if (pts.empty()) fail(ErrorKind::EmptyModel, "no data points");
    Mat m(pts[0].dim(), static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i].dim() != pts[0].dim())
        fail(ErrorKind::DimensionOutOfRange, "mixed ambient dimensions");
      m.col(static_cast<Eigen::Index>(i)) = pts[i].coords();
    }
    return m;
  }

  Mat points_;
  Vec weights_;
  double exponent_;
};

// K_t(x, y) = (x.y)^t on the open hemisphere, 0 elsewhere.
inline double kernel(const UnitPoint& x, const UnitPoint& y, double t) {
  if (!(t > 1.0)) fail(ErrorKind::DomainError, "kernel exponent t must exceed 1");
  double d = x.dot(y);
  return d > 0.0 ? std::pow(d, t) : 0.0;
}

// c(x, y) = -t log(x.y) on the open hemisphere, +infinity elsewhere.
inline double cost(const UnitPoint& x, const UnitPoint& y, double t) {
  if (!(t > 1.0)) fail(ErrorKind::DomainError, "cost exponent t must exceed 1");
  double d = x.dot(y);
  if (d <= 0.0) return std::numeric_limits<double>::infinity();
  return -t * std::log(std::min(d, 1.0));
}

namespace detail {

inline void neumaier_add(double& sum, double& comp, double x) {
  double t = sum + x;
  if (std::abs(sum) >= std::abs(x))
    comp += (sum - t) + x;
  else
    comp += (x - t) + sum;
  sum = t;
}

}  // namespace detail

// One pass over the data: the density f(x) and the first kernel moment
//   moment = sum_i a_i (x.x_i)^{t-1} x_i,
// which satisfies moment.x = f(x) and rho(moment) = T(x).
struct DensityMoment {
  double density = 0.0;
  Vec moment;
};

inline DensityMoment density_moment(const KdeModel& m, const Vec& x) {
  const int d = m.dim();
  const double tm1 = m.exponent() - 1.0;
  double fs = 0.0, fc = 0.0;
  Vec ms = Vec::Zero(d), mc = Vec::Zero(d);
  const Mat& P = m.points();
  const Vec& a = m.weights();
  for (Eigen::Index i = 0; i < P.cols(); ++i) {
    double dot = P.col(i).dot(x);
    if (dot <= 0.0) continue;
    double pw = a[i] * std::pow(dot, tm1);
    detail::neumaier_add(fs, fc, pw * dot);
    for (int j = 0; j < d; ++j) detail::neumaier_add(ms[j], mc[j], pw * P(j, i));
  }
  DensityMoment out;
  out.density = fs + fc;
  out.moment = ms + mc;
  return out;
}

inline double density(const KdeModel& m, const UnitPoint& x) {
  return density_moment(m, x.coords()).density;
}

inline bool in_support(const KdeModel& m, const UnitPoint& x) {
  return density(m, x) > 0.0;
}

// psi(x) = log f(x); -infinity tags points outside supp(f).
inline LogValue log_density(const KdeModel& m, const UnitPoint& x) {
  double f = density(m, x);
  if (f <= 0.0) return LogValue::neg_inf();
  return LogValue::finite(std::log(f));
}

// Intrinsic gradient of psi at x:
//   grad psi(x) = t f(x)^{-1} sum_i a_i K_t(x, x_i) (phi_x(x_i) - x),
// a vector of T_x S^{d-1}.
inline TangentVector grad_log_density(const KdeModel& m, const UnitPoint& x) {
  DensityMoment dm = density_moment(m, x.coords());
  if (!(dm.density > 0.0))
    fail(ErrorKind::OutsideSupport, "gradient undefined outside supp(f)");
  Vec g = m.exponent() * (dm.moment / dm.density - x.coords());
  g -= g.dot(x.coords()) * x.coords();
  return TangentVector(x, g);
}

// T(x) = rho( f(x)^{-1} sum_i a_i K_t(x, x_i) phi_x(x_i) ), the unique
// solution of grad psi(x) + grad_x c(x, y) = 0. Always lands in H+(x).
inline UnitPoint transport(const KdeModel& m, const UnitPoint& x) {
  DensityMoment dm = density_moment(m, x.coords());
  if (!(dm.density > 0.0))
    fail(ErrorKind::OutsideSupport, "transport undefined outside supp(f)");
  return normalize(dm.moment);
}

// A mu-sample with its transport image and the conjugate value there.
struct TransportedSample {
  TransportedSample(UnitPoint src, UnitPoint img, double conj)
      : source(std::move(src)), image(std::move(img)), conjugate_value(conj) {
    if (!(source.dot(image) > 0.0))
      fail(ErrorKind::DomainError, "transport image left the open hemisphere");
  }

  UnitPoint source;
  UnitPoint image;
  double conjugate_value;
};

// psi^c(T(x)) = psi(x) + c(x, T(x)). With s = sum_i a_i (x.x_i)^{t-1} x_i
// this collapses to t log ||s|| - (t-1) log f, which is what we evaluate:
// x.s = f(x) makes the cost term exactly -t (log f - log ||s||).
inline TransportedSample conjugate_at_transport(const KdeModel& m,
                                                const UnitPoint& x) {
  DensityMoment dm = density_moment(m, x.coords());
  if (!(dm.density > 0.0))
    fail(ErrorKind::OutsideSupport, "conjugate undefined outside supp(f)");
  double t = m.exponent();
  double conj = t * std::log(dm.moment.norm()) - (t - 1.0) * std::log(dm.density);
  return TransportedSample(x, normalize(dm.moment), conj);
}

// Angular transport lift on the circle:
//   Ttilde(u) = u + atan( ftilde(u)^{-1} sum_i a_i max(cos(u - u_i), 0)^t tan(u_i - u) ),
// continuous on supp(ftilde) with |Ttilde(u) - u| < pi/2. The summand is
// evaluated as cos^{t-1} * sin to stay finite at the hemisphere edge.
inline double circle_lift(const KdeModel& m, double u) {
  if (m.dim() != 2)
    fail(ErrorKind::DimensionOutOfRange, "circle lift needs a model on S^1");
  const double tm1 = m.exponent() - 1.0;
  double fs = 0.0, fc = 0.0, ss = 0.0, sc = 0.0;
  for (int i = 0; i < m.size(); ++i) {
    double ui = std::atan2(m.points()(1, i), m.points()(0, i));
    double cosd = std::cos(u - ui);
    if (cosd <= 0.0) continue;
    double pw = m.weights()[i] * std::pow(cosd, tm1);
    detail::neumaier_add(fs, fc, pw * cosd);
    detail::neumaier_add(ss, sc, pw * std::sin(ui - u));
  }
  double f = fs + fc;
  if (!(f > 0.0))
    fail(ErrorKind::OutsideSupport, "angle outside supp(f)");
  return u + std::atan2(ss + sc, f);
}

// Restriction of the model to S(V): project the data, reweight by
// ||proj_V(x_i)||^t, drop points that project to zero. The returned model
// lives in the coordinates of V's stored basis (ambient dim = dim V).
inline KdeModel restrict_model(const KdeModel& m, const Subspace& V) {
  if (V.dim() < 2)
    fail(ErrorKind::DimensionOutOfRange, "restriction needs dim V >= 2");
  if (V.ambient_dim() != m.dim())
    fail(ErrorKind::DimensionOutOfRange, "subspace ambient dim mismatch");
  std::vector<Vec> cols;
  std::vector<double> weights;
  for (int i = 0; i < m.size(); ++i) {
    Vec xi = V.coords_in(m.points().col(i));
    double n = xi.norm();
    if (n <= kDegenerateTol) continue;
    cols.push_back(xi / n);
    weights.push_back(std::pow(n, m.exponent()) * m.weights()[i]);
  }
  if (cols.empty())
    fail(ErrorKind::EmptyModel, "every data point projects to zero");
  Mat P(V.dim(), static_cast<Eigen::Index>(cols.size()));
  Vec a(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    P.col(static_cast<Eigen::Index>(i)) = cols[i];
    a[static_cast<Eigen::Index>(i)] = weights[i];
  }
  return KdeModel(std::move(P), std::move(a), m.exponent());
}

// Closest point to x on the cost ball B_c(y; psi^c(y) - a) for y = T(x):
// the endpoint of the retract trajectory. Stays put when psi(x) >= a,
// otherwise slides along the geodesic toward y until x'.y = exp(-rho_max/t).
inline UnitPoint cap_retract_point(const KdeModel& m, const UnitPoint& x,
                                   double a) {
  TransportedSample ts = conjugate_at_transport(m, x);
  double rho_max = ts.conjugate_value - a;
  if (rho_max < 0.0)
    fail(ErrorKind::BelowThreshold, "psi^c(T(x)) < a: empty retract ball");
  double t = m.exponent();
  double c_xy = cost(x, ts.image, t);
  if (c_xy <= rho_max) return x;
  // Slerp from x toward y down to the cap boundary angle.
  double theta0 = std::acos(std::clamp(x.dot(ts.image), -1.0, 1.0));
  double theta1 = std::acos(std::clamp(std::exp(-rho_max / t), 0.0, 1.0));
  double phi = theta0 - theta1;
  double s0 = std::sin(theta0);
  Vec xp = (std::sin(theta0 - phi) * x.coords() + std::sin(phi) * ts.image.coords()) / s0;
  return normalize(xp);
}

// --- brute-force c-transform -------------------------------------------------

struct ConjugateBruteforceOptions {
  double divergence_floor = -1e6;  // running infimum below this => -infinity
  int refine_rounds = 2;           // extra grid-doubling passes
};

namespace detail {

// The infimum decays like t*log(distance to the support boundary), so no
// finite minimum can numerically live below t*log(1e-13): clamp the floor
// to the value reachable only by riding the boundary wall.
inline double effective_floor(double user_floor, double t) {
  return std::max(user_floor, std::max(t * std::log(1e-13), -700.0));
}

}  // namespace detail

namespace detail {

// psi + c objective (in angle) for circle models; +inf off the domain.
inline double angular_objective(const KdeModel& m, double u, double v) {
  double cd = std::cos(u - v);
  if (cd <= 0.0) return std::numeric_limits<double>::infinity();
  double fs = 0.0, fc = 0.0;
  const double t = m.exponent();
  for (int i = 0; i < m.size(); ++i) {
    double ui = std::atan2(m.points()(1, i), m.points()(0, i));
    double c = std::cos(u - ui);
    if (c <= 0.0) continue;
    neumaier_add(fs, fc, m.weights()[i] * std::pow(c, t));
  }
  double f = fs + fc;
  if (!(f > 0.0)) return std::numeric_limits<double>::infinity();
  return std::log(f) - t * std::log(cd);
}

// Golden-section descent of fn over [lo, hi]. Returns the best value seen;
// bails out early once values drop below `floor` (the divergent regime).
template <class F>
double golden_min(F&& fn, double lo, double hi, double floor, int max_iter) {
  const double inv_phi = 0.6180339887498949;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = fn(x1), f2 = fn(x2);
  double best = std::min(f1, f2);
  for (int it = 0; it < max_iter && hi - lo > 1e-15; ++it) {
    if (f1 <= f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = fn(x1);
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = fn(x2);
    }
    best = std::min(best, std::min(f1, f2));
    if (best < floor) return best;
  }
  return best;
}

inline LogValue conjugate_bruteforce_circle(const KdeModel& m, const UnitPoint& y,
                                            int grid,
                                            const ConjugateBruteforceOptions& opt) {
  const double v = std::atan2(y[1], y[0]);
  const double t = m.exponent();
  const double floor = effective_floor(opt.divergence_floor, t);
  // Enough golden steps to certify divergence: each one shaves roughly
  // t*log(1/phi) off the running value in the divergent regime.
  const int max_iter =
      static_cast<int>(std::ceil(std::abs(floor) / (t * 0.4))) + 4000;
  double prev = std::numeric_limits<double>::infinity();
  for (int round = 0; round <= opt.refine_rounds; ++round) {
    int n = grid << round;
    double du = M_PI / n;
    std::vector<double> vals(static_cast<std::size_t>(n));
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      double u = v - M_PI / 2 + (k + 0.5) * du;
      vals[static_cast<std::size_t>(k)] = angular_objective(m, u, v);
      best = std::min(best, vals[static_cast<std::size_t>(k)]);
    }
    if (best == std::numeric_limits<double>::infinity())
      return LogValue::neg_inf();  // H+(y) misses supp(f): y not in im(T)
    if (best < floor) return LogValue::neg_inf();
    // Descend into every competitive local basin, not just the best bracket:
    // the infimum has branch crossings where the runner-up basin wins after
    // refinement.
    std::vector<int> basins;
    for (int k = 0; k < n; ++k) {
      double c = vals[static_cast<std::size_t>(k)];
      if (std::isinf(c)) continue;
      double left = k > 0 ? vals[static_cast<std::size_t>(k - 1)]
                          : std::numeric_limits<double>::infinity();
      double right = k + 1 < n ? vals[static_cast<std::size_t>(k + 1)]
                               : std::numeric_limits<double>::infinity();
      if (c <= left && c <= right) basins.push_back(k);
    }
    std::sort(basins.begin(), basins.end(),
              [&](int a, int b) { return vals[static_cast<std::size_t>(a)] <
                                         vals[static_cast<std::size_t>(b)]; });
    if (basins.size() > 4) basins.resize(4);
    for (int k : basins) {
      double u = v - M_PI / 2 + (k + 0.5) * du;
      double refined = golden_min(
          [&](double uu) { return angular_objective(m, uu, v); },
          u - du, u + du, floor, max_iter);
      best = std::min(best, refined);
      if (best < floor) return LogValue::neg_inf();
    }
    if (std::abs(best - prev) < 1e-10) return LogValue::finite(std::min(best, prev));
    prev = std::min(best, prev);
  }
  return LogValue::finite(prev);
}

inline LogValue conjugate_bruteforce_general(const KdeModel& m, const UnitPoint& y,
                                             int grid,
                                             const ConjugateBruteforceOptions& opt) {
  const double t = m.exponent();
  const double floor = effective_floor(opt.divergence_floor, t);
  const int d = m.dim();
  auto objective = [&](const Vec& xv) {
    double cd = xv.dot(y.coords());
    if (cd <= 0.0) return std::numeric_limits<double>::infinity();
    double f = density_moment(m, xv).density;
    if (!(f > 0.0)) return std::numeric_limits<double>::infinity();
    return std::log(f) - t * std::log(std::min(cd, 1.0));
  };

  // Deterministic hemisphere sample: gaussian points reflected into H+(y).
  std::mt19937_64 eng(0x5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec best_x = y.coords();
  double best = objective(best_x);
  for (int k = 0; k < grid; ++k) {
    Vec z(d);
    for (int j = 0; j < d; ++j) z[j] = gauss(eng);
    double n = z.norm();
    if (n <= kDegenerateTol) continue;
    z /= n;
    double dy = z.dot(y.coords());
    if (dy < 0.0) { z -= 2.0 * dy * y.coords(); }
    double val = objective(z);
    if (val < best) { best = val; best_x = z; }
  }
  if (best == std::numeric_limits<double>::infinity()) return LogValue::neg_inf();

  // Intrinsic gradient descent with backtracking from the best sample.
  Vec x = best_x;
  for (int it = 0; it < 4000; ++it) {
    DensityMoment dm = density_moment(m, x);
    if (!(dm.density > 0.0)) break;
    double cd = x.dot(y.coords());
    if (cd <= 0.0) break;
    Vec grad = t * (dm.moment / dm.density - x) - t * (y.coords() / cd - x);
    grad -= grad.dot(x) * x;
    double gn = grad.norm();
    if (gn < 1e-12) break;
    double step = 1.0 / t;
    double fx = objective(x);
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Vec cand = x - step * grad;
      double n = cand.norm();
      if (n > kDegenerateTol) {
        cand /= n;
        double fv = objective(cand);
        if (fv < fx - 1e-4 * step * gn * gn) {
          x = cand;
          best = std::min(best, fv);
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (best < floor) return LogValue::neg_inf();
    if (!moved) break;
  }
  return LogValue::finite(best);
}

}  // namespace detail

// Grid approximation of psi^c(y) = inf_x (psi(x) + c(x, y)): dense sampling
// of H+(y), then local descent from the best sample. Reports -infinity when
// the running infimum crosses opt.divergence_floor (y outside im(T)) or when
// H+(y) never meets supp(f).
inline LogValue conjugate_bruteforce(const KdeModel& m, const UnitPoint& y,
                                     int grid,
                                     const ConjugateBruteforceOptions& opt = {}) {
  if (grid < 100) fail(ErrorKind::DomainError, "brute-force grid must be >= 100");
  if (m.dim() == 2) return detail::conjugate_bruteforce_circle(m, y, grid, opt);
  return detail::conjugate_bruteforce_general(m, y, grid, opt);
}

}  // namespace spherot
