#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "spherot/core.hpp"

namespace spherot {

constexpr double kUnitNormTol = 1e-12;
constexpr double kOrthoTol = 1e-10;
constexpr double kDegenerateTol = 1e-14;

// A point of S^{d-1}, d >= 2. Unit norm is enforced at construction and
// re-checked (never silently re-normalized) so upstream drift surfaces here.
class UnitPoint {
 public:
  explicit UnitPoint(Vec coords) : coords_(std::move(coords)) {
    if (coords_.size() < 2)
      fail(ErrorKind::DimensionOutOfRange, "unit point needs d >= 2");
    if (std::abs(coords_.norm() - 1.0) > kUnitNormTol)
      fail(ErrorKind::DomainError, "coordinates are not unit norm");
  }

  const Vec& coords() const { return coords_; }
  int dim() const { return static_cast<int>(coords_.size()); }
  double operator[](int i) const { return coords_[i]; }

  double dot(const UnitPoint& other) const { return coords_.dot(other.coords_); }

 private:
  Vec coords_;
};

struct TangentVector {
  TangentVector(UnitPoint base_point, Vec v)
      : base(std::move(base_point)), vec(std::move(v)) {
    if (vec.size() != base.coords().size())
      fail(ErrorKind::DimensionOutOfRange, "tangent vector dimension mismatch");
    if (std::abs(vec.dot(base.coords())) > kOrthoTol * std::max(1.0, vec.norm()))
      fail(ErrorKind::DomainError, "vector is not tangent to the base point");
  }

  UnitPoint base;
  Vec vec;
};

// rho(v) = v / ||v||.
inline UnitPoint normalize(const Vec& v) {
  double n = v.norm();
  if (n <= kDegenerateTol) fail(ErrorKind::ZeroVector, "cannot normalize");
  return UnitPoint(v / n);
}

// phi_x(y) = y / (y.x), the gnomonic chart of the open hemisphere H+(x)
// onto the affine tangent plane {z : z.x = 1}.
inline Vec tangent_chart(const UnitPoint& x, const UnitPoint& y) {
  double d = x.dot(y);
  if (d <= 0.0)
    fail(ErrorKind::OutsideHemisphere, "chart point not in open hemisphere");
  return y.coords() / d;
}

// rho((1-s) x + s y); the constant-speed parametrization of the chord,
// tracing the geodesic arc from x (s=0) to y (s=1).
inline UnitPoint geodesic_point(const UnitPoint& x, const UnitPoint& y, double s) {
  Vec chord = (1.0 - s) * x.coords() + s * y.coords();
  if (chord.norm() <= kDegenerateTol)
    fail(ErrorKind::AntipodalPoints, "chord passes through the origin");
  return normalize(chord);
}

// A linear subspace given by an orthonormal basis, stored as columns.
class Subspace {
 public:
  explicit Subspace(Mat basis_columns) : basis_(std::move(basis_columns)) {
    if (basis_.cols() < 1 || basis_.rows() < basis_.cols())
      fail(ErrorKind::DimensionOutOfRange, "invalid subspace basis shape");
    Mat gram = basis_.transpose() * basis_;
    if (!gram.isApprox(Mat::Identity(basis_.cols(), basis_.cols()), kOrthoTol))
      fail(ErrorKind::DomainError, "subspace basis is not orthonormal");
  }

  static Subspace span_of_coordinates(int ambient_dim, const std::vector<int>& axes) {
    Mat b = Mat::Zero(ambient_dim, static_cast<Eigen::Index>(axes.size()));
    for (std::size_t j = 0; j < axes.size(); ++j) b(axes[j], static_cast<Eigen::Index>(j)) = 1.0;
    return Subspace(b);
  }

  int ambient_dim() const { return static_cast<int>(basis_.rows()); }
  int dim() const { return static_cast<int>(basis_.cols()); }
  const Mat& basis() const { return basis_; }

  Vec project(const Vec& v) const { return basis_ * (basis_.transpose() * v); }
  // Coordinates of proj_V(v) with respect to the stored basis.
  Vec coords_in(const Vec& v) const { return basis_.transpose() * v; }
  Vec embed(const Vec& subspace_coords) const { return basis_ * subspace_coords; }

 private:
  Mat basis_;
};

// rho(proj_V(x)): the point of S(V) = V cap S^{d-1} closest in angle to x.
inline UnitPoint project_sphere(const UnitPoint& x, const Subspace& V) {
  Vec p = V.project(x.coords());
  if (p.norm() <= kDegenerateTol)
    fail(ErrorKind::ZeroProjection, "point is orthogonal to the subspace");
  return normalize(p);
}

}  // namespace spherot
