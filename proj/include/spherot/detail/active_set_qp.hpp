#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "spherot/core.hpp"

namespace spherot::detail {

// Primal active-set method for
//     minimize 1/2 x'Qx + c'x   subject to  A x <= b
// with Q symmetric positive semidefinite (Q = 0 gives an LP). Instances here
// are tiny (n <= 8, a few dozen rows), so every subproblem is solved densely.
// The caller must supply a feasible starting point.

enum class QpStatus { Optimal, Unbounded, IterationLimit };

struct QpSolution {
  QpStatus status = QpStatus::IterationLimit;
  Vec x;
  double objective = 0.0;
  int iterations = 0;
};

inline QpSolution solve_qp_active_set(const Mat& Q, const Vec& c, const Mat& A,
                                      const Vec& b, Vec x0, int max_iter = 400) {
  const int n = static_cast<int>(Q.rows());
  const int m = static_cast<int>(A.rows());
  const double act_tol = 1e-11;
  const double dir_tol = 1e-11;
  const double mult_tol = 1e-9;

  Vec x = std::move(x0);
  std::vector<int> work;  // active rows, kept linearly independent
  std::vector<char> in_work(static_cast<std::size_t>(m), 0);

  // Seed the working set with active constraints, keeping rows independent.
  {
    Eigen::ColPivHouseholderQR<Mat> rank_qr;
    Mat rows(0, n);
    for (int i = 0; i < m; ++i) {
      if (static_cast<int>(work.size()) >= n) break;
      if (std::abs(A.row(i).dot(x) - b[i]) > act_tol) continue;
      Mat cand(rows.rows() + 1, n);
      cand << rows, A.row(i);
      rank_qr.compute(cand.transpose());
      rank_qr.setThreshold(1e-10);
      if (rank_qr.rank() == cand.rows()) {
        rows = cand;
        work.push_back(i);
        in_work[static_cast<std::size_t>(i)] = 1;
      }
    }
  }

  auto objective = [&](const Vec& v) { return 0.5 * v.dot(Q * v) + c.dot(v); };

  QpSolution sol;
  for (int iter = 0; iter < max_iter; ++iter) {
    sol.iterations = iter + 1;
    const int mw = static_cast<int>(work.size());
    Vec g = Q * x + c;

    Mat AWt(n, mw);
    for (int k = 0; k < mw; ++k) AWt.col(k) = A.row(work[static_cast<std::size_t>(k)]).transpose();
    Eigen::HouseholderQR<Mat> qr;
    if (mw > 0) qr.compute(AWt);

    // Step from the equality-constrained subproblem on the null space of A_W.
    Vec p = Vec::Zero(n);
    bool ray = false;
    if (mw < n) {
      Mat Z;
      if (mw == 0) {
        Z = Mat::Identity(n, n);
      } else {
        Mat Qfull = qr.householderQ();
        Z = Qfull.rightCols(n - mw);
      }
      Mat H = Z.transpose() * Q * Z;
      Vec rhs = -Z.transpose() * g;
      Eigen::SelfAdjointEigenSolver<Mat> eig(H);
      const Vec& ev = eig.eigenvalues();
      double tau = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
      Vec r = eig.eigenvectors().transpose() * rhs;
      Vec null_part = Vec::Zero(r.size());
      Vec range_step = Vec::Zero(r.size());
      for (int k = 0; k < r.size(); ++k) {
        if (ev[k] <= tau)
          null_part[k] = r[k];
        else
          range_step[k] = r[k] / ev[k];
      }
      if (null_part.norm() > dir_tol * (1.0 + g.norm())) {
        p = Z * (eig.eigenvectors() * null_part);  // descent ray: Qp ~ 0, g'p < 0
        ray = true;
      } else {
        p = Z * (eig.eigenvectors() * range_step);
      }
    }

    if (!ray && p.norm() <= dir_tol * (1.0 + x.norm())) {
      if (mw == 0) {
        sol.status = QpStatus::Optimal;
        sol.x = x;
        sol.objective = objective(x);
        return sol;
      }
      Vec lambda = qr.solve(-g);
      int drop = -1;
      double most_negative = -mult_tol;
      for (int k = 0; k < mw; ++k) {
        // Bland-style smallest index once iterations pile up, to stop cycling.
        if (lambda[k] < most_negative) {
          drop = k;
          if (iter > 3 * m) break;
          most_negative = lambda[k];
        }
      }
      if (drop < 0) {
        sol.status = QpStatus::Optimal;
        sol.x = x;
        sol.objective = objective(x);
        return sol;
      }
      in_work[static_cast<std::size_t>(work[static_cast<std::size_t>(drop)])] = 0;
      work.erase(work.begin() + drop);
      continue;
    }

    // Longest feasible step along p.
    double alpha = ray ? std::numeric_limits<double>::infinity() : 1.0;
    int blocking = -1;
    for (int i = 0; i < m; ++i) {
      if (in_work[static_cast<std::size_t>(i)]) continue;
      double di = A.row(i).dot(p);
      if (di <= 1e-13) continue;
      double slack = b[i] - A.row(i).dot(x);
      double ai = std::max(slack, 0.0) / di;
      if (ai < alpha - 1e-15) {
        alpha = ai;
        blocking = i;
      }
    }
    if (ray && blocking < 0) {
      sol.status = QpStatus::Unbounded;
      sol.x = x;
      sol.objective = objective(x);
      return sol;
    }
    x += alpha * p;
    if (blocking >= 0) {
      work.push_back(blocking);
      in_work[static_cast<std::size_t>(blocking)] = 1;
    }
  }
  sol.x = x;
  sol.objective = objective(x);
  return sol;
}

}  // namespace spherot::detail
