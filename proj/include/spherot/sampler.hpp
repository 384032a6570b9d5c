#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "spherot/kde.hpp"

namespace spherot {

// Chordal distance at which the kernel between two landmarks equals s:
// K_t(y, y') >= s  <=>  y.y' >= s^(1/t)  <=>  ||y - y'|| <= sqrt(2 - 2 s^(1/t)).
inline double separation_radius(double s, double t) {
  if (!(s > 0.0 && s < 1.0))
    fail(ErrorKind::DomainError, "separation s must lie in (0,1)");
  if (!(t > 0.0)) fail(ErrorKind::DomainError, "exponent t must be positive");
  return std::sqrt(2.0 - 2.0 * std::pow(s, 1.0 / t));
}

// Cosine of a mu-draw against its anchor data point on S^{k-1}:
// Beta(t+1, (k-1)/2) following the kernel-weighted hemisphere law, or the
// exact variant sqrt(Beta((t+1)/2, (k-1)/2)). The two laws agree at k = 3.
inline double sample_cosine_marginal(std::mt19937_64& eng, double t, int k,
                                     bool exact = false) {
  if (k < 2) fail(ErrorKind::DimensionOutOfRange, "need k >= 2");
  auto beta = [&eng](double alpha, double b) {
    std::gamma_distribution<double> ga(alpha, 1.0), gb(b, 1.0);
    double x = ga(eng), y = gb(eng);
    double s = x + y;
    return s > 0.0 ? x / s : 0.0;
  };
  if (exact) return std::sqrt(beta((t + 1.0) / 2.0, (k - 1) / 2.0));
  return beta(t + 1.0, (k - 1) / 2.0);
}

struct SampleOptions {
  // Sample the exact uniform-hemisphere marginal (c = sqrt(Beta((t+1)/2,(k-1)/2)))
  // instead of the Beta(t+1,(k-1)/2) form. The two agree for k = 3.
  bool exact_marginal = false;
};

// Orthonormal basis of span{x_i}, built by modified Gram-Schmidt in data
// order and padded with coordinate axes up to dimension 2. Sampling inside
// this span keeps every draw invariant under isometric embeddings of the
// data: the pushforward T_*(mu) only sees the span.
inline Subspace data_span(const KdeModel& m, double tol = 1e-10) {
  const int d = m.dim();
  std::vector<Vec> basis;
  auto try_add = [&](Vec v) {
    for (const Vec& b : basis) v -= v.dot(b) * b;
    for (const Vec& b : basis) v -= v.dot(b) * b;  // second MGS pass
    double n = v.norm();
    if (n > tol) basis.push_back(v / n);
  };
  for (int i = 0; i < m.size() && static_cast<int>(basis.size()) < d; ++i)
    try_add(m.points().col(i));
  for (int j = 0; j < d && static_cast<int>(basis.size()) < 2; ++j)
    try_add(Vec::Unit(d, j));
  Mat B(d, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j)
    B.col(static_cast<Eigen::Index>(j)) = basis[j];
  return Subspace(std::move(B));
}

// Draws from the distribution mu underlying f: pick a data index in
// proportion to a_i, then a point of H+(x_i) with cosine c against x_i
// distributed per the kernel-weighted hemisphere marginal.
//
// Draw k is a pure function of (stream, k), so threads may split the index
// range arbitrarily without changing any sample.
class MuSampler {
 public:
  explicit MuSampler(const KdeModel& model, SampleOptions opts = {})
      : model_(&model), opts_(opts), span_(data_span(model)) {
    span_points_.resize(model.size());
    for (int i = 0; i < model.size(); ++i) {
      Vec xi = span_.coords_in(model.points().col(i));
      span_points_[i] = xi / xi.norm();
    }
    cumulative_.resize(model.size());
    double acc = 0.0;
    for (int i = 0; i < model.size(); ++i) {
      acc += model.weights()[i];
      cumulative_[i] = acc;
    }
    // Below this cosine the kernel underflows to zero; redraw instead of
    // emitting a sample that evaluates outside supp(f).
    min_cosine_ = std::exp(-700.0 / model.exponent());
  }

  int intrinsic_dim() const { return span_.dim(); }
  const Subspace& span() const { return span_; }

  UnitPoint sample(const RngStream& rng, std::uint64_t index) const {
    auto eng = rng.engine_at(index);
    return draw(eng);
  }

  TransportedSample transport_sample(const RngStream& rng,
                                     std::uint64_t index) const {
    auto eng = rng.engine_at(index);
    return conjugate_at_transport(*model_, draw(eng));
  }

 private:
  UnitPoint draw(std::mt19937_64& eng) const {
    const int k = span_.dim();
    const double t = model_->exponent();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int attempt = 0; attempt < 256; ++attempt) {
      double u = unif(eng) * cumulative_.back();
      int i = static_cast<int>(
          std::lower_bound(cumulative_.begin(), cumulative_.end(), u) -
          cumulative_.begin());
      i = std::min(i, static_cast<int>(cumulative_.size()) - 1);

      double c = sample_cosine_marginal(eng, t, k, opts_.exact_marginal);
      if (!(c > min_cosine_) || !(c <= 1.0)) continue;

      Vec v(k);
      for (int j = 0; j < k; ++j) v[j] = gauss(eng);
      v -= v.dot(span_points_[i]) * span_points_[i];
      double n = v.norm();
      if (n <= 1e-12) continue;
      v /= n;
      Vec xi = c * span_points_[i] + std::sqrt(1.0 - c * c) * v;
      return UnitPoint(span_.embed(xi));
    }
    fail(ErrorKind::DomainError, "mu sampler failed to draw a support point");
  }

  const KdeModel* model_;
  SampleOptions opts_;
  Subspace span_;
  std::vector<Vec> span_points_;
  std::vector<double> cumulative_;
  double min_cosine_;
};

inline UnitPoint sample_mu(const KdeModel& m, const RngStream& rng,
                           std::uint64_t index = 0, SampleOptions opts = {}) {
  return MuSampler(m, opts).sample(rng, index);
}

inline TransportedSample transport_sample(const KdeModel& m, const RngStream& rng,
                                          std::uint64_t index = 0,
                                          SampleOptions opts = {}) {
  return MuSampler(m, opts).transport_sample(rng, index);
}

// Algorithm step 1 in bulk: M draws with transport images and conjugate
// values, merged in index order regardless of thread count.
inline std::vector<TransportedSample> draw_transport_samples(
    const KdeModel& m, const RngStream& rng, std::size_t count,
    unsigned threads = 1, SampleOptions opts = {}) {
  MuSampler sampler(m, opts);
  std::vector<std::optional<TransportedSample>> slots(count);
  parallel_for(count, threads, [&](std::size_t i) {
    slots[i] = sampler.transport_sample(rng, i);
  });
  std::vector<TransportedSample> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct LandmarkSet {
  std::vector<TransportedSample> landmarks;
  double threshold_a = 0.0;
  double separation_s = 0.0;
  double radius_r = 0.0;
};

// Greedy admission in decreasing conjugate value (ties broken by sample
// index): keep a sample iff it clears the threshold and its image kernel
// against every admitted image stays strictly below s.
inline LandmarkSet select_landmarks(const std::vector<TransportedSample>& samples,
                                    double a, double s, double t) {
  if (!(s > 0.0 && s < 1.0))
    fail(ErrorKind::DomainError, "separation s must lie in (0,1)");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return samples[i].conjugate_value > samples[j].conjugate_value;
  });

  LandmarkSet set;
  set.threshold_a = a;
  set.separation_s = s;
  set.radius_r = separation_radius(s, t);
  for (std::size_t idx : order) {
    const TransportedSample& cand = samples[idx];
    if (!(cand.conjugate_value >= a)) break;  // sorted: all the rest fail too
    bool separated = true;
    for (const TransportedSample& kept : set.landmarks) {
      if (kernel(cand.image, kept.image, t) >= s) {
        separated = false;
        break;
      }
    }
    if (separated) set.landmarks.push_back(cand);
  }

  // Post-hoc assertion of the advertised invariants.
  for (std::size_t i = 0; i < set.landmarks.size(); ++i) {
    if (!(set.landmarks[i].conjugate_value >= a))
      fail(ErrorKind::DomainError, "landmark below threshold");
    for (std::size_t j = i + 1; j < set.landmarks.size(); ++j)
      if (!(kernel(set.landmarks[i].image, set.landmarks[j].image, t) < s))
        fail(ErrorKind::DomainError, "landmark pair too close");
  }
  return set;
}

}  // namespace spherot
