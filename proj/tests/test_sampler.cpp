#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "spherot/sampler.hpp"
#include "helpers.hpp"

using namespace spherot;
using testutil::random_model;
using testutil::random_unit_point;

TEST_CASE("separation radius formula") {
  REQUIRE(separation_radius(0.999999, 5.0) < 1e-3);
  REQUIRE(separation_radius(0.5, 1.0) == Catch::Approx(1.0).margin(1e-14));

  double t = 1.0 / 0.09;
  double r = separation_radius(0.4, t);
  REQUIRE(r == Catch::Approx(0.3979).margin(5e-4));
  // cross-check: two points a chord r apart have kernel exactly s
  double dot = 1.0 - r * r / 2.0;
  Vec a(2), b(2);
  a << 1, 0;
  b << dot, std::sqrt(1 - dot * dot);
  REQUIRE(kernel(UnitPoint(a), UnitPoint(b), t) == Catch::Approx(0.4).margin(1e-12));

  REQUIRE_THROWS_AS(separation_radius(0.0, 2.0), Error);
  REQUIRE_THROWS_AS(separation_radius(1.0, 2.0), Error);
}

TEST_CASE("rng streams reproduce and split") {
  RngStream s{42, 7};
  auto a = s.engine_at(5), b = s.engine_at(5);
  REQUIRE(a() == b());
  auto c = s.engine_at(6);
  REQUIRE(a() != c());  // overwhelmingly likely distinct
}

TEST_CASE("cosine marginal matches the Beta moment at k = 3") {
  std::mt19937_64 eng(4242);
  const double t = 8.0;
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double c = sample_cosine_marginal(eng, t, 3);
    sum += c;
    sumsq += c * c;
  }
  double mean = sum / n;
  // Beta(t+1, 1): mean (t+1)/(t+2), variance (t+1)/((t+2)^2 (t+3))
  double expect = (t + 1.0) / (t + 2.0);
  double var = (t + 1.0) / ((t + 2.0) * (t + 2.0) * (t + 3.0));
  double se = std::sqrt(var / n);
  REQUIRE(std::abs(mean - expect) < 3.0 * se);
  // exact variant coincides in distribution at k = 3: compare means loosely
  double sum_exact = 0.0;
  for (int i = 0; i < n; ++i) sum_exact += sample_cosine_marginal(eng, t, 3, true);
  REQUIRE(std::abs(sum_exact / n - expect) < 4.0 * se);
}

TEST_CASE("single point model samples stay in its hemisphere") {
  std::mt19937_64 eng(11);
  UnitPoint x0 = random_unit_point(eng, 4);
  KdeModel m(std::vector<UnitPoint>{x0}, Vec::Ones(1), 9.0);
  MuSampler sampler(m);
  RngStream rng{123, 0};
  for (int i = 0; i < 300; ++i) {
    UnitPoint x = sampler.sample(rng, static_cast<std::uint64_t>(i));
    REQUIRE(x.dot(x0) > 0.0);
    TransportedSample ts = sampler.transport_sample(rng, static_cast<std::uint64_t>(i));
    REQUIRE((ts.image.coords() - x0.coords()).norm() < 1e-12);
    REQUIRE(std::abs(ts.conjugate_value) < 1e-10);
  }
}

TEST_CASE("sample histogram matches the density on S^2") {
  // 3-point model spanning R^3; at k = 3 the Beta marginal is exact.
  std::mt19937_64 eng(17);
  Vec p1(3), p2(3), p3(3);
  p1 << 1, 0, 0.2;
  p2 << -0.4, 1, 0;
  p3 << 0.1, -0.3, 1;
  std::vector<UnitPoint> pts = {normalize(p1), normalize(p2), normalize(p3)};
  Vec w(3);
  w << 1.0, 0.7, 1.4;
  const double t = 6.0;
  KdeModel m(pts, w, t);
  MuSampler sampler(m);
  REQUIRE(sampler.intrinsic_dim() == 3);

  const int M = 40000;
  const int nz = 8, nphi = 8;
  std::vector<double> counts(nz * nphi, 0.0);
  RngStream rng{2024, 0};
  for (int i = 0; i < M; ++i) {
    UnitPoint x = sampler.sample(rng, static_cast<std::uint64_t>(i));
    double z = std::clamp(x[2], -1.0, 1.0);
    double phi = std::atan2(x[1], x[0]) + M_PI;
    int iz = std::min(nz - 1, static_cast<int>((z + 1.0) / 2.0 * nz));
    int ip = std::min(nphi - 1, static_cast<int>(phi / (2 * M_PI) * nphi));
    counts[iz * nphi + ip] += 1.0;
  }

  // expected mass per bin by midpoint quadrature in (z, phi), where the
  // spherical area element is exactly dz dphi
  std::vector<double> expected(nz * nphi, 0.0);
  const int sub = 12;
  double total = 0.0;
  for (int iz = 0; iz < nz; ++iz) {
    for (int ip = 0; ip < nphi; ++ip) {
      double mass = 0.0;
      for (int a = 0; a < sub; ++a) {
        for (int b = 0; b < sub; ++b) {
          double z = -1.0 + 2.0 * (iz + (a + 0.5) / sub) / nz;
          double phi = 2 * M_PI * (ip + (b + 0.5) / sub) / nphi - M_PI;
          double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
          Vec x(3);
          x << rxy * std::cos(phi), rxy * std::sin(phi), z;
          mass += density_moment(m, x).density;
        }
      }
      expected[iz * nphi + ip] = mass;
      total += mass;
    }
  }

  // chi^2 against expected proportions; pool sparse bins
  double chi2 = 0.0;
  int used = 0;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (int b = 0; b < nz * nphi; ++b) {
    double e = M * expected[b] / total;
    if (e < 10.0) {
      pooled_obs += counts[b];
      pooled_exp += e;
      continue;
    }
    chi2 += (counts[b] - e) * (counts[b] - e) / e;
    ++used;
  }
  if (pooled_exp > 0.0) {
    chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++used;
  }
  REQUIRE(chi2 < testutil::chi2_critical(used - 1, 0.01));
}

TEST_CASE("samples and landmarks are thread-count independent") {
  std::mt19937_64 eng(23);
  KdeModel m = random_model(eng, 15, 3, 1.0 / 0.09, true);
  RngStream rng{77, 0};
  auto s1 = draw_transport_samples(m, rng, 500, 1);
  auto s4 = draw_transport_samples(m, rng, 500, 4);
  REQUIRE(s1.size() == s4.size());
  for (std::size_t i = 0; i < s1.size(); ++i) {
    REQUIRE((s1[i].source.coords() - s4[i].source.coords()).norm() == 0.0);
    REQUIRE(s1[i].conjugate_value == s4[i].conjugate_value);
  }
  double a = s1[250].conjugate_value;  // an interior threshold
  LandmarkSet l1 = select_landmarks(s1, a, 0.4, m.exponent());
  LandmarkSet l4 = select_landmarks(s4, a, 0.4, m.exponent());
  REQUIRE(l1.landmarks.size() == l4.landmarks.size());
  for (std::size_t i = 0; i < l1.landmarks.size(); ++i)
    REQUIRE((l1.landmarks[i].image.coords() - l4.landmarks[i].image.coords()).norm() == 0.0);
}

TEST_CASE("landmark admission thresholds and separation") {
  std::mt19937_64 eng(29);
  KdeModel m = random_model(eng, 12, 3, 1.0 / 0.09);
  RngStream rng{99, 0};
  auto samples = draw_transport_samples(m, rng, 800, 2);

  // all below a -> empty
  double huge = 1e9;
  REQUIRE(select_landmarks(samples, huge, 0.4, m.exponent()).landmarks.empty());

  // duplicate images -> exactly one admitted
  std::vector<TransportedSample> dup = {samples[0], samples[0]};
  LandmarkSet only_one = select_landmarks(dup, -1e9, 0.4, m.exponent());
  REQUIRE(only_one.landmarks.size() == 1);

  double a = samples[100].conjugate_value;
  LandmarkSet set = select_landmarks(samples, a, 0.5, m.exponent());
  REQUIRE(set.radius_r == Catch::Approx(separation_radius(0.5, m.exponent())));
  for (std::size_t i = 0; i < set.landmarks.size(); ++i) {
    REQUIRE(set.landmarks[i].conjugate_value >= a);
    for (std::size_t j = i + 1; j < set.landmarks.size(); ++j) {
      REQUIRE(kernel(set.landmarks[i].image, set.landmarks[j].image, m.exponent()) < 0.5);
      double chord = (set.landmarks[i].image.coords() - set.landmarks[j].image.coords()).norm();
      REQUIRE(chord >= set.radius_r - 1e-12);
    }
  }
}

TEST_CASE("landmark images stay in the data subspace") {
  std::mt19937_64 eng(31);
  std::vector<UnitPoint> pts;
  for (int i = 0; i < 10; ++i) {
    UnitPoint c = random_unit_point(eng, 2);
    Vec v = Vec::Zero(5);
    v.head(2) = c.coords();
    pts.push_back(UnitPoint(v));
  }
  KdeModel m = KdeModel::uniform_weights(pts, 1.0 / 0.09);
  auto samples = draw_transport_samples(m, RngStream{5, 0}, 400, 2);
  for (const auto& s : samples) {
    REQUIRE(s.image.coords().tail(3).norm() < 1e-10);
    REQUIRE(s.source.coords().tail(3).norm() < 1e-10);  // intrinsic span sampling
    REQUIRE(s.conjugate_value >= log_density(m, s.source).finite_value() - 1e-12);
  }
}
