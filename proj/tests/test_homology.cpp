#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <random>

#include "spherot/homology.hpp"
#include "helpers.hpp"

using namespace spherot;
using testutil::random_unit_points;

namespace {

std::vector<UnitPoint> circle_vertices(int n) {
  std::vector<UnitPoint> pts;
  for (int i = 0; i < n; ++i) {
    Vec v(2);
    double u = 2.0 * M_PI * i / n;
    v << std::cos(u), std::sin(u);
    pts.push_back(UnitPoint(v));
  }
  return pts;
}

SimplicialComplex hollow_triangle() {
  SimplicialComplex c;
  c.vertices = circle_vertices(3);
  c.simplices_by_dim = {{{0}, {1}, {2}}, {{0, 1}, {0, 2}, {1, 2}}, {}};
  return c;
}

SimplicialComplex octahedron_boundary() {
  SimplicialComplex c;
  std::vector<UnitPoint> pts;
  for (int axis = 0; axis < 3; ++axis)
    for (double sign : {1.0, -1.0}) {
      Vec v = Vec::Zero(3);
      v[axis] = sign;
      pts.push_back(UnitPoint(v));
    }
  c.vertices = pts;  // 2a+s indexing: axis a, sign s in {0,1}
  c.simplices_by_dim.assign(4, {});
  for (int i = 0; i < 6; ++i) c.simplices_by_dim[0].push_back({i});
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j)
      if (i / 2 != j / 2) c.simplices_by_dim[1].push_back({i, j});
  for (int s0 = 0; s0 < 2; ++s0)
    for (int s1 = 0; s1 < 2; ++s1)
      for (int s2 = 0; s2 < 2; ++s2)
        c.simplices_by_dim[2].push_back({s0, 2 + s1, 4 + s2});
  return c;
}

// Minimal 7-vertex triangulation of the torus: faces {i, i+1, i+3} and
// {i, i+2, i+3} mod 7, edges the full K7.
SimplicialComplex moebius_torus() {
  SimplicialComplex c;
  c.vertices = circle_vertices(7);
  c.simplices_by_dim.assign(4, {});
  for (int i = 0; i < 7; ++i) c.simplices_by_dim[0].push_back({i});
  for (int i = 0; i < 7; ++i)
    for (int j = i + 1; j < 7; ++j) c.simplices_by_dim[1].push_back({i, j});
  auto add_face = [&](int a, int b, int d) {
    std::vector<int> f = {a % 7, b % 7, d % 7};
    std::sort(f.begin(), f.end());
    c.simplices_by_dim[2].push_back(f);
  };
  for (int i = 0; i < 7; ++i) {
    add_face(i, i + 1, i + 3);
    add_face(i, i + 2, i + 3);
  }
  std::sort(c.simplices_by_dim[2].begin(), c.simplices_by_dim[2].end());
  return c;
}

int components_by_union_find(const SimplicialComplex& c) {
  std::vector<int> parent(c.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (const auto& e : c.simplices_by_dim[1]) parent[find(e[0])] = find(e[1]);
  int roots = 0;
  for (std::size_t i = 0; i < parent.size(); ++i)
    if (find(static_cast<int>(i)) == static_cast<int>(i)) ++roots;
  return roots;
}

std::vector<std::vector<int>> to_dense(const BoundaryMatrix& m) {
  std::vector<std::vector<int>> dense(m.rows, std::vector<int>(m.cols, 0));
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) dense[r][c] = m.get(r, c) ? 1 : 0;
  return dense;
}

}  // namespace

TEST_CASE("boundary of a single edge") {
  SimplicialComplex c;
  c.vertices = circle_vertices(2);
  c.simplices_by_dim = {{{0}, {1}}, {{0, 1}}};
  BoundaryMatrix m = boundary_matrix(c, 1);
  REQUIRE(m.rows == 2);
  REQUIRE(m.cols == 1);
  REQUIRE(m.get(0, 0));
  REQUIRE(m.get(1, 0));
}

TEST_CASE("hollow triangle boundary and betti (1,1)") {
  SimplicialComplex c = hollow_triangle();
  validate_complex(c);
  BoundaryMatrix m = boundary_matrix(c, 1);
  REQUIRE(m.rows == 3);
  REQUIRE(m.cols == 3);
  for (int j = 0; j < 3; ++j) {
    int ones = 0;
    for (int i = 0; i < 3; ++i) ones += m.get(i, j);
    REQUIRE(ones == 2);
  }
  REQUIRE(betti_numbers(c, 1) == std::vector<int>{1, 1});
}

TEST_CASE("octahedron boundary has betti (1,0,1)") {
  SimplicialComplex c = octahedron_boundary();
  validate_complex(c);
  REQUIRE(betti_numbers(c, 2) == std::vector<int>{1, 0, 1});
}

TEST_CASE("seven-vertex torus has betti (1,2,1)") {
  SimplicialComplex c = moebius_torus();
  validate_complex(c);
  REQUIRE(c.count(1) == 21);
  REQUIRE(c.count(2) == 14);
  REQUIRE(betti_numbers(c, 2) == std::vector<int>{1, 2, 1});
}

TEST_CASE("chain complex identity: boundaries compose to zero") {
  for (const SimplicialComplex& c : {octahedron_boundary(), moebius_torus()}) {
    BoundaryMatrix d1 = boundary_matrix(c, 1);
    BoundaryMatrix d2 = boundary_matrix(c, 2);
    auto m1 = to_dense(d1);
    auto m2 = to_dense(d2);
    for (int i = 0; i < d1.rows; ++i) {
      for (int j = 0; j < d2.cols; ++j) {
        int acc = 0;
        for (int k = 0; k < d1.cols; ++k) acc += m1[i][k] * m2[k][j];
        REQUIRE(acc % 2 == 0);
      }
    }
  }
}

TEST_CASE("rank over gf2: identities, zeros, random matrices vs dense oracle") {
  std::mt19937_64 eng(5);
  BoundaryMatrix id;
  id.rows = id.cols = 8;
  id.columns.assign(8, std::vector<std::uint64_t>(1, 0));
  for (int i = 0; i < 8; ++i) id.set(i, i);
  REQUIRE(rank_gf2(id) == 8);

  BoundaryMatrix zero;
  zero.rows = 5;
  zero.cols = 7;
  zero.columns.assign(7, std::vector<std::uint64_t>(1, 0));
  REQUIRE(rank_gf2(zero) == 0);

  for (int rep = 0; rep < 40; ++rep) {
    BoundaryMatrix m;
    m.rows = 20;
    m.cols = 20;
    m.columns.assign(20, std::vector<std::uint64_t>(1, 0));
    std::vector<std::vector<int>> dense(20, std::vector<int>(20, 0));
    for (int r = 0; r < 20; ++r)
      for (int c = 0; c < 20; ++c)
        if (eng() & 1) {
          m.set(r, c);
          dense[r][c] = 1;
        }
    REQUIRE(rank_gf2(m) == testutil::dense_mod2_rank(dense));
  }
}

TEST_CASE("betti dimension bookkeeping errors") {
  SimplicialComplex c = hollow_triangle();
  REQUIRE_THROWS_MATCHES(betti_numbers(c, 2), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::InsufficientDimension;
                         }));
  REQUIRE_THROWS_MATCHES(boundary_matrix(c, 5), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::DimensionOutOfRange;
                         }));
}

TEST_CASE("euler characteristic and beta_0 on built alpha complexes") {
  std::mt19937_64 eng(7);
  for (int rep = 0; rep < 3; ++rep) {
    auto pts = random_unit_points(eng, 30, 3);
    SimplicialComplex c = build_complex(pts, 0.3, 3, 1.0);
    validate_complex(c);

    // chi from simplex counts == chi from betti, computing ranks through the
    // top stored dimension with rank d_{maxdim+1} := 0
    long chi_counts = 0;
    for (int k = 0; k <= c.maxdim(); ++k)
      chi_counts += (k % 2 == 0 ? 1 : -1) * static_cast<long>(c.count(k));
    std::vector<int> ranks(static_cast<std::size_t>(c.maxdim()) + 2, 0);
    for (int k = 1; k <= c.maxdim(); ++k)
      ranks[static_cast<std::size_t>(k)] = rank_gf2(boundary_matrix(c, k));
    long chi_betti = 0;
    for (int k = 0; k <= c.maxdim(); ++k) {
      long beta = static_cast<long>(c.count(k)) - ranks[static_cast<std::size_t>(k)] -
                  ranks[static_cast<std::size_t>(k) + 1];
      chi_betti += (k % 2 == 0 ? 1 : -1) * beta;
    }
    REQUIRE(chi_counts == chi_betti);

    std::vector<int> betti = betti_numbers(c, c.maxdim() - 1);
    REQUIRE(betti[0] == components_by_union_find(c));
  }
}
