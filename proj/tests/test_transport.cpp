#include "mfvi/transport.hpp"

#include <doctest.h>

#include <cstdio>
#include <random>

using namespace mfvi;

namespace {

// small deterministic generator for fuzzed monotone maps
TransportMap random_monotone_map(GridPtr grid, int dim, std::uint64_t seed,
                                 double slope_lo = 0.2, double slope_hi = 2.5) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> slope(slope_lo, slope_hi);
  std::uniform_real_distribution<double> start(-2.0, 2.0);
  MatrixXd v(dim, grid->m);
  for (int i = 0; i < dim; ++i) {
    v(i, 0) = start(eng);
    for (int j = 1; j < grid->m; ++j)
      v(i, j) = v(i, j - 1) +
                slope(eng) * (grid->nodes[j] - grid->nodes[j - 1]);
  }
  return TransportMap(std::move(grid), std::move(v));
}

}  // namespace

TEST_CASE("quantile grid nodes and masses") {
  auto grid = make_grid(64);
  CHECK(grid->nodes.size() == 64);
  for (int j = 0; j + 1 < 64; ++j) CHECK(grid->nodes[j] < grid->nodes[j + 1]);
  // symmetric about zero, exactly
  for (int j = 0; j < 32; ++j)
    CHECK(grid->nodes[j] == -grid->nodes[63 - j]);
  CHECK(std::abs(grid->interval_mass.sum() - 1.0) < 1e-12);
  CHECK(std::abs(grid->slope_mass.sum() - 1.0) < 1e-12);
  // u_j = Phi^{-1}(j/(m+1))
  CHECK(grid->nodes[0] == doctest::Approx(norm_quantile(1.0 / 65)).epsilon(1e-14));
}

TEST_CASE("eval_map examples") {
  auto grid = make_grid(32);
  TransportMap id = identity_map(grid, 2);
  VectorXd u(2);
  u << 0.3, -1.2;
  VectorXd out = eval_map(id, u);
  CHECK(out[0] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(-1.2).epsilon(1e-14));

  VectorXd mean(1), sd(1);
  mean << 1.5;
  sd << 0.5;
  TransportMap aff = affine_map(grid, mean, sd);
  VectorXd z(1);
  z << 0.0;
  CHECK(eval_map(aff, z)[0] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(eval_slope(aff, z)[0] == doctest::Approx(0.5).epsilon(1e-14));

  // spec's 3-node interpolation case: nodes (-1,0,2) at grid (-1,0,1)
  auto g3 = make_grid(3);
  MatrixXd v(1, 3);
  v << -1.0, 0.0, 2.0;
  // g3 nodes are Phi^-1(1/4,2/4,3/4); rescale the query into the middle cell
  TransportMap m3(g3, v);
  double mid = 0.5 * (g3->nodes[1] + g3->nodes[2]);
  CHECK(m3.eval1(0, mid) == doctest::Approx(1.0).epsilon(1e-14));
  double slope = 2.0 / (g3->nodes[2] - g3->nodes[1]);
  CHECK(m3.slope1(0, mid) == doctest::Approx(slope).epsilon(1e-14));
  // affine tails continue the end slopes
  double left_slope = 1.0 / (g3->nodes[1] - g3->nodes[0]);
  CHECK(m3.slope1(0, g3->nodes[0] - 3.0) ==
        doctest::Approx(left_slope).epsilon(1e-14));
  CHECK(m3.eval1(0, g3->nodes[0] - 1.0) ==
        doctest::Approx(-1.0 - left_slope).epsilon(1e-14));
}

TEST_CASE("monotonicity is enforced at construction") {
  auto grid = make_grid(8);
  MatrixXd v(1, 8);
  for (int j = 0; j < 8; ++j) v(0, j) = grid->nodes[j];
  v(0, 5) = v(0, 4) - 0.1;
  CHECK_THROWS_AS(TransportMap(grid, v), MonotonicityError);
}

TEST_CASE("project_band examples and fuzz") {
  auto grid = make_grid(33);
  TransportMap id = identity_map(grid, 1);
  TransportMap pr = project_band(id, 1.0, 1.0);
  CHECK((pr.values - id.values).cwiseAbs().maxCoeff() < 1e-14);

  // slope-3 map clamps to slope 1 through the same median
  MatrixXd v(1, 33);
  for (int j = 0; j < 33; ++j) v(0, j) = 3.0 * grid->nodes[j] + 0.4;
  TransportMap steep(grid, v);
  TransportMap clamped = project_band(steep, 1.0, 1.0);
  int anchor = (33 + 1) / 2 - 1;
  CHECK(clamped.values(0, anchor) ==
        doctest::Approx(steep.values(0, anchor)).epsilon(1e-14));
  for (int j = 0; j + 1 < 33; ++j) {
    double s = (clamped.values(0, j + 1) - clamped.values(0, j)) /
               (grid->nodes[j + 1] - grid->nodes[j]);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }

  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    TransportMap t = random_monotone_map(make_grid(41), 2, seed, 0.05, 5.0);
    TransportMap p = project_band(t, 1.0, 4.0);
    CHECK(in_band(p, 1.0, 4.0));
  }
}

TEST_CASE("lp_distance simple cases") {
  auto grid = make_grid(128);
  TransportMap id = identity_map(grid, 1);
  CHECK(lp_distance(id, id, 2.0) == doctest::Approx(0.0));

  VectorXd mean(1), sd(1);
  mean << 0.25;
  sd << 1.0;
  TransportMap shifted = affine_map(grid, mean, sd);
  CHECK(lp_distance(id, shifted, 2.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(lp_distance(id, shifted, 3.0) == doctest::Approx(0.25).epsilon(1e-8));

  // u vs 2u at p=2: distance^2 = int u^2 dpho = 1
  VectorXd sd2(1);
  sd2 << 2.0;
  TransportMap twice = affine_map(grid, VectorXd::Zero(1), sd2);
  CHECK(lp_distance(id, twice, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  // p=4: E[u^4] = 3 -> distance = 3^{1/4}
  CHECK(lp_distance(id, twice, 4.0) ==
        doctest::Approx(std::pow(3.0, 0.25)).epsilon(1e-12));
  // p=3: E|u|^3 = 2 sqrt(2/pi)
  CHECK(lp_distance(id, twice, 3.0) ==
        doctest::Approx(std::pow(2.0 * std::sqrt(2.0 / M_PI), 1.0 / 3.0))
            .epsilon(1e-7));

  CHECK_THROWS_AS(lp_distance(id, identity_map(grid, 2), 2.0), ShapeError);
  CHECK_THROWS_AS(lp_distance(id, id, 0.5), ParamError);
}

TEST_CASE("lp_distance on gaussian products matches the closed form") {
  auto grid = make_grid(256);
  VectorXd m1(3), s1(3), m2(3), s2(3);
  m1 << 0.2, -1.0, 0.7;
  s1 << 1.0, 0.5, 2.0;
  m2 << -0.3, -1.2, 1.0;
  s2 << 1.3, 0.45, 1.7;
  TransportMap a = affine_map(grid, m1, s1);
  TransportMap b = affine_map(grid, m2, s2);
  double expect =
      std::sqrt((m1 - m2).squaredNorm() + (s1 - s2).squaredNorm());
  CHECK(lp_distance(a, b, 2.0) == doctest::Approx(expect).epsilon(1e-4));
}

TEST_CASE("lp_distance is a metric on fixed-grid maps") {
  auto grid = make_grid(32);
  std::vector<TransportMap> maps;
  for (std::uint64_t s = 1; s <= 30; ++s)
    maps.push_back(random_monotone_map(grid, 2, s));
  std::mt19937_64 eng(99);
  std::uniform_int_distribution<std::size_t> pick(0, maps.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto& x = maps[pick(eng)];
    const auto& y = maps[pick(eng)];
    const auto& z = maps[pick(eng)];
    double xy = lp_distance(x, y, 2.0);
    double yx = lp_distance(y, x, 2.0);
    CHECK(xy == yx);  // symmetry, bitwise
    CHECK(xy <= lp_distance(x, z, 2.0) + lp_distance(z, y, 2.0) + 1e-12);
  }
}

TEST_CASE("maps on different grids are resampled onto the finer grid") {
  TransportMap coarse = identity_map(make_grid(32), 1);
  TransportMap fine = identity_map(make_grid(64), 1);
  CHECK(lp_distance(coarse, fine, 2.0) < 1e-10);
}

TEST_CASE("slope_l2_distance and grid_function_l2") {
  auto grid = make_grid(64);
  TransportMap id = identity_map(grid, 2);
  VectorXd sd(2);
  sd << 1.5, 1.5;
  TransportMap aff = affine_map(grid, VectorXd::Zero(2), sd);
  // derivative difference is constant 0.5 in both coordinates
  CHECK(slope_l2_distance(id, aff) ==
        doctest::Approx(std::sqrt(2.0) * 0.5).epsilon(1e-12));
  // grid_function_l2 of constant 1 rows equals sqrt(d)
  MatrixXd ones = MatrixXd::Ones(2, 64);
  CHECK(grid_function_l2(*grid, ones) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("pushforward moments of an affine map are exact") {
  auto grid = make_grid(64);
  VectorXd m(2), s(2);
  m << 0.7, -0.2;
  s << 1.3, 0.6;
  TransportMap aff = affine_map(grid, m, s);
  VectorXd mean, sd;
  pushforward_moments(aff, mean, sd);
  CHECK(mean[0] == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(mean[1] == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(sd[0] == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(sd[1] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("MCQuadrature: reproducible, exactly moment-matched") {
  MCQuadrature a(2024, 4096, 3), b(2024, 4096, 3);
  CHECK((a.points - b.points).cwiseAbs().maxCoeff() == 0.0);  // bit exact

  // columns have mean exactly 0 (antithetic) and covariance exactly I
  CHECK(a.points.colwise().mean().cwiseAbs().maxCoeff() < 1e-13);
  MatrixXd cov = a.points.transpose() * a.points / 4096.0;
  CHECK((cov - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

  MCQuadrature big(7, 100000, 2);
  CHECK(big.points.colwise().mean().cwiseAbs().maxCoeff() <= 0.02);
  for (int i = 0; i < 2; ++i) {
    double var = big.points.col(i).squaredNorm() / big.n;
    CHECK(std::abs(var - 1.0) <= 0.03);
  }
  // fourth moment is untouched by the matching; sanity-check normality
  double m4 = big.points.col(0).array().pow(4).mean();
  CHECK(m4 == doctest::Approx(3.0).epsilon(0.05));

  CHECK_THROWS_AS(MCQuadrature(1, 4097, 2), ParamError);
  CHECK_THROWS_AS(MCQuadrature(1, 4, 3), ParamError);
}

TEST_CASE("push_samples") {
  MCQuadrature q(55, 2048, 2);
  auto grid = make_grid(64);
  TransportMap id = identity_map(grid, 2);
  MatrixXd pushed = push_samples(id, q);
  CHECK((pushed - q.points).cwiseAbs().maxCoeff() < 1e-12);

  VectorXd m(2), s(2);
  m << 2.0, -1.0;
  s << 0.5, 1.5;
  MatrixXd aff = push_samples(affine_map(grid, m, s), q);
  CHECK(aff.col(0).mean() == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(aff.col(1).mean() == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("map CSV round trip") {
  auto grid = make_grid(16);
  TransportMap t = random_monotone_map(grid, 3, 4);
  std::string path = "/tmp/mfvi_test_map.csv";
  save_map_csv(t, path);
  TransportMap back = load_map_csv(path);
  CHECK(back.dim() == 3);
  CHECK(back.m() == 16);
  CHECK((back.values - t.values).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}
