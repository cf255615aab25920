// Regenerates the committed 2-d logistic brute-force fixture.
// Usage: gen_fixture <output-path>

#include "mfvi/cli.hpp"
#include "mfvi/oracle.hpp"
#include "mfvi/report.hpp"

#include <iostream>

using namespace mfvi;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gen_fixture <output-path>\n";
    return 1;
  }
  MatrixXd P(2, 2);
  P << 1.3, 0.4, 0.4, 0.9;
  VectorXd w(2), a(2);
  w << 0.5, -0.3;
  a << 1.0, -0.6;
  const double c = 2.0;
  BruteForceConfig cfg;

  Potential pot = logistic_gaussian_potential(P, w, a, c);
  auto bf = brute_force_mfvi_2d(pot, cfg);

  Jv fx = Jv::object();
  fx.set("label", "logistic2d");
  fx.set("input_hash", hash_hex(fixture_input_string(P, w, a, c,
                                                     cfg.grid_points,
                                                     cfg.span)));
  {
    Jv params = Jv::object();
    VectorXd pflat(4);
    pflat << P(0, 0), P(0, 1), P(1, 0), P(1, 1);
    params.set("precision", Jv(pflat));
    params.set("w", Jv(w));
    params.set("a", Jv(a));
    params.set("c", c);
    fx.set("params", std::move(params));
  }
  fx.set("grid_points", cfg.grid_points);
  fx.set("span", cfg.span);
  {
    Jv marg = Jv::array();
    for (const GridDensity* g : {&bf.first, &bf.second}) {
      Jv m = Jv::object();
      m.set("x0", g->x[0]);
      m.set("dx", g->x[1] - g->x[0]);
      m.set("density", Jv(g->density));
      marg.push(std::move(m));
    }
    fx.set("marginals", std::move(marg));
  }
  write_file(argv[1], fx.dump());
  return 0;
}
