#include "mfvi/cli.hpp"

#include "mfvi/applications.hpp"
#include "mfvi/lifted.hpp"
#include "mfvi/oracle.hpp"
#include "mfvi/sensitivity.hpp"
#include "mfvi/stability.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace mfvi {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

const ojson& req(const ojson& j, const std::string& key,
                 const std::string& prefix) {
  if (!j.is_object() || !j.contains(key))
    throw ParamError("config: missing key '" + prefix + key + "'");
  return j.at(key);
}

double req_num(const ojson& j, const std::string& key,
               const std::string& prefix) {
  const ojson& v = req(j, key, prefix);
  if (!v.is_number())
    throw ParamError("config: key '" + prefix + key + "' must be a number");
  return v.get<double>();
}

long req_int(const ojson& j, const std::string& key,
             const std::string& prefix) {
  const ojson& v = req(j, key, prefix);
  if (!v.is_number_integer())
    throw ParamError("config: key '" + prefix + key + "' must be an integer");
  return v.get<long>();
}

std::string req_str(const ojson& j, const std::string& key,
                    const std::string& prefix) {
  const ojson& v = req(j, key, prefix);
  if (!v.is_string())
    throw ParamError("config: key '" + prefix + key + "' must be a string");
  return v.get<std::string>();
}

VectorXd req_vec(const ojson& j, const std::string& key,
                 const std::string& prefix) {
  const ojson& v = req(j, key, prefix);
  if (!v.is_array())
    throw ParamError("config: key '" + prefix + key + "' must be an array");
  VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ParamError("config: key '" + prefix + key + "' must be numeric");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

MatrixXd req_mat(const ojson& j, const std::string& key,
                 const std::string& prefix) {
  VectorXd flat = req_vec(j, key, prefix);
  int d = static_cast<int>(std::llround(std::sqrt(double(flat.size()))));
  if (static_cast<Eigen::Index>(d) * d != flat.size())
    throw ParamError("config: key '" + prefix + key +
                     "' must be a square matrix in row-major order");
  MatrixXd m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = flat[r * d + c];
  return m;
}

double opt_num(const ojson& j, const std::string& key, double dflt) {
  return j.is_object() && j.contains(key) ? j.at(key).get<double>() : dflt;
}
long opt_int(const ojson& j, const std::string& key, long dflt) {
  return j.is_object() && j.contains(key) ? j.at(key).get<long>() : dflt;
}
std::string opt_str(const ojson& j, const std::string& key,
                    const std::string& dflt) {
  return j.is_object() && j.contains(key) ? j.at(key).get<std::string>()
                                          : dflt;
}

std::pair<double, double> req_interval(const ojson& j, const std::string& key,
                                       const std::string& prefix) {
  VectorXd v = req_vec(j, key, prefix);
  if (v.size() != 2 || !(v[0] < v[1]))
    throw ParamError("config: key '" + prefix + key +
                     "' must be [lo, hi] with lo < hi");
  return {v[0], v[1]};
}

Jv from_json(const ojson& j) {
  if (j.is_null()) return Jv();
  if (j.is_boolean()) return Jv(j.get<bool>());
  if (j.is_number_integer()) return Jv(j.get<long long>());
  if (j.is_number_unsigned()) return Jv(j.get<unsigned long long>());
  if (j.is_number_float()) return Jv(j.get<double>());
  if (j.is_string()) return Jv(j.get<std::string>());
  if (j.is_array()) {
    Jv a = Jv::array();
    for (const auto& e : j) a.push(from_json(e));
    return a;
  }
  Jv o = Jv::object();
  for (auto it = j.begin(); it != j.end(); ++it)
    o.set(it.key(), from_json(it.value()));
  return o;
}

Potential potential_from_config(const ojson& spec, const std::string& prefix) {
  std::string kind = req_str(spec, "kind", prefix);
  if (kind == "gaussian") {
    MatrixXd P = req_mat(spec, "precision", prefix);
    VectorXd mean = spec.contains("mean")
                        ? req_vec(spec, "mean", prefix)
                        : VectorXd(VectorXd::Zero(P.rows()));
    return gaussian_potential(mean, P);
  }
  if (kind == "isotropic_gaussian") {
    return isotropic_gaussian_potential(
        static_cast<int>(req_int(spec, "dim", prefix)),
        req_num(spec, "sigma2", prefix));
  }
  if (kind == "linreg") {
    return linreg_potential(
        req_mat(spec, "A", prefix), req_vec(spec, "w", prefix),
        req_num(spec, "tau", prefix),
        quadratic_prior(req_num(spec, "prior_precision", prefix)));
  }
  if (kind == "logistic_gaussian") {
    return logistic_gaussian_potential(
        req_mat(spec, "precision", prefix), req_vec(spec, "w", prefix),
        req_vec(spec, "a", prefix), req_num(spec, "c", prefix));
  }
  if (kind == "perturbed_quadratic") {
    return perturbed_quadratic_potential(req_mat(spec, "precision", prefix),
                                         req_num(spec, "eps", prefix));
  }
  throw ParamError("config: unknown potential kind '" + kind + "' at '" +
                   prefix + "kind'");
}

ParametricFamily family_from_config(const ojson& spec,
                                    const std::string& prefix) {
  std::string kind = req_str(spec, "kind", prefix);
  auto domain = req_interval(spec, "theta_domain", prefix);
  if (kind == "gaussian_mean_shift") {
    return gaussian_mean_shift_family(req_mat(spec, "precision", prefix),
                                      req_vec(spec, "direction", prefix),
                                      domain);
  }
  if (kind == "gaussian_precision_scale") {
    return gaussian_precision_scale_family(
        req_num(spec, "precision_a", prefix),
        req_num(spec, "precision_b", prefix),
        static_cast<int>(req_int(spec, "dim", prefix)), domain);
  }
  if (kind == "linreg_tau") {
    return linreg_tau_family(
        req_mat(spec, "A", prefix), req_vec(spec, "w", prefix),
        quadratic_prior(req_num(spec, "prior_precision", prefix)), domain);
  }
  if (kind == "contamination_path") {
    return contamination_path_family(
        static_cast<int>(req_int(spec, "dim", prefix)),
        req_num(spec, "sigma2", prefix), req_num(spec, "contam_mean", prefix),
        req_num(spec, "lik_prec", prefix), req_vec(spec, "data_mean", prefix),
        req_num(spec, "alpha_eps", prefix), domain);
  }
  throw ParamError("config: unknown family kind '" + kind + "' at '" + prefix +
                   "kind'");
}

Utility utility_from_config(const ojson& spec, const std::string& prefix) {
  std::string kind = req_str(spec, "kind", prefix);
  if (kind == "zero") {
    int d = static_cast<int>(req_int(spec, "dim", prefix));
    return Utility{d, 0.0, [](const VectorXd&) { return 0.0; },
                   [d](const VectorXd&) { return VectorXd(VectorXd::Zero(d)); },
                   [d](const VectorXd&) {
                     return MatrixXd(MatrixXd::Zero(d, d));
                   }};
  }
  if (kind == "linear") {
    VectorXd c = req_vec(spec, "c", prefix);
    int d = static_cast<int>(c.size());
    return Utility{d, 0.0,
                   [c](const VectorXd& x) { return c.dot(x); },
                   [c](const VectorXd&) { return c; },
                   [d](const VectorXd&) {
                     return MatrixXd(MatrixXd::Zero(d, d));
                   }};
  }
  if (kind == "quadratic") {
    // g(x) = -x'Qx/2 + b'x with Q PSD (concave)
    MatrixXd Q = req_mat(spec, "Q", prefix);
    VectorXd b = spec.contains("b") ? req_vec(spec, "b", prefix)
                                    : VectorXd(VectorXd::Zero(Q.rows()));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Q);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw ParamError("config: '" + prefix + "Q' must be PSD");
    int d = static_cast<int>(Q.rows());
    return Utility{d, es.eigenvalues().maxCoeff(),
                   [Q, b](const VectorXd& x) {
                     return -0.5 * x.dot(Q * x) + b.dot(x);
                   },
                   [Q, b](const VectorXd& x) { return VectorXd(-Q * x + b); },
                   [Q](const VectorXd&) { return MatrixXd(-Q); }};
  }
  throw ParamError("config: unknown utility kind '" + kind + "' at '" +
                   prefix + "kind'");
}

SolverConfig solver_from_config(const ojson& root, std::uint64_t seed,
                                int threads, const std::string& config_hash) {
  SolverConfig cfg;
  cfg.seed = seed;
  cfg.threads = threads;
  cfg.config_hash = config_hash;
  if (root.contains("solver")) {
    const ojson& s = root.at("solver");
    cfg.grid_m = static_cast<int>(opt_int(s, "grid_m", cfg.grid_m));
    cfg.mc_samples =
        static_cast<int>(opt_int(s, "mc_samples", cfg.mc_samples));
    cfg.tol = opt_num(s, "tol", cfg.tol);
    cfg.max_iters = opt_int(s, "max_iters", cfg.max_iters);
    std::string init = opt_str(s, "init", "auto");
    if (init != "auto") cfg.init_map = load_map_csv(init);
  }
  return cfg;
}

CaviConfig cavi_from_config(const ojson& root, std::uint64_t seed,
                            int threads) {
  CaviConfig cfg;
  cfg.seed = seed;
  cfg.threads = threads;
  if (root.contains("cavi")) {
    const ojson& s = root.at("cavi");
    cfg.grid_points = static_cast<int>(opt_int(s, "grid_points", 513));
    cfg.span = opt_num(s, "span", cfg.span);
    cfg.mc_samples = static_cast<int>(opt_int(s, "mc_samples", 2048));
    cfg.tol = opt_num(s, "tol", cfg.tol);
    cfg.max_sweeps = opt_int(s, "max_sweeps", cfg.max_sweeps);
    cfg.grid_m = static_cast<int>(opt_int(s, "grid_m", 64));
  }
  return cfg;
}

Jv report_header(const std::string& command, std::uint64_t seed,
                 const std::string& config_hash) {
  Jv j = Jv::object();
  j.set("version", kVersion);
  j.set("command", command);
  j.set("seed", static_cast<long long>(seed));
  j.set("config_hash", config_hash);
  return j;
}

Jv marginals_json(const TransportMap& map) {
  VectorXd mean, sd;
  pushforward_moments(map, mean, sd);
  Jv j = Jv::object();
  j.set("mean", Jv(mean));
  j.set("std", Jv(sd));
  return j;
}

struct RunContext {
  ojson cfg;
  std::string config_hash;
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out;

  std::string path(const std::string& name) const {
    return (out / name).string();
  }
};

void emit(const RunContext& ctx, const std::string& name, Jv& report) {
  report.set("inputs", from_json(ctx.cfg));
  write_file(ctx.path(name), report.dump());
}

// ---------------------------------------------------------------------------
// commands

int cmd_solve(RunContext& ctx) {
  Potential p = potential_from_config(req(ctx.cfg, "potential", ""),
                                      "potential.");
  SolverConfig scfg =
      solver_from_config(ctx.cfg, ctx.seed, ctx.threads, ctx.config_hash);
  LiftedSolution sol = solve_lifted(p, scfg);
  save_map_csv(sol.map, ctx.path("map.csv"));
  Jv rep = report_header("solve", ctx.seed, ctx.config_hash);
  rep.set("elbo", sol.elbo);
  rep.set("functional_value", sol.functional_value);
  rep.set("residual", sol.residual);
  rep.set("iterations", sol.iterations);
  rep.set("marginals", marginals_json(sol.map));
  rep.set("map_csv", "map.csv");
  emit(ctx, "solution.json", rep);
  return 0;
}

int cmd_cavi(RunContext& ctx) {
  Potential p = potential_from_config(req(ctx.cfg, "potential", ""),
                                      "potential.");
  CaviConfig ccfg = cavi_from_config(ctx.cfg, ctx.seed, ctx.threads);
  CaviResult res = cavi_solve(p, ccfg);
  save_map_csv(res.map, ctx.path("cavi_map.csv"));
  {
    std::string csv = "i,x,density\n";
    for (std::size_t i = 0; i < res.marginals.size(); ++i)
      for (Eigen::Index g = 0; g < res.marginals[i].x.size(); ++g)
        csv += std::to_string(i) + ',' +
               format_double(res.marginals[i].x[g]) + ',' +
               format_double(res.marginals[i].density[g]) + '\n';
    write_file(ctx.path("cavi_marginals.csv"), csv);
  }
  Jv rep = report_header("cavi", ctx.seed, ctx.config_hash);
  rep.set("sweeps", res.sweeps);
  rep.set("final_change", res.final_change);
  rep.set("marginals", marginals_json(res.map));
  rep.set("map_csv", "cavi_map.csv");
  rep.set("marginals_csv", "cavi_marginals.csv");
  emit(ctx, "cavi.json", rep);
  return 0;
}

int cmd_stability(RunContext& ctx) {
  Potential base = potential_from_config(req(ctx.cfg, "potential_base", ""),
                                         "potential_base.");
  Potential pert = potential_from_config(
      req(ctx.cfg, "potential_perturbed", ""), "potential_perturbed.");
  SolverConfig scfg =
      solver_from_config(ctx.cfg, ctx.seed, ctx.threads, ctx.config_hash);
  LiftedSolution sol_base = solve_lifted(base, scfg);
  LiftedSolution sol_pert = solve_lifted(pert, scfg);
  MCQuadrature q(scfg.seed, scfg.mc_samples, base.dim);
  MatrixXd samples_pert = push_samples(sol_pert.map, q);
  MatrixXd samples_base = push_samples(sol_base.map, q);
  StabilityReport r = lipschitz_w2_bound(base, pert, samples_pert,
                                         samples_base, ctx.seed);
  RewardBound rb = reward_bound(base, pert, samples_pert, false);
  RewardBound rbn = reward_bound(base, pert, samples_pert, true);
  EnvelopeCertificate env = density_envelope(base, q);
  double measured = lp_distance(sol_base.map, sol_pert.map, 2.0);

  save_map_csv(sol_base.map, ctx.path("map_base.csv"));
  save_map_csv(sol_pert.map, ctx.path("map_perturbed.csv"));
  Jv rep = report_header("stability", ctx.seed, ctx.config_hash);
  rep.set("bound_w2", r.bound_w2);
  rep.set("bound_w2_reversed", r.bound_w2_reversed);
  rep.set("bound_h1", r.bound_h1);
  rep.set("grad_diff_l2", r.grad_diff_l2);
  rep.set("reward_bound", rb.value);
  rep.set("reward_bound_normalized", rbn.value);
  rep.set("reward_mean_offset", rbn.mean_offset);
  {
    Jv envj = Jv::object();
    envj.set("C", env.C);
    envj.set("kl_upper", env.kl_upper);
    envj.set("second_moment_bound", env.second_moment_bound);
    rep.set("envelope", std::move(envj));
  }
  rep.set("measured_w2", measured);
  {
    Jv meta = Jv::object();
    meta.set("seed", static_cast<long long>(ctx.seed));
    meta.set("n", static_cast<long long>(q.n));
    meta.set("m", static_cast<long long>(scfg.grid_m));
    rep.set("meta", std::move(meta));
  }
  rep.set("map_csv_base", "map_base.csv");
  rep.set("map_csv_perturbed", "map_perturbed.csv");
  emit(ctx, "stability.json", rep);
  return 0;
}

int cmd_sensitivity(RunContext& ctx) {
  ParametricFamily fam =
      family_from_config(req(ctx.cfg, "family", ""), "family.");
  const ojson& s = req(ctx.cfg, "sensitivity", "");
  double theta0 = req_num(s, "theta0", "sensitivity.");
  int K = static_cast<int>(opt_int(s, "K", 6));
  SolverConfig scfg =
      solver_from_config(ctx.cfg, ctx.seed, ctx.threads, ctx.config_hash);
  LiftedSolution sol = solve_lifted(fam.at(theta0), scfg);
  MCQuadrature q(scfg.seed, scfg.mc_samples, fam.at(theta0).dim);
  HermiteBasis basis(K);
  SensitivitySolution der = solve_derivative(fam, theta0, sol.map, basis, q);

  Jv rep = report_header("sensitivity", ctx.seed, ctx.config_hash);
  rep.set("theta0", theta0);
  rep.set("K", K);
  {
    Jv rows = Jv::array();
    for (int i = 0; i < der.coeffs.rows(); ++i)
      rows.push(Jv(VectorXd(der.coeffs.row(i))));
    rep.set("coeffs", std::move(rows));
  }
  rep.set("residual", der.residual);
  rep.set("lambda_min_estimate", der.lambda_min);
  rep.set("matrix_condition", der.matrix_condition);
  if (s.contains("h_list")) {
    VectorXd hs = req_vec(s, "h_list", "sensitivity.");
    std::vector<double> h(hs.data(), hs.data() + hs.size());
    FdCheckReport fd = finite_diff_check(fam, theta0, h, der, scfg);
    Jv fdj = Jv::object();
    fdj.set("h", Jv(Eigen::Map<VectorXd>(fd.h.data(),
                                         static_cast<Eigen::Index>(fd.h.size()))));
    fdj.set("err", Jv(Eigen::Map<VectorXd>(
                       fd.err.data(), static_cast<Eigen::Index>(fd.err.size()))));
    fdj.set("slope", fd.slope);
    rep.set("fd_check", std::move(fdj));
  }
  emit(ctx, "sensitivity.json", rep);
  return 0;
}

int cmd_bvm(RunContext& ctx) {
  Potential f = potential_from_config(req(ctx.cfg, "potential", ""),
                                      "potential.");
  long n = req_int(ctx.cfg, "n", "");
  GaussianProduct sur = bvm_surrogate(f, n);
  Jv rep = report_header("bvm", ctx.seed, ctx.config_hash);
  rep.set("n", n);
  rep.set("x_n_star", Jv(sur.mean));
  rep.set("d_n", Jv(VectorXd(sur.std.array().square().inverse())));
  rep.set("bound_smooth", bvm_bound_smooth(f.alpha, f.beta, f.dim, n));
  if (ctx.cfg.contains("bounds")) {
    const ojson& b = ctx.cfg.at("bounds");
    rep.set("bound_local",
            bvm_bound_local(f.alpha, f.beta, req_num(b, "ell_n", "bounds."),
                            opt_num(b, "tau_n", 0.0),
                            req_num(b, "s_n", "bounds."),
                            req_num(b, "C", "bounds."), f.dim, n));
  }
  if (opt_int(ctx.cfg, "measure", 0) != 0) {
    // solve the full-sample target n*f and compare against the surrogate
    Potential scaled = f;
    double nn = static_cast<double>(n);
    Potential base = f;
    scaled.alpha = nn * f.alpha;
    scaled.beta = nn * f.beta;
    scaled.label = f.label + "_scaled";
    scaled.value = [base, nn](const VectorXd& x) {
      return nn * base.value(x);
    };
    scaled.grad = [base, nn](const VectorXd& x) {
      return VectorXd(nn * base.grad(x));
    };
    scaled.hessian = [base, nn](const VectorXd& x) {
      return MatrixXd(nn * base.hessian(x));
    };
    SolverConfig scfg =
        solver_from_config(ctx.cfg, ctx.seed, ctx.threads, ctx.config_hash);
    LiftedSolution sol = solve_lifted(scaled, scfg);
    TransportMap sur_map = map_from_gaussian_product(sur, sol.map.grid);
    rep.set("measured_w2", lp_distance(sol.map, sur_map, 2.0));
    save_map_csv(sol.map, ctx.path("map.csv"));
  }
  emit(ctx, "bvm.json", rep);
  return 0;
}

int cmd_linreg(RunContext& ctx) {
  MatrixXd A = req_mat(ctx.cfg, "A", "");
  VectorXd w = req_vec(ctx.cfg, "w", "");
  double tau = req_num(ctx.cfg, "tau", "");
  Prior1D prior = quadratic_prior(req_num(ctx.cfg, "prior_precision", ""));
  long n = req_int(ctx.cfg, "n", "");
  BvMReport r = bvm_linreg(A, w, tau, prior, n);
  Jv rep = report_header("linreg", ctx.seed, ctx.config_hash);
  rep.set("n", n);
  rep.set("x_n_star", Jv(r.x_n_star));
  rep.set("d_n", Jv(r.d_n));
  rep.set("bound_smooth", r.bound_smooth);
  if (opt_int(ctx.cfg, "measure", 0) != 0) {
    Potential p = linreg_potential(A, w, tau, prior);
    SolverConfig scfg =
        solver_from_config(ctx.cfg, ctx.seed, ctx.threads, ctx.config_hash);
    LiftedSolution sol = solve_lifted(p, scfg);
    GaussianProduct sur = bvm_linreg_surrogate(A, w, tau, prior);
    rep.set("measured_w2",
            lp_distance(sol.map, map_from_gaussian_product(sur, sol.map.grid),
                        2.0));
  }
  emit(ctx, "linreg.json", rep);
  return 0;
}

struct GaussPrior {
  VectorXd mean;
  double var;
};

GaussPrior gauss_prior_from_config(const ojson& spec,
                                   const std::string& prefix) {
  GaussPrior g{req_vec(spec, "mean", prefix), req_num(spec, "var", prefix)};
  if (!(g.var > 0.0))
    throw ParamError("config: '" + prefix + "var' must be > 0");
  return g;
}

Potential add_gauss_prior(const Potential& lik, const GaussPrior& pr,
                          const std::string& label) {
  if (pr.mean.size() != lik.dim)
    throw ShapeError("prior mean dimension mismatch");
  Potential lik_c = lik;
  GaussPrior p = pr;
  return Potential{
      lik.dim, lik.alpha + 1.0 / p.var, lik.beta + 1.0 / p.var, label,
      [lik_c, p](const VectorXd& x) {
        return lik_c.value(x) + 0.5 * (x - p.mean).squaredNorm() / p.var;
      },
      [lik_c, p](const VectorXd& x) {
        return VectorXd(lik_c.grad(x) + (x - p.mean) / p.var);
      },
      [lik_c, p](const VectorXd& x) {
        return MatrixXd(lik_c.hessian(x) +
                        MatrixXd::Identity(lik_c.dim, lik_c.dim) / p.var);
      }};
}

int cmd_prior_swap(RunContext& ctx) {
  Potential lik = potential_from_config(req(ctx.cfg, "likelihood", ""),
                                        "likelihood.");
  GaussPrior p = gauss_prior_from_config(req(ctx.cfg, "prior", ""), "prior.");
  GaussPrior pt = gauss_prior_from_config(req(ctx.cfg, "prior_tilde", ""),
                                          "prior_tilde.");
  double ell = req_num(ctx.cfg, "ell", "");
  Potential surrogate = add_gauss_prior(lik, pt, "surrogate_posterior");
  SolverConfig scfg =
      solver_from_config(ctx.cfg, ctx.seed, ctx.threads, ctx.config_hash);
  LiftedSolution sol = solve_lifted(surrogate, scfg);
  MCQuadrature q(scfg.seed, scfg.mc_samples, lik.dim);
  MatrixXd samples = push_samples(sol.map, q);
  std::function<double(const VectorXd&)> statistic;
  if (ctx.cfg.contains("statistic")) {
    const ojson& st = ctx.cfg.at("statistic");
    std::string kind = req_str(st, "kind", "statistic.");
    if (kind == "linear") {
      VectorXd gamma = req_vec(st, "gamma", "statistic.");
      statistic = [gamma](const VectorXd& x) { return gamma.dot(x); };
    } else if (kind == "l1norm") {
      statistic = [](const VectorXd& x) { return x.lpNorm<1>(); };
    } else {
      throw ParamError("config: unknown statistic kind '" + kind + "'");
    }
  }
  // alpha_{n,d} from the likelihood certificate, alpha~_d from the surrogate
  // prior curvature
  PriorSwap out = prior_swap_interval(
      ell,
      [&p](const VectorXd& x) { return VectorXd(-(x - p.mean) / p.var); },
      [&pt](const VectorXd& x) { return VectorXd(-(x - pt.mean) / pt.var); },
      samples, lik.alpha, 1.0 / pt.var, statistic);
  Jv rep = report_header("prior-swap", ctx.seed, ctx.config_hash);
  rep.set("delta", out.delta);
  if (out.statistic_mean) {
    rep.set("statistic_mean", *out.statistic_mean);
    Jv iv = Jv::array();
    iv.push(*out.interval_lo);
    iv.push(*out.interval_hi);
    rep.set("interval", std::move(iv));
  }
  emit(ctx, "prior_swap.json", rep);
  return 0;
}

int cmd_contamination(RunContext& ctx) {
  Potential lik = potential_from_config(req(ctx.cfg, "likelihood", ""),
                                        "likelihood.");
  GaussPrior p = gauss_prior_from_config(req(ctx.cfg, "prior", ""), "prior.");
  GaussPrior qp = gauss_prior_from_config(req(ctx.cfg, "perturb", ""),
                                          "perturb.");
  double eps = req_num(ctx.cfg, "eps", "");
  double alpha_eps = req_num(ctx.cfg, "alpha_eps", "");
  Potential posterior = add_gauss_prior(lik, p, "reference_posterior");
  SolverConfig scfg =
      solver_from_config(ctx.cfg, ctx.seed, ctx.threads, ctx.config_hash);
  LiftedSolution sol = solve_lifted(posterior, scfg);
  MCQuadrature q(scfg.seed, scfg.mc_samples, lik.dim);
  MatrixXd samples = push_samples(sol.map, q);
  auto gauss_logdens = [](const GaussPrior& g) {
    return LogDensity{
        [g](const VectorXd& x) {
          double d = static_cast<double>(x.size());
          return -0.5 * (x - g.mean).squaredNorm() / g.var -
                 0.5 * d * std::log(2.0 * M_PI * g.var);
        },
        [g](const VectorXd& x) { return VectorXd(-(x - g.mean) / g.var); }};
  };
  double bound = contamination_sensitivity(gauss_logdens(p), gauss_logdens(qp),
                                           eps, samples, lik.alpha, alpha_eps);
  Jv rep = report_header("contamination", ctx.seed, ctx.config_hash);
  rep.set("eps", eps);
  rep.set("bound", bound);
  emit(ctx, "contamination.json", rep);
  return 0;
}

int cmd_control(RunContext& ctx) {
  Utility g = utility_from_config(req(ctx.cfg, "utility", ""), "utility.");
  Utility gt = utility_from_config(req(ctx.cfg, "utility_tilde", ""),
                                   "utility_tilde.");
  double T = req_num(ctx.cfg, "t_horizon", "");
  double beta = std::max(g.beta, gt.beta);
  Potential vg = control_potential(g, T);
  Potential vt = control_potential(gt, T);
  SolverConfig scfg =
      solver_from_config(ctx.cfg, ctx.seed, ctx.threads, ctx.config_hash);
  LiftedSolution sol_g = solve_lifted(vg, scfg);
  LiftedSolution sol_t = solve_lifted(vt, scfg);
  MCQuadrature q(scfg.seed, scfg.mc_samples, g.dim);
  MatrixXd samples = push_samples(sol_g.map, q);
  double bound = control_value_stability(g, gt, beta, T, samples);
  double value_g = control_value_from_elbo(sol_g.elbo, g.dim, T);
  double value_t = control_value_from_elbo(sol_t.elbo, g.dim, T);
  Jv rep = report_header("control", ctx.seed, ctx.config_hash);
  rep.set("t_horizon", T);
  rep.set("bound", bound);
  rep.set("value", value_g);
  rep.set("value_tilde", value_t);
  rep.set("measured_value_diff", std::abs(value_t - value_g));
  emit(ctx, "control.json", rep);
  return 0;
}

}  // namespace

std::string default_fixture_path() {
  if (const char* env = std::getenv("MFVI_DATA_DIR"))
    return (fs::path(env) / "fixtures" / "logistic2d.json").string();
  return (fs::path("data") / "fixtures" / "logistic2d.json").string();
}

std::string fixture_input_string(const MatrixXd& P, const VectorXd& w,
                                 const VectorXd& a, double c, int grid_points,
                                 double span) {
  std::string s = "logistic2d|P=";
  for (int r = 0; r < P.rows(); ++r)
    for (int col = 0; col < P.cols(); ++col)
      s += format_double(P(r, col)) + ",";
  s += "|w=";
  for (int i = 0; i < w.size(); ++i) s += format_double(w[i]) + ",";
  s += "|a=";
  for (int i = 0; i < a.size(); ++i) s += format_double(a[i]) + ",";
  s += "|c=" + format_double(c);
  s += "|G=" + std::to_string(grid_points);
  s += "|span=" + format_double(span);
  return s;
}

Jv oracle_check(std::uint64_t seed, const std::string& fixture_path,
                bool* all_pass_out) {
  Jv checks = Jv::array();
  bool all_pass = true;
  auto record = [&](const std::string& name, bool pass, double value,
                    double threshold) {
    Jv c = Jv::object();
    c.set("name", name);
    c.set("pass", pass);
    c.set("value", value);
    c.set("threshold", threshold);
    checks.push(std::move(c));
    all_pass = all_pass && pass;
  };

  // closed-form Gaussian MFVI solves the fixed-point equation
  {
    MatrixXd P(3, 3);
    P << 3.0, 0.6, -0.4, 0.6, 2.0, 0.3, -0.4, 0.3, 1.5;
    VectorXd mean(3);
    mean << 0.3, -0.7, 1.1;
    GaussianProduct gp = gaussian_mfvi({mean, P});
    double res = gaussian_fixed_point_residual({mean, P}, gp);
    record("gaussian-mfvi-fixed-point", res <= 1e-8, res, 1e-8);
  }

  MatrixXd P2(2, 2);
  P2 << 2.0, 1.0, 1.0, 2.0;
  GaussianProduct oracle2 = gaussian_mfvi({VectorXd::Zero(2), P2});

  // brute-force grid minimizer agrees with the closed form
  {
    Potential p = gaussian_potential(VectorXd::Zero(2), P2);
    auto bf = brute_force_mfvi_2d(p);
    GridPtr grid = make_grid(64);
    TransportMap om = map_from_gaussian_product(oracle2, grid);
    double worst = std::max(w2_1d_grid_vs_map(bf.first, om, 0),
                            w2_1d_grid_vs_map(bf.second, om, 1));
    record("brute-force-vs-closed-form", worst <= 1e-4, worst, 1e-4);
  }

  SolverConfig scfg;
  scfg.seed = seed;

  // lifted solver recovers the Gaussian MFVI optimizer
  {
    Potential p = gaussian_potential(VectorXd::Zero(2), P2);
    LiftedSolution sol = solve_lifted(p, scfg);
    double err = lp_distance(sol.map,
                             map_from_gaussian_product(oracle2, sol.map.grid),
                             2.0);
    record("lifted-gaussian-recovery", err <= 1e-2, err, 1e-2);
    VectorXd mean, sd;
    pushforward_moments(sol.map, mean, sd);
    double std_err = (sd.array() - 1.0 / std::sqrt(2.0)).abs().maxCoeff();
    record("solve-marginal-stds", std_err <= 2e-3, std_err, 2e-3);
  }

  // standard Gaussian: identity map
  {
    Potential p = isotropic_gaussian_potential(2, 1.0);
    LiftedSolution sol = solve_lifted(p, scfg);
    double err =
        lp_distance(sol.map, identity_map(sol.map.grid, 2), 2.0);
    record("lifted-identity-recovery", err <= 1e-3, err, 1e-3);
  }

  // mean-shift pair: bound is tight and sound
  {
    const double delta = 0.5;
    MatrixXd id = MatrixXd::Identity(2, 2);
    Potential base = gaussian_potential(VectorXd::Zero(2), id);
    VectorXd shift(2);
    shift << delta, 0.0;
    Potential pert = gaussian_potential(shift, id);
    LiftedSolution sb = solve_lifted(base, scfg);
    LiftedSolution sp = solve_lifted(pert, scfg);
    MCQuadrature q(scfg.seed, scfg.mc_samples, 2);
    StabilityReport r =
        lipschitz_w2_bound(base, pert, push_samples(sp.map, q));
    double measured = lp_distance(sb.map, sp.map, 2.0);
    bool pass = measured <= r.bound_w2 * (1.0 + 1e-9) &&
                measured >= 0.95 * r.bound_w2;
    record("mean-shift-tightness", pass, measured / r.bound_w2, 0.95);
  }

  // committed 2-d logistic fixture: input hash and regeneration
  {
    bool ok = false;
    double worst = std::numeric_limits<double>::infinity();
    try {
      ojson fx = ojson::parse(read_file(fixture_path));
      const ojson& params = req(fx, "params", "fixture.");
      MatrixXd P = req_mat(params, "precision", "fixture.params.");
      VectorXd w = req_vec(params, "w", "fixture.params.");
      VectorXd a = req_vec(params, "a", "fixture.params.");
      double c = req_num(params, "c", "fixture.params.");
      int gp = static_cast<int>(req_int(fx, "grid_points", "fixture."));
      double span = req_num(fx, "span", "fixture.");
      std::string expect =
          hash_hex(fixture_input_string(P, w, a, c, gp, span));
      if (req_str(fx, "input_hash", "fixture.") != expect)
        throw InputError("fixture input_hash mismatch");
      Potential pot = logistic_gaussian_potential(P, w, a, c);
      BruteForceConfig bcfg;
      bcfg.grid_points = gp;
      bcfg.span = span;
      auto bf = brute_force_mfvi_2d(pot, bcfg);
      const ojson& marg = req(fx, "marginals", "fixture.");
      worst = 0.0;
      const GridDensity* got[2] = {&bf.first, &bf.second};
      for (int i = 0; i < 2; ++i) {
        VectorXd dens = req_vec(marg.at(i), "density", "fixture.marginals.");
        if (dens.size() != got[i]->density.size())
          throw InputError("fixture grid size mismatch");
        worst = std::max(worst,
                         (dens - got[i]->density).cwiseAbs().maxCoeff());
      }
      ok = worst <= 1e-9;
    } catch (const std::exception&) {
      ok = false;
    }
    record("logistic-fixture-regeneration", ok, worst, 1e-9);
  }

  // incomplete-gamma lemma spot value
  {
    double bound = incomplete_gamma_bound(1.0, 3.0, 1);
    double integral = 2.0 * integrate_adaptive(
                                [](double y) {
                                  return y * y * std::exp(-0.5 * y * y);
                                },
                                3.0, 60.0, 1e-13);
    bool pass = std::abs(bound - 9.0 * std::exp(-4.5)) <= 1e-12 &&
                integral <= bound;
    record("incomplete-gamma-spot", pass, integral / bound, 1.0);
  }

  // BvM smooth bound plug-in value
  {
    double b = bvm_bound_smooth(1.0, 1.0, 4, 100);
    record("bvm-smooth-plugin", std::abs(b - 0.4) <= 1e-15, b, 0.4);
  }

  Jv rep = Jv::object();
  rep.set("version", kVersion);
  rep.set("command", "oracle-check");
  rep.set("seed", static_cast<long long>(seed));
  rep.set("checks", std::move(checks));
  rep.set("all_pass", all_pass);
  if (all_pass_out) *all_pass_out = all_pass;
  return rep;
}

int run_config_file(const std::string& path) {
  try {
    std::string raw = read_file(path);
    ojson cfg;
    try {
      cfg = ojson::parse(raw);
    } catch (const nlohmann::json::exception& e) {
      throw ParamError(std::string("config: not valid JSON: ") + e.what());
    }
    RunContext ctx;
    ctx.cfg = std::move(cfg);
    ctx.config_hash = hash_hex(raw);
    std::string command = req_str(ctx.cfg, "command", "");
    ctx.seed = static_cast<std::uint64_t>(req_int(ctx.cfg, "seed", ""));
    ctx.threads = static_cast<int>(opt_int(ctx.cfg, "threads", 1));
    std::string out_dir = opt_str(ctx.cfg, "output_dir", ".");
    if (const char* env = std::getenv("MFVI_OUTPUT_DIR")) out_dir = env;
    ctx.out = fs::path(out_dir);
    fs::create_directories(ctx.out);

    if (command == "solve") return cmd_solve(ctx);
    if (command == "cavi") return cmd_cavi(ctx);
    if (command == "stability") return cmd_stability(ctx);
    if (command == "sensitivity") return cmd_sensitivity(ctx);
    if (command == "bvm") return cmd_bvm(ctx);
    if (command == "linreg") return cmd_linreg(ctx);
    if (command == "prior-swap") return cmd_prior_swap(ctx);
    if (command == "contamination") return cmd_contamination(ctx);
    if (command == "control") return cmd_control(ctx);
    if (command == "oracle-check") {
      std::string fixture = opt_str(ctx.cfg, "fixture", default_fixture_path());
      bool all_pass = false;
      Jv rep = oracle_check(ctx.seed, fixture, &all_pass);
      rep.set("config_hash", ctx.config_hash);
      write_file(ctx.path("oracle_check.json"), rep.dump());
      std::cout << rep.dump();
      return all_pass ? 0 : 1;
    }
    throw ParamError("config: unknown command '" + command + "'");
  } catch (const ConvergenceError& e) {
    Jv err = Jv::object();
    Jv inner = Jv::object();
    inner.set("type", "ConvergenceError");
    inner.set("message", e.what());
    inner.set("residual", e.residual);
    err.set("error", std::move(inner));
    std::cout << err.dump();
    return 2;
  } catch (const Error& e) {
    std::string type = "Error";
    if (dynamic_cast<const ParamError*>(&e)) type = "ParamError";
    else if (dynamic_cast<const DomainError*>(&e)) type = "DomainError";
    else if (dynamic_cast<const ShapeError*>(&e)) type = "ShapeError";
    else if (dynamic_cast<const InputError*>(&e)) type = "InputError";
    else if (dynamic_cast<const AssemblyError*>(&e)) type = "AssemblyError";
    else if (dynamic_cast<const MonotonicityError*>(&e))
      type = "MonotonicityError";
    else if (dynamic_cast<const EvalError*>(&e)) type = "EvalError";
    Jv err = Jv::object();
    Jv inner = Jv::object();
    inner.set("type", type);
    inner.set("message", e.what());
    err.set("error", std::move(inner));
    std::cout << err.dump();
    return 3;
  } catch (const std::exception& e) {
    Jv err = Jv::object();
    Jv inner = Jv::object();
    inner.set("type", "InternalError");
    inner.set("message", e.what());
    err.set("error", std::move(inner));
    std::cout << err.dump();
    return 4;
  }
}

}  // namespace mfvi
