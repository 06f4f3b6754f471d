// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Simulation-study criteria run the same command pipeline
// as the `svr` executable.
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gp_instances.hpp"
#include "mc_stats.hpp"
#include "oracles.hpp"
#include "spline_fixtures.hpp"
#include "svr/svr.hpp"

using namespace svr;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  std::printf("%s criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void note(const std::string& text) {
  std::printf("  note: %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

fs::path scratch_root() {
  const fs::path root = fs::temp_directory_path() / ("svr_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  return root;
}

struct StudyRun {
  fs::path sim, fits, eval;
  double fit_seconds = 0.0;
};

StudyRun run_study(const fs::path& root, int case_id, int replicates, std::size_t subjects, int iters, int burn,
                   int thin, int jobs) {
  StudyRun r{root / "sim", root / "fits", root / "eval"};
  cli::RunConfig c;
  c.case_id = case_id;
  c.replicates = replicates;
  c.subjects = subjects;
  c.model.seed = 1;
  c.jobs = jobs;
  c.out = r.sim;
  cli::cmd_simulate(c);
  c.data = r.sim;
  c.out = r.fits;
  c.model.n_iter = iters;
  c.model.burn_in = burn;
  c.model.thin = thin;
  const auto t0 = std::chrono::steady_clock::now();
  cli::cmd_fit(c);
  r.fit_seconds = seconds_since(t0);
  c.fits = r.fits;
  c.out = r.eval;
  cli::cmd_evaluate(c);
  return r;
}

// replicate -> method -> metric row
using MetricRows = std::map<std::string, std::map<std::string, std::map<std::string, double>>>;

MetricRows read_metrics(const fs::path& eval) {
  const io::CsvTable t = io::read_csv(eval / "metrics_by_replicate.csv");
  MetricRows out;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 2; c < t.header.size(); ++c)
      if (t.rows[r][c] != "NA") out[t.rows[r][0]][t.rows[r][1]][t.header[c]] = t.number(r, c);
  return out;
}

// ---------------------------------------------------------------------------

void criteria_case_one(const fs::path& root) {
  const int reps = 10;
  const StudyRun run = run_study(root / "case1", 1, reps, 100, 3000, 1000, 4, worker_count());
  const MetricRows m = read_metrics(run.eval);
  double svr_sum = 0.0, se_sum = 0.0;
  int wins = 0, covered = 0;
  for (const auto& [rep, methods] : m) {
    const double svr = methods.at("SVR").at("ase_MU");
    const double ncs = methods.at("NCS").at("ase_MU");
    svr_sum += svr;
    se_sum += methods.at("SVR").at("se_beta[2]");
    if (svr < ncs) ++wins;
    const auto summary = cli::detail::parameter_table(io::read_csv(run.fits / rep / "summary.csv"), "hpd_lo");
    const auto hi = cli::detail::parameter_table(io::read_csv(run.fits / rep / "summary.csv"), "hpd_hi");
    if (summary.at("beta[2]") <= 2.0 && 2.0 <= hi.at("beta[2]")) ++covered;
    note(rep + ": ASE SVR " + fmt("%.3f", svr) + ", NCS " + fmt("%.3f", ncs));
  }
  const double mean_ase = svr_sum / reps;
  const double per_rep = run.fit_seconds * worker_count() / reps;
  report(1, mean_ase >= 0.25 && mean_ase <= 0.55 && wins >= 8, "Case I ASE(M+U) reproduction",
         "mean SVR ASE " + fmt("%.3f", mean_ase) + ", SVR below NCS on " + std::to_string(wins) +
             "/10, about " + fmt("%.0f", per_rep) + " s per replicate");
  const double mean_se = se_sum / reps;
  report(2, covered >= 8 && mean_se <= 0.3, "volatility regression recovery",
         "95% HPD of beta_2 covers 2 on " + std::to_string(covered) + "/10, mean SE(beta_2) " +
             fmt("%.3f", mean_se));
}

void criterion_case_two(const fs::path& root) {
  const StudyRun run = run_study(root / "case2", 2, 10, 100, 3000, 1000, 4, worker_count());
  const io::CsvTable t = io::read_csv(run.eval / "metrics.csv");
  std::map<std::string, double> ase;
  for (std::size_t r = 0; r < t.rows.size(); ++r) ase[t.rows[r][0]] = t.number(r, t.column("ase_MU"));
  report(3, ase.at("SVR") <= ase.at("NCS"), "Case II non-inferiority",
         "mean ASE(M+U) SVR " + fmt("%.3f", ase.at("SVR")) + " vs NCS " + fmt("%.3f", ase.at("NCS")));
}

void criterion_oracle() {
  std::mt19937_64 rng(4);
  double worst_mean = 0.0, worst_cov = 0.0, worst_ll = 0.0;
  for (int k = 0; k < 50; ++k) {
    const fixtures::Agreement a = fixtures::compare_with_direct(fixtures::random_gp_instance(rng, 10, 3));
    worst_mean = std::max(worst_mean, a.mean_error);
    worst_cov = std::max(worst_cov, a.cov_error);
    worst_ll = std::max(worst_ll, a.loglik_error);
  }
  report(4, worst_mean < 1e-6 && worst_cov < 1e-6 && worst_ll < 1e-8, "smoother matches direct GP conditioning",
         "50 instances, max mean error " + fmt("%.1e", worst_mean) + ", cov " + fmt("%.1e", worst_cov) +
             ", log-likelihood " + fmt("%.1e", worst_ll));
}

void criterion_transition() {
  double worst_w = 0.0;
  for (int r = 1; r <= 4; ++r)
    for (double delta : {0.1, 0.5, 1.0, 2.0}) {
      const Eigen::MatrixXd ref = oracle::process_noise_quadrature(r, delta);
      const Eigen::MatrixXd w = process_noise(r, delta);
      worst_w = std::max(worst_w, (w - ref).cwiseAbs().maxCoeff());
    }
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> gap(1e-3, 2.0);
  double worst_semi = 0.0, worst_ck = 0.0;
  for (int trial = 0; trial < 400; ++trial) {
    const int r = 1 + trial % 4;
    const double d1 = gap(rng), d2 = gap(rng);
    const StateMatrix g2 = transition_matrix(r, d2);
    worst_semi = std::max(worst_semi,
                          (transition_matrix(r, d1 + d2) - g2 * transition_matrix(r, d1)).cwiseAbs().maxCoeff());
    const StateMatrix composed = g2 * process_noise(r, d1) * g2.transpose() + process_noise(r, d2);
    worst_ck = std::max(worst_ck, (process_noise(r, d1 + d2) - composed).cwiseAbs().maxCoeff());
  }
  report(5, worst_w < 1e-8 && worst_semi < 1e-10 && worst_ck < 1e-10, "exact discretization",
         "W vs quadrature " + fmt("%.1e", worst_w) + ", semigroup " + fmt("%.1e", worst_semi) +
             ", Chapman-Kolmogorov " + fmt("%.1e", worst_ck));
}

// Six subjects in two groups, single covariate, deviation order 1.
Dataset calibration_dataset() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.2, 0.8);
  Dataset d;
  d.covariate_names = {"x1"};
  for (int i = 0; i < 6; ++i) {
    Subject s;
    s.id = "c" + std::to_string(i);
    s.group = 1 + i % 2;
    double t = 0.0;
    for (int j = 0; j < 6; ++j) {
      t += u(rng);
      s.times.push_back(t);
      s.values.push_back(std::sin(t) + s.group + 0.5 * z(rng));
    }
    s.covariates = {1.0, z(rng)};
    d.subjects.push_back(s);
  }
  d.finalize(2);
  return d;
}

void criterion_conditionals() {
  const Dataset d = calibration_dataset();
  ModelConfig c;
  c.seed = 5;
  const SvrModel model(d, c);
  ChainState s = initial_state(model);
  for (int it = 1; it <= 200; ++it) sweep(model, s, it);

  const int n = 100000;
  Rng rng(77);
  double worst_z = 0.0;
  auto check = [&](const InverseGammaParams& g, auto&& draw) {
    std::vector<double> x(n);
    for (auto& v : x) v = draw();
    const double target = g.scale / (g.shape - 1.0);
    const double sd = target / std::sqrt(g.shape - 2.0);
    worst_z = std::max(worst_z, std::abs(fixtures::mean_of(x) - target) / (sd / std::sqrt(double(n))));
  };
  check(sigma_eps_conditional(model, s), [&] { return sample_sigma_eps(model, s, rng); });
  check(sigma_U0_conditional(model, s), [&] { return sample_sigma_U0(model, s, rng); });
  for (int g = 1; g <= d.groups; ++g)
    check(sigma_M_conditional(model, s, g),
          [&] { return sample_sigma_M(model, s, rng)[static_cast<std::size_t>(g - 1)]; });
  for (std::size_t i = 0; i < d.size(); ++i) {
    const InverseGammaParams g = sigma_U_proposal(model, s, i);
    check(g, [&] { return draw_inverse_gamma(g.shape, g.scale, rng); });
  }

  // The volatility MH step as a chain on its own, everything else held at s.
  const std::size_t i = 0;
  const double quad = model.subject_quadratic_form(i, s.U[i]);
  const double ni = static_cast<double>(d.subjects[i].times.size());
  const double mu = model.design().row(0).dot(s.beta);
  auto log_target_u = [&](double u) {  // density of log v, unnormalized
    const double v = std::exp(u);
    return log_lognormal_pdf(v, mu, s.sigma2) - 0.5 * ni * c.q * u - 0.5 * quad / v + u;
  };
  const int grid = 400001;
  const double lo = -40.0, hi = 40.0, h = (hi - lo) / (grid - 1);
  std::vector<double> logd(grid), cdf(grid, 0.0);
  double peak = -INFINITY;
  for (int k = 0; k < grid; ++k) peak = std::max(peak, logd[k] = log_target_u(lo + k * h));
  for (int k = 1; k < grid; ++k)
    cdf[k] = cdf[k - 1] + 0.5 * h * (std::exp(logd[k - 1] - peak) + std::exp(logd[k] - peak));
  for (double& v : cdf) v /= cdf.back();
  auto target_cdf = [&](double v) {
    const double pos = (std::log(v) - lo) / h;
    if (pos <= 0) return 0.0;
    if (pos >= grid - 1) return 1.0;
    const int k = static_cast<int>(pos);
    return cdf[k] + (pos - k) * (cdf[k + 1] - cdf[k]);
  };
  const int draws = 200000;
  std::vector<double> chain;
  chain.reserve(draws);
  ChainState t = s;
  long accepted = 0;
  for (int k = 0; k < draws; ++k) {
    const MhOutcome o = sample_sigma_Ui_mh(model, t, i, rng);
    t.sigma2_U[i] = o.value;
    accepted += o.accepted;
    chain.push_back(o.value);
  }
  std::sort(chain.begin(), chain.end());
  double ks = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double f = target_cdf(chain[static_cast<std::size_t>(k)]);
    ks = std::max({ks, (k + 1.0) / draws - f, f - double(k) / draws});
  }
  report(6, worst_z < 3.0 && ks < 0.02, "conditional-sampler calibration",
         "worst inverse-gamma mean deviation " + fmt("%.2f", worst_z) + " SE over 100000 draws, MH KS " +
             fmt("%.4f", ks) + " over 200000 draws (acceptance " + fmt("%.2f", double(accepted) / draws) + ")");
}

void criterion_simulation_smoother() {
  // Brownian motion, x(0) ~ N(0, 1), observed at t = 1..5 with noise 0.5.
  LinearGaussianSSM m;
  m.state_dim = 1;
  m.times = {0, 1, 2, 3, 4, 5};
  m.rows.resize(6);
  const double ys[] = {0.5, 1.2, -0.3, 0.8, 2.0};
  for (int j = 1; j <= 5; ++j) {
    m.rows[static_cast<std::size_t>(j)].push_back({StateVector::Ones(1), ys[j - 1], 0.5});
    m.transitions.push_back(Transition::make(1, 1.0));
  }
  m.initial_mean = StateVector::Zero(1);
  m.initial_cov = StateMatrix::Identity(1, 1);

  // Dense posterior: prior cov 1 + min(s, t); observation precision 2 on x_1..x_5.
  Eigen::MatrixXd prior(6, 6);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) prior(a, b) = 1.0 + std::min(a, b);
  Eigen::MatrixXd prec = prior.inverse();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(6);
  for (int j = 1; j <= 5; ++j) {
    prec(j, j) += 2.0;
    rhs(j) = 2.0 * ys[j - 1];
  }
  const Eigen::MatrixXd cov = prec.inverse();
  const Eigen::VectorXd mean = cov * rhs;
  const SmootherOutput ks = kalman_smooth(m);
  double analytic_gap = 0.0;
  for (int j = 0; j < 6; ++j)
    analytic_gap = std::max({analytic_gap, std::abs(ks.smoothed_means[static_cast<std::size_t>(j)](0) - mean(j)),
                             std::abs(ks.smoothed_covs[static_cast<std::size_t>(j)](0, 0) - cov(j, j))});

  const int n = 20000;
  Eigen::MatrixXd x(n, 6);
  Rng rng(2);
  for (int d = 0; d < n; ++d) {
    const auto path = simulation_smoother(m, rng);
    for (int j = 0; j < 6; ++j) x(d, j) = path[static_cast<std::size_t>(j)](0);
  }
  const Eigen::RowVectorXd emean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - emean;
  const Eigen::MatrixXd ecov = centered.transpose() * centered / (n - 1.0);
  double worst = 0.0;
  for (int a = 0; a < 6; ++a) {
    worst = std::max(worst, std::abs(emean(a) - mean(a)) / std::sqrt(cov(a, a) / n));
    for (int b = a; b < 6; ++b) {
      const double se = std::sqrt((cov(a, a) * cov(b, b) + cov(a, b) * cov(a, b)) / (n - 1.0));
      worst = std::max(worst, std::abs(ecov(a, b) - cov(a, b)) / se);
    }
  }
  report(7, worst < 3.0 && analytic_gap < 1e-10, "simulation smoother moments",
         "20000 draws, worst mean/covariance deviation " + fmt("%.2f", worst) + " SE, RTS vs dense " +
             fmt("%.1e", analytic_gap));
}

void criterion_spline() {
  using fixtures::four_subjects;
  // DPSS monotonicity and normal equations over random penalties and orders.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> lam(-4, 1);
  bool monotone = true;
  double worst_residual = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const Dataset d = four_subjects(trial % 2 ? std::vector<int>{1, 1, 2, 2} : std::vector<int>{1, 2, 1, 2});
    const SplineBasis b(d, 1 + trial % 3, 1 + (trial / 3) % 2);
    std::vector<double> lm{std::pow(10.0, lam(rng)), std::pow(10.0, lam(rng))};
    std::vector<double> lu;
    for (int i = 0; i < 4; ++i) lu.push_back(std::pow(10.0, lam(rng)));
    const SplineFit f = backfit(b, lm, lu, {1e-8, 20000, 1e-13});
    for (std::size_t k = 1; k < f.dpss_history.size(); ++k)
      monotone = monotone && f.dpss_history[k] <= f.dpss_history[k - 1] * (1.0 + 1e-12);
    worst_residual = std::max(worst_residual, fixtures::normal_equation_residual(b, f));
  }

  // Bayes-spline equivalence: two groups of two subjects, variances fixed,
  // diffuse initial states, smoothing parameters from the variance formulas.
  const Dataset d = four_subjects({1, 1, 2, 2});
  const double s2e = 0.4;
  const std::vector<double> s2m{3.0, 5.0}, s2u{0.5, 2.0, 1.0, 0.8};
  ModelConfig c;
  c.p = 2, c.q = 1, c.sigma2_M0 = 1e8, c.n_iter = 30000, c.burn_in = 1000, c.thin = 1, c.seed = 17;
  FixedComponents fx;
  fx.sigma2_eps = s2e;
  fx.sigma2_U0 = 1e8;
  fx.sigma2_M = s2m;
  fx.sigma2_U = s2u;
  fx.beta = Eigen::VectorXd::Zero(1);
  fx.sigma2 = 1.0;
  const SvrModel model(d, c, fx);
  const PosteriorDraws p = run_chain(model);

  std::vector<double> lm, lu;
  variance_lambdas(d, s2e, s2m, s2u, lm, lu);
  const SplineBasis b(d, 2, 1);
  const SplineFit printed = backfit(b, lm, lu, {1e-8, 20000, 1e-13});
  std::vector<double> per_group;
  for (int g = 1; g <= d.groups; ++g)
    per_group.push_back(lm[static_cast<std::size_t>(g - 1)] / static_cast<double>(d.members(g).size()));
  const SplineFit corrected = backfit(b, per_group, lu, {1e-8, 20000, 1e-13});
  const auto exact = fixtures::bayes_mean(d, 2, 1, s2e, s2m, s2u);

  double z_printed = 0.0, z_corrected = 0.0, z_exact = 0.0, gap_printed = 0.0, max_se = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Eigen::VectorXd fp = b.mean_at_subject(printed, i) + b.deviation_at_subject(printed, i);
    const Eigen::VectorXd fc = b.mean_at_subject(corrected, i) + b.deviation_at_subject(corrected, i);
    for (std::size_t j = 0; j < d.subjects[i].times.size(); ++j) {
      std::vector<double> chain;
      for (const ChainState& st : p.states)
        chain.push_back(svr::detail::mean_at(model, st, i, j) + st.U[i](0, static_cast<Eigen::Index>(j + 1)));
      const double avg = fixtures::mean_of(chain), se = fixtures::batch_se(chain);
      const auto jj = static_cast<Eigen::Index>(j);
      max_se = std::max(max_se, se);
      gap_printed = std::max(gap_printed, std::abs(avg - fp(jj)));
      z_printed = std::max(z_printed, std::abs(avg - fp(jj)) / se);
      z_corrected = std::max(z_corrected, std::abs(avg - fc(jj)) / se);
      z_exact = std::max(z_exact, std::abs(avg - exact[i](jj)) / se);
    }
  }
  report(8, monotone && worst_residual < 1e-8 && z_printed < 3.0, "spline module",
         std::string("DPSS non-increasing on 30 instances: ") + (monotone ? "yes" : "no") +
             ", normal-equation residual " + fmt("%.1e", worst_residual) +
             ", Bayes-spline worst gap " + fmt("%.2f", z_printed) + " MC SE (" + fmt("%.4f", gap_printed) +
             " absolute, MC SE up to " + fmt("%.4f", max_se) + ") with the summed group penalty");
  note("same chain vs DPSS with per-group penalty lambda_Mk / m_k: worst gap " + fmt("%.2f", z_corrected) +
       " MC SE");
  note("same chain vs exact Gaussian posterior mean: worst gap " + fmt("%.2f", z_exact) + " MC SE");
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

void criterion_determinism(const fs::path& root) {
  // Second run uses more threads: output must not depend on scheduling.
  run_study(root / "det_a", 1, 3, 20, 400, 100, 2, 1);
  run_study(root / "det_b", 1, 3, 20, 400, 100, 2, 3);
  const auto a = snapshot(root / "det_a"), b = snapshot(root / "det_b");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second != bytes) ++differing;
  }
  report(9, a.size() == b.size() && differing == 0 && !a.empty(), "byte-identical repeated runs",
         std::to_string(a.size()) + " files compared across 1-thread and 3-thread runs, " +
             std::to_string(differing) + " differ");
}

}  // namespace

// With arguments, runs only the listed criteria (1 and 2 share one study).
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));
  auto wanted = [&](std::initializer_list<int> ids) {
    if (only.empty()) return true;
    for (int id : ids)
      if (std::find(only.begin(), only.end(), id) != only.end()) return true;
    return false;
  };
  const fs::path root = scratch_root();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (wanted({4})) criterion_oracle();
    if (wanted({5})) criterion_transition();
    if (wanted({6})) criterion_conditionals();
    if (wanted({7})) criterion_simulation_smoother();
    if (wanted({8})) criterion_spline();
    if (wanted({9})) criterion_determinism(root);
    if (wanted({1, 2})) criteria_case_one(root);
    if (wanted({3})) criterion_case_two(root);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    ++failures;
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  std::printf("%d criterion failure(s), %.0f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
