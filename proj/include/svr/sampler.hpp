// Gibbs / Metropolis-within-Gibbs sampler for stochastic volatility
// regression:
//
//   Y_i(t) = M_{k_i}(t) + U_i(t) + eps,   D^p M_k = sigma_Mk W',  D^q U_i = sigma_Ui W'',
//   log sigma2_Ui ~ N(x_i' beta, sigma2),  p(beta, sigma2) propto 1 / sigma2.
//
// One sweep updates, in order: deviation paths U_i, mean paths M_k,
// sigma2_eps, sigma2_U0, sigma2_Mk, sigma2_Ui (independence MH), then
// (beta, sigma2).
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "svr/dataset.hpp"
#include "svr/errors.hpp"
#include "svr/random.hpp"
#include "svr/smoother.hpp"
#include "svr/statespace.hpp"

namespace svr {

struct ModelConfig {
  int p = 2;  // mean-curve SDE order
  int q = 1;  // deviation SDE order
  double a = 0.01;
  double b = 0.01;
  double sigma2_M0 = 1e4;
  int n_iter = 15000;
  int burn_in = 5000;
  int thin = 5;
  std::uint64_t seed = 1;

  int retained() const { return (n_iter - burn_in) / thin; }

  void validate() const {
    if (p < 1 || p > kMaxOrder || q < 1 || q > kMaxOrder)
      throw std::invalid_argument("SDE orders p and q must lie in [1, " +
                                  std::to_string(kMaxOrder) + "]");
    if (!(a > 0.0) || !(b > 0.0))
      throw std::invalid_argument("inverse-gamma hyperparameters a and b must be positive");
    if (!(sigma2_M0 > 0.0)) throw std::invalid_argument("sigma2_M0 must be positive");
    if (n_iter < 1 || burn_in < 0 || thin < 1 || burn_in >= n_iter)
      throw std::invalid_argument("need n_iter >= 1, 0 <= burn_in < n_iter and thin >= 1");
  }
};

/// Components held at fixed values; the corresponding update steps are
/// skipped. Used for conditional checks and the spline-equivalence setting.
struct FixedComponents {
  std::optional<double> sigma2_eps;
  std::optional<double> sigma2_U0;
  std::optional<std::vector<double>> sigma2_M;
  std::optional<std::vector<double>> sigma2_U;
  std::optional<Eigen::VectorXd> beta;  // fixes beta and sigma2 together
  std::optional<double> sigma2;
};

struct ChainState {
  std::vector<Eigen::MatrixXd> M;  // per group: p x (grid + 1), column 0 at t = 0
  std::vector<Eigen::MatrixXd> U;  // per subject: q x (n_i + 1), column 0 at t = 0
  double sigma2_eps = 1.0;
  double sigma2_U0 = 1.0;
  double sigma2 = 1.0;  // log-volatility regression residual variance
  std::vector<double> sigma2_M;
  std::vector<double> sigma2_U;
  Eigen::VectorXd beta;
};

struct PosteriorDraws {
  std::vector<ChainState> states;
  std::vector<int> iterations;                // 1-based iteration of each retained state
  std::vector<int> accepted_per_iteration;    // sigma2_Ui MH acceptances, every iteration
  std::vector<long> accepted_by_subject;
  long proposals = 0;
  long accepted = 0;
  long nonfinite_rejections = 0;

  double acceptance_rate() const {
    return proposals > 0 ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
  }
};

/// Dataset plus configuration with the per-interval matrices precomputed.
class SvrModel {
 public:
  SvrModel(Dataset data, ModelConfig config, FixedComponents fixed = {})
      : data_(std::move(data)), config_(config), fixed_(std::move(fixed)) {
    config_.validate();
    const std::size_t m = data_.size();
    subject_steps_.resize(m);
    subject_noise_chol_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      double prev = 0.0;
      for (double t : data_.subjects[i].times) {
        subject_steps_[i].push_back(Transition::make(config_.q, t - prev));
        subject_noise_chol_[i].emplace_back(subject_steps_[i].back().W);
        prev = t;
      }
    }
    double prev = 0.0;
    for (double t : data_.grid) {
      grid_steps_.push_back(Transition::make(config_.p, t - prev));
      grid_noise_chol_.emplace_back(grid_steps_.back().W);
      prev = t;
    }
    epoch_members_.resize(static_cast<std::size_t>(data_.groups));
    for (auto& g : epoch_members_) g.resize(data_.grid_size());
    for (std::size_t i = 0; i < m; ++i) {
      const auto gk = static_cast<std::size_t>(data_.subjects[i].group - 1);
      for (std::size_t j = 0; j < data_.subjects[i].times.size(); ++j)
        epoch_members_[gk][data_.grid_index[i][j]].push_back({i, j});
    }

    const bool regress = !fixed_.beta.has_value();
    if (m > 0) {
      design_ = data_.design();
      const auto k = design_.cols();
      if (regress) {
        if (static_cast<Eigen::Index>(m) <= k)
          throw std::invalid_argument("volatility regression needs more subjects (" +
                                      std::to_string(m) + ") than covariates (" +
                                      std::to_string(k) + ")");
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design_);
        if (qr.rank() < k)
          throw std::invalid_argument("covariate matrix is rank deficient");
      }
      xtx_llt_.compute(design_.transpose() * design_);
    }
  }

  const Dataset& data() const { return data_; }
  const ModelConfig& config() const { return config_; }
  const FixedComponents& fixed() const { return fixed_; }
  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::LLT<Eigen::MatrixXd>& xtx_llt() const { return xtx_llt_; }
  const std::vector<Transition>& subject_steps(std::size_t i) const { return subject_steps_[i]; }
  const std::vector<Transition>& grid_steps() const { return grid_steps_; }

  struct Member {
    std::size_t subject;
    std::size_t obs;
  };
  /// Subjects of 1-based group g observed at grid position j.
  const std::vector<Member>& epoch_members(int g, std::size_t j) const {
    return epoch_members_[static_cast<std::size_t>(g - 1)][j];
  }

  /// Sum over steps of e_j' W_j^{-1} e_j for a path with one column per epoch.
  double subject_quadratic_form(std::size_t i, const Eigen::MatrixXd& path) const {
    return quadratic_form(subject_steps_[i], subject_noise_chol_[i], path);
  }
  double grid_quadratic_form(const Eigen::MatrixXd& path) const {
    return quadratic_form(grid_steps_, grid_noise_chol_, path);
  }

 private:
  static double quadratic_form(const std::vector<Transition>& steps,
                               const std::vector<Eigen::LLT<StateMatrix>>& chol,
                               const Eigen::MatrixXd& path) {
    double sum = 0.0;
    for (std::size_t j = 0; j < steps.size(); ++j) {
      const StateVector e = path.col(static_cast<Eigen::Index>(j + 1)) -
                            steps[j].G * path.col(static_cast<Eigen::Index>(j));
      const StateVector z = chol[j].matrixL().solve(e);
      sum += z.squaredNorm();
    }
    return sum;
  }

  Dataset data_;
  ModelConfig config_;
  FixedComponents fixed_;
  std::vector<std::vector<Transition>> subject_steps_;
  std::vector<std::vector<Eigen::LLT<StateMatrix>>> subject_noise_chol_;
  std::vector<Transition> grid_steps_;
  std::vector<Eigen::LLT<StateMatrix>> grid_noise_chol_;
  std::vector<std::vector<std::vector<Member>>> epoch_members_;
  Eigen::MatrixXd design_;
  Eigen::LLT<Eigen::MatrixXd> xtx_llt_;
};

namespace detail {

inline LinearGaussianSSM integrated_wiener_ssm(int r, const std::vector<double>& times,
                                               const std::vector<Transition>& unit_steps,
                                               double diffusion, double initial_variance) {
  LinearGaussianSSM ssm;
  ssm.state_dim = r;
  ssm.times.reserve(times.size() + 1);
  ssm.times.push_back(0.0);
  ssm.times.insert(ssm.times.end(), times.begin(), times.end());
  ssm.rows.resize(ssm.times.size());
  ssm.transitions.reserve(unit_steps.size());
  for (const Transition& tr : unit_steps)
    ssm.transitions.push_back(Transition{tr.order, tr.delta, tr.G, diffusion * tr.W});
  ssm.initial_mean = StateVector::Zero(r);
  ssm.initial_cov = initial_variance * StateMatrix::Identity(r, r);
  return ssm;
}

inline StateVector unit_loading(int r) {
  StateVector f = StateVector::Zero(r);
  f(0) = 1.0;
  return f;
}

inline Eigen::MatrixXd path_matrix(const std::vector<StateVector>& states, int r) {
  Eigen::MatrixXd out(r, static_cast<Eigen::Index>(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = states[j];
  return out;
}

/// M_{k_i}(t_ij), first coordinate, at a subject's observation j.
inline double mean_at(const SvrModel& model, const ChainState& s, std::size_t i, std::size_t j) {
  const Dataset& d = model.data();
  const auto g = static_cast<std::size_t>(d.subjects[i].group - 1);
  return s.M[g](0, static_cast<Eigen::Index>(d.grid_index[i][j] + 1));
}

}  // namespace detail

/// Linear-Gaussian system for subject i's deviation path given the current
/// mean paths: rows y_ij - M(t_ij) with loading e_1 and variance sigma2_eps.
inline LinearGaussianSSM deviation_system(const SvrModel& model, const ChainState& s,
                                          std::size_t i) {
  const Subject& subj = model.data().subjects[i];
  const int q = model.config().q;
  LinearGaussianSSM ssm = detail::integrated_wiener_ssm(q, subj.times, model.subject_steps(i),
                                                        s.sigma2_U[i], s.sigma2_U0);
  const StateVector f = detail::unit_loading(q);
  for (std::size_t j = 0; j < subj.times.size(); ++j)
    ssm.rows[j + 1].push_back({f, subj.values[j] - detail::mean_at(model, s, i, j), s.sigma2_eps});
  return ssm;
}

/// Linear-Gaussian system for group g (1-based) on the merged grid: one row
/// y_i(t_j) - U_i(t_j) per member subject observed at t_j.
inline LinearGaussianSSM mean_system(const SvrModel& model, const ChainState& s, int g) {
  const Dataset& d = model.data();
  const int p = model.config().p;
  LinearGaussianSSM ssm =
      detail::integrated_wiener_ssm(p, d.grid, model.grid_steps(),
                                    s.sigma2_M[static_cast<std::size_t>(g - 1)],
                                    model.config().sigma2_M0);
  const StateVector f = detail::unit_loading(p);
  for (std::size_t j = 0; j < d.grid_size(); ++j) {
    for (const auto& mem : model.epoch_members(g, j)) {
      const double y = d.subjects[mem.subject].values[mem.obs] -
                       s.U[mem.subject](0, static_cast<Eigen::Index>(mem.obs + 1));
      ssm.rows[j + 1].push_back({f, y, s.sigma2_eps});
    }
  }
  return ssm;
}

/// Deviation paths. Subjects are conditionally independent given M; each uses its
/// own substream derived from one draw of `rng`.
template <class R>
void sample_U(const SvrModel& model, ChainState& s, R& rng) {
  const std::uint64_t base = rng();
  for (std::size_t i = 0; i < model.data().size(); ++i) {
    Rng sub = substream(base, {i});
    try {
      s.U[i] = detail::path_matrix(simulation_smoother(deviation_system(model, s, i), sub),
                                   model.config().q);
    } catch (const std::exception& e) {
      throw NumericalError("deviation path of subject '" + model.data().subjects[i].id +
                           "': " + e.what());
    }
  }
}

/// Mean paths, one group at a time.
template <class R>
void sample_M(const SvrModel& model, ChainState& s, R& rng) {
  const std::uint64_t base = rng();
  for (int g = 1; g <= model.data().groups; ++g) {
    Rng sub = substream(base, {static_cast<std::uint64_t>(g)});
    try {
      s.M[static_cast<std::size_t>(g - 1)] =
          detail::path_matrix(simulation_smoother(mean_system(model, s, g), sub), model.config().p);
    } catch (const std::exception& e) {
      throw NumericalError("mean path of group " + std::to_string(g) + ": " + e.what());
    }
  }
}

inline double residual_sum_of_squares(const SvrModel& model, const ChainState& s) {
  double rss = 0.0;
  const Dataset& d = model.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.subjects[i].times.size(); ++j) {
      const double r = d.subjects[i].values[j] - detail::mean_at(model, s, i, j) -
                       s.U[i](0, static_cast<Eigen::Index>(j + 1));
      rss += r * r;
    }
  }
  return rss;
}

/// Shape/scale of an inverse-gamma full conditional.
struct InverseGammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

/// Noise variance conditional: invGamma(a + N/2, b + RSS/2).
inline InverseGammaParams sigma_eps_conditional(const SvrModel& model, const ChainState& s) {
  const ModelConfig& c = model.config();
  return {c.a + 0.5 * static_cast<double>(model.data().observation_count()),
          c.b + 0.5 * residual_sum_of_squares(model, s)};
}

template <class R>
double sample_sigma_eps(const SvrModel& model, const ChainState& s, R& rng) {
  const InverseGammaParams ig = sigma_eps_conditional(model, s);
  return draw_inverse_gamma(ig.shape, ig.scale, rng);
}

/// Deviation initial-state variance conditional: invGamma(a + mq/2, b + sum_i |U_i0|^2 / 2).
inline InverseGammaParams sigma_U0_conditional(const SvrModel& model, const ChainState& s) {
  const ModelConfig& c = model.config();
  double ss = 0.0;
  for (const auto& u : s.U) ss += u.col(0).squaredNorm();
  return {c.a + 0.5 * static_cast<double>(model.data().size() * static_cast<std::size_t>(c.q)),
          c.b + 0.5 * ss};
}

template <class R>
double sample_sigma_U0(const SvrModel& model, const ChainState& s, R& rng) {
  const InverseGammaParams ig = sigma_U0_conditional(model, s);
  return draw_inverse_gamma(ig.shape, ig.scale, rng);
}

/// Mean-curve volatility conditional for 1-based group g. The shape uses the full merged
/// grid size n for every group.
inline InverseGammaParams sigma_M_conditional(const SvrModel& model, const ChainState& s, int g) {
  const ModelConfig& c = model.config();
  const double n = static_cast<double>(model.data().grid_size());
  return {c.a + 0.5 * n * c.p,
          c.b + 0.5 * model.grid_quadratic_form(s.M[static_cast<std::size_t>(g - 1)])};
}

template <class R>
std::vector<double> sample_sigma_M(const SvrModel& model, const ChainState& s, R& rng) {
  std::vector<double> out;
  for (int g = 1; g <= model.data().groups; ++g) {
    const InverseGammaParams ig = sigma_M_conditional(model, s, g);
    out.push_back(draw_inverse_gamma(ig.shape, ig.scale, rng));
  }
  return out;
}

/// Independence proposal for subject i: invGamma(a + n_i q / 2, b + Q_i / 2)
/// with Q_i the path's increment quadratic form.
inline InverseGammaParams sigma_U_proposal(const SvrModel& model, const ChainState& s,
                                           std::size_t i) {
  const ModelConfig& c = model.config();
  const double ni = static_cast<double>(model.data().subjects[i].times.size());
  return {c.a + 0.5 * ni * c.q, c.b + 0.5 * model.subject_quadratic_form(i, s.U[i])};
}

/// Log of the volatility MH acceptance ratio for moving subject i from `current`
/// to `proposal`: lognormal prior times Gaussian increment likelihood,
/// corrected by the proposal density.
inline double sigma_U_log_ratio(const SvrModel& model, const ChainState& s, std::size_t i,
                                double current, double proposal) {
  const int q = model.config().q;
  const double ni = static_cast<double>(model.data().subjects[i].times.size());
  const double quad = model.subject_quadratic_form(i, s.U[i]);
  const InverseGammaParams prop = sigma_U_proposal(model, s, i);
  const double mu = model.design().row(static_cast<Eigen::Index>(i)).dot(s.beta);
  // Gaussian increment log-density at volatility v, up to the v-free log|W_j| terms,
  // which cancel in the ratio.
  auto increments = [&](double v) {
    return -0.5 * ni * q * std::log(2.0 * M_PI * v) - 0.5 * quad / v;
  };
  const double num = log_lognormal_pdf(proposal, mu, s.sigma2) + increments(proposal) +
                     log_inverse_gamma_pdf(current, prop.shape, prop.scale);
  const double den = log_lognormal_pdf(current, mu, s.sigma2) + increments(current) +
                     log_inverse_gamma_pdf(proposal, prop.shape, prop.scale);
  return num - den;
}

struct MhOutcome {
  double value = 0.0;
  bool accepted = false;
  bool nonfinite = false;
};

template <class R>
MhOutcome sample_sigma_Ui_mh(const SvrModel& model, const ChainState& s, std::size_t i, R& rng) {
  const InverseGammaParams prop = sigma_U_proposal(model, s, i);
  const double current = s.sigma2_U[i];
  const double proposal = draw_inverse_gamma(prop.shape, prop.scale, rng);
  const double log_ratio = sigma_U_log_ratio(model, s, i, current, proposal);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  if (!std::isfinite(log_ratio) || !(proposal > 0.0) || !std::isfinite(proposal))
    return {current, false, true};
  if (log_ratio >= 0.0 || std::log(u) < log_ratio) return {proposal, true, false};
  return {current, false, false};
}

/// Volatility regression draw under the prior p(beta, sigma2) propto 1/sigma2:
/// sigma2 = (m-k) s^2 / tau with tau ~ chi2_{m-k}, beta ~ N(beta_hat, sigma2 (X'X)^{-1}).
struct RegressionDraw {
  Eigen::VectorXd beta;
  double sigma2 = 1.0;
};

template <class R>
RegressionDraw sample_beta_sigma2(const Eigen::VectorXd& z, const Eigen::MatrixXd& x,
                                  const Eigen::LLT<Eigen::MatrixXd>& xtx_llt, R& rng) {
  const Eigen::Index m = x.rows();
  const Eigen::Index k = x.cols();
  if (m <= k) throw std::invalid_argument("regression needs more rows than columns");
  const Eigen::VectorXd beta_hat = xtx_llt.solve(x.transpose() * z);
  const double rss = (z - x * beta_hat).squaredNorm();
  const double dof = static_cast<double>(m - k);
  std::chi_squared_distribution<double> chi2(dof);
  const double tau = chi2(rng);
  RegressionDraw out;
  out.sigma2 = rss / tau;  // (m-k) * sigma_hat^2 / tau
  std::normal_distribution<double> zdist;
  Eigen::VectorXd e(k);
  for (Eigen::Index c = 0; c < k; ++c) e(c) = zdist(rng);
  // (X'X)^{-1} = L^{-T} L^{-1}
  out.beta = beta_hat + std::sqrt(out.sigma2) * xtx_llt.matrixU().solve(e);
  return out;
}

template <class R>
RegressionDraw sample_beta_sigma2(const Eigen::VectorXd& z, const Eigen::MatrixXd& x, R& rng) {
  if (x.rows() <= x.cols()) throw std::invalid_argument("regression needs more rows than columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) throw std::invalid_argument("covariate matrix is rank deficient");
  Eigen::LLT<Eigen::MatrixXd> llt(x.transpose() * x);
  return sample_beta_sigma2(z, x, llt, rng);
}

inline Eigen::VectorXd log_volatilities(const ChainState& s) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(s.sigma2_U.size()));
  for (std::size_t i = 0; i < s.sigma2_U.size(); ++i) z(static_cast<Eigen::Index>(i)) = std::log(s.sigma2_U[i]);
  return z;
}

/// Starting state: unit variance components (sigma2_eps at a tenth of the
/// data variance), zero deviation paths, mean paths drawn given U = 0.
inline ChainState initial_state(const SvrModel& model) {
  const Dataset& d = model.data();
  const ModelConfig& c = model.config();
  const FixedComponents& fx = model.fixed();
  ChainState s;
  s.M.assign(static_cast<std::size_t>(d.groups),
             Eigen::MatrixXd::Zero(c.p, static_cast<Eigen::Index>(d.grid_size() + 1)));
  for (const Subject& subj : d.subjects)
    s.U.push_back(Eigen::MatrixXd::Zero(c.q, static_cast<Eigen::Index>(subj.times.size() + 1)));

  double sum = 0.0;
  double sum2 = 0.0;
  std::size_t n = 0;
  for (const Subject& subj : d.subjects)
    for (double y : subj.values) {
      sum += y;
      sum2 += y * y;
      ++n;
    }
  const double var = n > 1 ? (sum2 - sum * sum / n) / static_cast<double>(n - 1) : 1.0;
  s.sigma2_eps = fx.sigma2_eps.value_or(var > 0.0 ? 0.1 * var : 1.0);
  s.sigma2_U0 = fx.sigma2_U0.value_or(1.0);
  s.sigma2_M = fx.sigma2_M.value_or(std::vector<double>(static_cast<std::size_t>(d.groups), 1.0));
  s.sigma2_U = fx.sigma2_U.value_or(std::vector<double>(d.size(), 1.0));
  s.sigma2 = fx.sigma2.value_or(1.0);
  s.beta = fx.beta.value_or(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.covariate_count())));
  if (s.sigma2_M.size() != static_cast<std::size_t>(d.groups) || s.sigma2_U.size() != d.size())
    throw std::invalid_argument("fixed variance vectors have the wrong length");

  Rng rng = substream(c.seed, {0xF00D});
  sample_M(model, s, rng);
  return s;
}

namespace detail {
enum StepTag : std::uint64_t { kStepU = 1, kStepM, kStepEps, kStepU0, kStepMk, kStepUi, kStepBeta };

inline const char* step_name(std::uint64_t tag) {
  switch (tag) {
    case kStepU: return "U paths";
    case kStepM: return "M paths";
    case kStepEps: return "sigma2_eps";
    case kStepU0: return "sigma2_U0";
    case kStepMk: return "sigma2_M";
    case kStepUi: return "sigma2_U";
    case kStepBeta: return "beta/sigma2";
  }
  return "?";
}
}  // namespace detail

/// One full sweep. `iteration` keys the random substreams, so a state after k
/// sweeps is a deterministic function of (seed, config, data).
inline void sweep(const SvrModel& model, ChainState& s, int iteration, PosteriorDraws* stats = nullptr) {
  const ModelConfig& c = model.config();
  const FixedComponents& fx = model.fixed();
  auto rng_for = [&](std::uint64_t tag) {
    return substream(c.seed, {static_cast<std::uint64_t>(iteration), tag});
  };
  std::uint64_t tag = detail::kStepU;
  try {
    Rng r1 = rng_for(detail::kStepU);
    sample_U(model, s, r1);

    tag = detail::kStepM;
    Rng r2 = rng_for(tag);
    sample_M(model, s, r2);

    tag = detail::kStepEps;
    if (!fx.sigma2_eps) {
      Rng r = rng_for(tag);
      s.sigma2_eps = sample_sigma_eps(model, s, r);
    }
    tag = detail::kStepU0;
    if (!fx.sigma2_U0) {
      Rng r = rng_for(tag);
      s.sigma2_U0 = sample_sigma_U0(model, s, r);
    }
    tag = detail::kStepMk;
    if (!fx.sigma2_M) {
      Rng r = rng_for(tag);
      s.sigma2_M = sample_sigma_M(model, s, r);
    }
    tag = detail::kStepUi;
    if (!fx.sigma2_U) {
      const std::uint64_t base = rng_for(tag)();
      int accepted = 0;
      for (std::size_t i = 0; i < model.data().size(); ++i) {
        Rng r = substream(base, {i});
        const MhOutcome o = sample_sigma_Ui_mh(model, s, i, r);
        s.sigma2_U[i] = o.value;
        if (stats) {
          ++stats->proposals;
          if (o.accepted) {
            ++stats->accepted;
            ++stats->accepted_by_subject[i];
            ++accepted;
          }
          if (o.nonfinite) ++stats->nonfinite_rejections;
        }
      }
      if (stats) stats->accepted_per_iteration.push_back(accepted);
    }
    tag = detail::kStepBeta;
    if (!fx.beta && model.data().size() > 0) {
      Rng r = rng_for(tag);
      const RegressionDraw rd =
          sample_beta_sigma2(log_volatilities(s), model.design(), model.xtx_llt(), r);
      s.beta = rd.beta;
      s.sigma2 = rd.sigma2;
    }
  } catch (const std::exception& e) {
    throw NumericalError("iteration " + std::to_string(iteration) + ", step " +
                         detail::step_name(tag) + ": " + e.what());
  }
}

/// Runs n_iter sweeps and keeps every thin-th state after burn-in.
inline PosteriorDraws run_chain(const SvrModel& model) {
  const ModelConfig& c = model.config();
  PosteriorDraws draws;
  draws.accepted_by_subject.assign(model.data().size(), 0);
  draws.states.reserve(static_cast<std::size_t>(std::max(0, c.retained())));
  ChainState s = initial_state(model);
  for (int it = 1; it <= c.n_iter; ++it) {
    sweep(model, s, it, &draws);
    if (it > c.burn_in && (it - c.burn_in) % c.thin == 0) {
      draws.states.push_back(s);
      draws.iterations.push_back(it);
    }
  }
  return draws;
}

inline PosteriorDraws run_chain(const ModelConfig& config, const Dataset& data) {
  return run_chain(SvrModel(data, config));
}

}  // namespace svr
