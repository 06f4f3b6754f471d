// Command implementations behind the `svr` executable: simulate, fit,
// evaluate and summarize. Kept in the library so tests can drive them
// in-process.
#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "svr/dataset.hpp"
#include "svr/io.hpp"
#include "svr/metrics.hpp"
#include "svr/sampler.hpp"
#include "svr/simulate.hpp"
#include "svr/spline.hpp"
#include "svr/summary.hpp"

namespace svr::cli {

namespace fs = std::filesystem;

struct RunConfig {
  ModelConfig model;
  int jobs = 1;
  bool ncs = true;        // per-subject cubic smoothing spline trajectories
  bool two_stage = true;  // empirical-volatility regression on NCS deviations
  fs::path out;
  int case_id = 1;
  int replicates = 1;
  std::size_t subjects = 100;
  fs::path observations;
  fs::path covariates;
  fs::path data;   // simulation output (evaluate) or dataset directory (fit)
  fs::path fits;   // fit output (evaluate, summarize)
  fs::path draws;  // draws.csv (summarize)
  double hpd_mass = 0.95;
  bool overwrite = false;
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end || value.empty())
    throw std::invalid_argument("invalid value '" + value + "' for " + key);
  return v;
}

}  // namespace detail

/// Applies one configuration entry. Keys match the long flag names.
inline void set_key(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "seed") c.model.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "iters") c.model.n_iter = parse_number<int>(key, value);
  else if (key == "burnin") c.model.burn_in = parse_number<int>(key, value);
  else if (key == "thin") c.model.thin = parse_number<int>(key, value);
  else if (key == "p") c.model.p = parse_number<int>(key, value);
  else if (key == "q") c.model.q = parse_number<int>(key, value);
  else if (key == "a") c.model.a = parse_number<double>(key, value);
  else if (key == "b") c.model.b = parse_number<double>(key, value);
  else if (key == "sigma2_M0") c.model.sigma2_M0 = parse_number<double>(key, value);
  else if (key == "jobs") c.jobs = parse_number<int>(key, value);
  else if (key == "case") c.case_id = parse_number<int>(key, value);
  else if (key == "replicates") c.replicates = parse_number<int>(key, value);
  else if (key == "subjects") c.subjects = parse_number<std::size_t>(key, value);
  else if (key == "hpd_mass") c.hpd_mass = parse_number<double>(key, value);
  else if (key == "out") c.out = value;
  else if (key == "observations") c.observations = value;
  else if (key == "covariates") c.covariates = value;
  else if (key == "data") c.data = value;
  else if (key == "fits") c.fits = value;
  else if (key == "draws") c.draws = value;
  else if (key == "overwrite") c.overwrite = value == "true" || value == "1";
  else if (key == "baseline") {
    c.ncs = c.two_stage = false;
    bool none = false;
    std::size_t start = 0;
    for (;;) {
      const auto pos = value.find(',', start);
      const std::string item = io::detail::trim(value.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (item == "ncs") c.ncs = true;
      else if (item == "two-stage") c.two_stage = true;
      else if (item == "none") none = true;
      else throw std::invalid_argument("baseline must be ncs, two-stage or none, got '" + item + "'");
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (none && (c.ncs || c.two_stage)) throw std::invalid_argument("baseline 'none' cannot be combined");
  } else {
    throw std::invalid_argument("unknown configuration key '" + key + "'");
  }
}

/// Reads `key = value` lines; '#' starts a comment.
inline void load_config_file(RunConfig& c, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (io::detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path.string() + " line " + std::to_string(lineno) + ": expected key = value");
    try {
      set_key(c, io::detail::trim(line.substr(0, eq)), io::detail::trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void require_exists(const fs::path& p, const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string("missing required ") + what);
  if (!fs::exists(p)) throw std::invalid_argument(std::string(what) + " not found: " + p.string());
}

inline void validate(const RunConfig& c, const std::string& command) {
  if (c.out.empty()) throw std::invalid_argument("missing required --out");
  if (c.jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  if (!(c.hpd_mass > 0.0 && c.hpd_mass < 1.0)) throw std::invalid_argument("hpd_mass must lie in (0, 1)");
  if (command == "simulate") {
    if (c.case_id != 1 && c.case_id != 2) throw std::invalid_argument("case must be 1 or 2");
    if (c.replicates < 1 || c.replicates > 999) throw std::invalid_argument("replicates must lie in [1, 999]");
    if (c.subjects < 1) throw std::invalid_argument("subjects must be positive");
  } else if (command == "fit") {
    c.model.validate();
    if (c.data.empty()) {
      require_exists(c.observations, "observations file");
      require_exists(c.covariates, "covariates file");
    } else {
      require_exists(c.data, "data directory");
    }
  } else if (command == "evaluate") {
    require_exists(c.data, "data directory");
    require_exists(c.fits, "fits directory");
  } else if (command == "summarize") {
    if (c.draws.empty() && c.fits.empty()) throw std::invalid_argument("summarize needs --draws or --fits");
    if (!c.draws.empty()) require_exists(c.draws, "draws file");
    else require_exists(c.fits / "draws.csv", "draws file");
  } else {
    throw std::invalid_argument("unknown command '" + command + "'");
  }
}

/// Output directory written under `<out>.partial` and renamed into place
/// once complete, so a failed run never leaves a half-written `<out>`.
class StagedDirectory {
 public:
  StagedDirectory(fs::path target, bool overwrite) : target_(std::move(target)), overwrite_(overwrite) {
    if (fs::exists(target_) && !overwrite_ && !fs::is_empty(target_))
      throw std::invalid_argument("output directory " + target_.string() + " exists and is not empty (use --overwrite)");
    staging_ = target_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  ~StagedDirectory() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }
  StagedDirectory(const StagedDirectory&) = delete;
  StagedDirectory& operator=(const StagedDirectory&) = delete;

  const fs::path& path() const { return staging_; }

  void commit() {
    if (fs::exists(target_)) fs::remove_all(target_);
    if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
    fs::rename(staging_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool overwrite_;
  bool committed_ = false;
};

inline std::string replicate_name(int r) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "rep_%03d", r);
  return buf;
}

/// Runs tasks 0..n-1 on up to `jobs` threads; rethrows the first failure.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& task) {
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        task(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(jobs, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline void write_truth(const SimResult& sim, const fs::path& dir, int case_id) {
  const SimTruth& t = sim.truth;
  io::CsvWriter w(dir / "truth.csv");
  w.row({"subject_id", "group", "time", "m_true", "u_true", "observed"});
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    const auto& m = t.M[static_cast<std::size_t>(t.groups[i] - 1)];
    for (std::size_t j = 0; j < t.grid.size(); ++j)
      w.row({t.ids[i], std::to_string(t.groups[i]), io::format_double(t.grid[j]), io::format_double(m[j]),
             io::format_double(t.U[i][j]), t.observed[i][j] ? "1" : "0"});
  }
  w.close();
  io::CsvWriter p(dir / "truth_params.csv");
  p.row({"parameter", "value"});
  p.row({"case", std::to_string(case_id)});
  for (std::size_t i = 0; i < t.sigma2_U.size(); ++i)
    p.row({"sigma2_U[" + std::to_string(i + 1) + "]", io::format_double(t.sigma2_U[i])});
  for (Eigen::Index l = 0; l < t.beta.size(); ++l)
    p.row({"beta[" + std::to_string(l) + "]", io::format_double(t.beta(l))});
  p.close();
}

/// Replicate r (1-based) uses seed + r - 1.
inline void cmd_simulate(const RunConfig& c) {
  validate(c, "simulate");
  StagedDirectory out(c.out, c.overwrite);
  parallel_for(c.replicates, c.jobs, [&](int k) {
    const std::uint64_t seed = c.model.seed + static_cast<std::uint64_t>(k);
    SimOptions opts;
    opts.subjects = c.subjects;
    const SimResult sim = c.case_id == 1 ? gen_case1(seed, opts) : gen_case2(seed, opts);
    const fs::path dir = out.path() / replicate_name(k + 1);
    fs::create_directories(dir);
    io::write_dataset(sim.data, dir);
    write_truth(sim, dir, c.case_id);
  });
  out.commit();
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Cubic smoothing spline with GCV, or the least-squares line (its infinite
/// smoothing limit) for series too short for a cubic fit.
inline SeriesSpline baseline_curve(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() >= 4) return ncs_fit(t, y);
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index j = 0; j < n; ++j) x.row(j) << 1.0, t[static_cast<std::size_t>(j)];
  const Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  SeriesSpline s;
  s.knots = t;
  s.alpha = x.colPivHouseholderQr().solve(yy);
  s.gamma = Eigen::VectorXd::Zero(n);
  s.fitted = x * s.alpha;
  s.lambda = std::numeric_limits<double>::infinity();
  return s;
}

inline std::vector<std::string> draw_columns(const Dataset& d) {
  std::vector<std::string> cols{"sigma2_eps", "sigma2_U0", "sigma2"};
  for (int g = 1; g <= d.groups; ++g) cols.push_back("sigma2_M[" + std::to_string(g) + "]");
  for (std::size_t i = 1; i <= d.size(); ++i) cols.push_back("sigma2_U[" + std::to_string(i) + "]");
  for (std::size_t l = 0; l < d.covariate_count(); ++l) cols.push_back("beta[" + std::to_string(l) + "]");
  return cols;
}

inline std::vector<double> draw_values(const ChainState& s) {
  std::vector<double> v{s.sigma2_eps, s.sigma2_U0, s.sigma2};
  v.insert(v.end(), s.sigma2_M.begin(), s.sigma2_M.end());
  v.insert(v.end(), s.sigma2_U.begin(), s.sigma2_U.end());
  for (Eigen::Index l = 0; l < s.beta.size(); ++l) v.push_back(s.beta(l));
  return v;
}

inline void write_summary(const std::vector<std::string>& names, const std::vector<std::vector<double>>& columns,
                          double mass, const fs::path& path) {
  io::CsvWriter w(path);
  w.row({"parameter", "mean", "mode", "sd", "hpd_lo", "hpd_hi"});
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& x = columns[c];
    if (x.empty()) continue;
    const ParameterSummary s = x.size() >= kMinSummaryDraws ? summarize(x, mass) : describe(x, mass);
    w.row({names[c], io::format_double(s.mean), io::format_double(s.mode), io::format_double(s.sd),
           io::format_double(s.hpd_lo), io::format_double(s.hpd_hi)});
  }
  w.close();
}

inline void fit_dataset(const Dataset& d, const RunConfig& c, std::uint64_t seed, const fs::path& dir) {
  ModelConfig mc = c.model;
  mc.seed = seed;
  const SvrModel model(d, mc);
  const PosteriorDraws draws = run_chain(model);
  if (draws.states.size() < kMinSummaryDraws)
    std::cerr << "warning: only " << draws.states.size()
              << " retained draws; summaries below 100 draws are unreliable\n";

  const std::vector<std::string> names = draw_columns(d);
  std::vector<std::vector<double>> columns(names.size());
  {
    io::CsvWriter w(dir / "draws.csv");
    std::vector<std::string> head{"iteration"};
    head.insert(head.end(), names.begin(), names.end());
    w.row(head);
    for (std::size_t k = 0; k < draws.states.size(); ++k) {
      const std::vector<double> v = draw_values(draws.states[k]);
      std::vector<std::string> r{std::to_string(draws.iterations[k])};
      for (std::size_t c2 = 0; c2 < v.size(); ++c2) {
        r.push_back(io::format_double(v[c2]));
        columns[c2].push_back(v[c2]);
      }
      w.row(r);
    }
    w.close();
  }
  write_summary(names, columns, c.hpd_mass, dir / "summary.csv");

  {
    io::CsvWriter w(dir / "fitted.csv");
    w.row({"subject_id", "time", "y", "m_hat", "u_hat", "lo", "hi"});
    const double n = static_cast<double>(draws.states.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      const Subject& s = d.subjects[i];
      for (std::size_t j = 0; j < s.times.size(); ++j) {
        double m = 0.0, u = 0.0;
        std::vector<double> total;
        total.reserve(draws.states.size());
        for (const ChainState& st : draws.states) {
          const double mv = svr::detail::mean_at(model, st, i, j);
          const double uv = st.U[i](0, static_cast<Eigen::Index>(j + 1));
          m += mv;
          u += uv;
          total.push_back(mv + uv);
        }
        std::string lo = "NA", hi = "NA";
        if (!total.empty()) {
          const auto [a, b] = hpd_interval(total, c.hpd_mass);
          lo = io::format_double(a);
          hi = io::format_double(b);
        }
        w.row({s.id, io::format_double(s.times[j]), io::format_double(s.values[j]),
               n > 0 ? io::format_double(m / n) : "NA", n > 0 ? io::format_double(u / n) : "NA", lo, hi});
      }
    }
    w.close();
  }

  {
    io::CsvWriter w(dir / "diagnostics.csv");
    w.row({"key", "value"});
    w.row({"seed", std::to_string(seed)});
    w.row({"iterations", std::to_string(mc.n_iter)});
    w.row({"burn_in", std::to_string(mc.burn_in)});
    w.row({"thin", std::to_string(mc.thin)});
    w.row({"retained", std::to_string(draws.states.size())});
    w.row({"mh_proposals", std::to_string(draws.proposals)});
    w.row({"mh_accepted", std::to_string(draws.accepted)});
    w.row({"mh_acceptance_rate", io::format_double(draws.acceptance_rate())});
    w.row({"nonfinite_rejections", std::to_string(draws.nonfinite_rejections)});
    w.close();
  }

  if (!c.ncs && !c.two_stage) return;
  std::vector<SeriesSpline> curves;
  for (const Subject& s : d.subjects) curves.push_back(baseline_curve(s.times, s.values));
  if (c.ncs) {
    io::CsvWriter w(dir / "ncs_fitted.csv");
    w.row({"subject_id", "time", "y", "fitted", "lambda"});
    for (std::size_t i = 0; i < d.size(); ++i) {
      const Subject& s = d.subjects[i];
      for (std::size_t j = 0; j < s.times.size(); ++j)
        w.row({s.id, io::format_double(s.times[j]), io::format_double(s.values[j]),
               io::format_double(curves[i].fitted(static_cast<Eigen::Index>(j))),
               std::isfinite(curves[i].lambda) ? io::format_double(curves[i].lambda) : "inf"});
    }
    w.close();
  }
  if (c.two_stage) {
    // Deviation = own curve minus the group's average curve, at own times.
    std::vector<std::vector<double>> dev, times;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const Subject& s = d.subjects[i];
      const std::vector<std::size_t> members = d.members(s.group);
      std::vector<double> u;
      for (double t : s.times) {
        double avg = 0.0;
        for (std::size_t k : members) avg += curves[k](t);
        u.push_back(curves[i](t) - avg / static_cast<double>(members.size()));
      }
      dev.push_back(std::move(u));
      times.push_back(s.times);
    }
    OlsResult ols;
    try {
      ols = two_stage_beta(dev, times, d.design());
    } catch (const std::invalid_argument& e) {
      std::cerr << "warning: two-stage baseline skipped: " << e.what() << '\n';
      return;
    }
    if (ols.excluded > 0)
      std::cerr << "warning: two-stage regression excluded " << ols.excluded
                << " subject(s) with zero empirical volatility\n";
    io::CsvWriter w(dir / "two_stage.csv");
    w.row({"parameter", "estimate", "std_error", "p_value"});
    for (Eigen::Index l = 0; l < ols.beta.size(); ++l)
      w.row({"beta[" + std::to_string(l) + "]", io::format_double(ols.beta(l)), io::format_double(ols.std_error(l)),
             io::format_double(ols.p_value(l))});
    w.close();
    io::CsvWriter v(dir / "two_stage_subjects.csv");
    v.row({"subject_id", "empirical_volatility", "included"});
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double ev = empirical_volatility(dev[i], times[i]);
      v.row({d.subjects[i].id, io::format_double(ev), ev > 0.0 ? "1" : "0"});
    }
    v.close();
  }
}

/// Dataset directories under `root`: root itself when it holds
/// observations.csv, otherwise its rep_* subdirectories in name order.
inline std::vector<fs::path> replicate_dirs(const fs::path& root, const char* marker) {
  if (fs::exists(root / marker)) return {root};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().rfind("rep_", 0) == 0 && fs::exists(e.path() / marker))
      out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::invalid_argument("no " + std::string(marker) + " found under " + root.string());
  return out;
}

/// Replicate r (1-based, in directory order) runs its chain with seed + r - 1.
inline void cmd_fit(const RunConfig& c) {
  validate(c, "fit");
  StagedDirectory out(c.out, c.overwrite);
  if (c.data.empty()) {
    const Dataset d = io::ingest(c.observations, c.covariates);
    fit_dataset(d, c, c.model.seed, out.path());
  } else {
    const std::vector<fs::path> dirs = replicate_dirs(c.data, "observations.csv");
    const bool single = dirs.size() == 1 && dirs[0] == c.data;
    parallel_for(static_cast<int>(dirs.size()), c.jobs, [&](int k) {
      const Dataset d = io::ingest(dirs[static_cast<std::size_t>(k)] / "observations.csv",
                                   dirs[static_cast<std::size_t>(k)] / "covariates.csv");
      const fs::path dir = single ? out.path() : out.path() / dirs[static_cast<std::size_t>(k)].filename();
      fs::create_directories(dir);
      fit_dataset(d, c, c.model.seed + static_cast<std::uint64_t>(k), dir);
    });
  }
  out.commit();
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct MethodMetrics {
  std::optional<double> ase_mu;
  std::optional<double> ase_logvol;
  std::vector<std::optional<double>> se_beta;
};

namespace detail {

using PointKey = std::pair<std::string, double>;

inline std::map<PointKey, double> column_by_point(const io::CsvTable& t, std::initializer_list<const char*> sum_of) {
  const std::size_t id = t.column("subject_id");
  const std::size_t time = t.column("time");
  std::vector<std::size_t> cols;
  for (const char* c : sum_of) cols.push_back(t.column(c));
  std::map<PointKey, double> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    double v = 0.0;
    for (std::size_t c : cols) v += t.number(r, c);
    out[{t.rows[r][id], t.number(r, time)}] = v;
  }
  return out;
}

inline std::map<std::string, double> parameter_table(const io::CsvTable& t, const char* value_column) {
  const std::size_t p = t.column("parameter");
  const std::size_t v = t.column(value_column);
  std::map<std::string, double> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) out[t.rows[r][p]] = t.number(r, v);
  return out;
}

}  // namespace detail

struct ReplicateTruth {
  int case_id = 1;
  std::vector<std::string> ids;
  std::map<detail::PointKey, double> trajectory;  // observed points only
  std::vector<std::vector<detail::PointKey>> points;
  std::vector<double> log_sigma2_U;
  std::vector<double> beta;
};

inline ReplicateTruth read_truth(const fs::path& dir) {
  ReplicateTruth t;
  const io::CsvTable tt = io::read_csv(dir / "truth.csv");
  const std::size_t id = tt.column("subject_id"), time = tt.column("time"), m = tt.column("m_true"),
                    u = tt.column("u_true"), obs = tt.column("observed");
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < tt.rows.size(); ++r) {
    if (tt.rows[r][obs] != "1") continue;
    const std::string& sid = tt.rows[r][id];
    auto [it, fresh] = index.emplace(sid, t.ids.size());
    if (fresh) {
      t.ids.push_back(sid);
      t.points.emplace_back();
    }
    const detail::PointKey key{sid, tt.number(r, time)};
    t.trajectory[key] = tt.number(r, m) + tt.number(r, u);
    t.points[it->second].push_back(key);
  }
  const auto params = detail::parameter_table(io::read_csv(dir / "truth_params.csv"), "value");
  t.case_id = static_cast<int>(params.at("case"));
  for (std::size_t i = 1;; ++i) {
    auto it = params.find("sigma2_U[" + std::to_string(i) + "]");
    if (it == params.end()) break;
    t.log_sigma2_U.push_back(std::log(it->second));
  }
  for (std::size_t l = 0;; ++l) {
    auto it = params.find("beta[" + std::to_string(l) + "]");
    if (it == params.end()) break;
    t.beta.push_back(it->second);
  }
  return t;
}

inline double trajectory_ase(const ReplicateTruth& t, const std::map<detail::PointKey, double>& est,
                             const fs::path& source) {
  std::vector<std::vector<double>> e, tr;
  for (const auto& pts : t.points) {
    e.emplace_back();
    tr.emplace_back();
    for (const auto& key : pts) {
      auto it = est.find(key);
      if (it == est.end())
        throw io::InputError(source.string() + ": no estimate for subject '" + key.first + "' at time " +
                             io::format_double(key.second));
      e.back().push_back(it->second);
      tr.back().push_back(t.trajectory.at(key));
    }
  }
  return ase_trajectory(e, tr);
}

inline MethodMetrics evaluate_svr(const ReplicateTruth& t, const fs::path& fit) {
  MethodMetrics mm;
  mm.ase_mu = trajectory_ase(t, detail::column_by_point(io::read_csv(fit / "fitted.csv"), {"m_hat", "u_hat"}),
                             fit / "fitted.csv");
  if (t.log_sigma2_U.empty()) return mm;
  const io::CsvTable draws = io::read_csv(fit / "draws.csv");
  auto column_mean = [&](const std::string& name) {
    const std::size_t c = draws.column(name);
    double s = 0.0;
    for (std::size_t r = 0; r < draws.rows.size(); ++r) s += draws.number(r, c);
    return s / static_cast<double>(draws.rows.size());
  };
  if (draws.rows.empty()) throw io::InputError((fit / "draws.csv").string() + ": no draws");
  std::vector<double> est;
  for (std::size_t i = 1; i <= t.log_sigma2_U.size(); ++i)
    est.push_back(std::log(column_mean("sigma2_U[" + std::to_string(i) + "]")));
  mm.ase_logvol = ase_logvol(est, t.log_sigma2_U);
  std::vector<double> b;
  for (std::size_t l = 0; l < t.beta.size(); ++l) b.push_back(column_mean("beta[" + std::to_string(l) + "]"));
  for (double v : se_beta(b, t.beta)) mm.se_beta.push_back(v);
  return mm;
}

inline std::optional<MethodMetrics> evaluate_ncs(const ReplicateTruth& t, const fs::path& fit) {
  const bool has_ncs = fs::exists(fit / "ncs_fitted.csv");
  const bool has_two = fs::exists(fit / "two_stage.csv");
  if (!has_ncs && !has_two) return std::nullopt;
  MethodMetrics mm;
  if (has_ncs)
    mm.ase_mu = trajectory_ase(t, detail::column_by_point(io::read_csv(fit / "ncs_fitted.csv"), {"fitted"}),
                               fit / "ncs_fitted.csv");
  if (has_two && !t.log_sigma2_U.empty()) {
    const io::CsvTable subj = io::read_csv(fit / "two_stage_subjects.csv");
    const std::size_t ev = subj.column("empirical_volatility");
    std::vector<double> est, tru;
    for (std::size_t r = 0; r < subj.rows.size() && r < t.log_sigma2_U.size(); ++r) {
      const double v = subj.number(r, ev);
      if (v > 0.0) {
        est.push_back(std::log(v));
        tru.push_back(t.log_sigma2_U[r]);
      }
    }
    if (!est.empty()) mm.ase_logvol = ase_logvol(est, tru);
    const auto beta = detail::parameter_table(io::read_csv(fit / "two_stage.csv"), "estimate");
    std::vector<double> b;
    for (std::size_t l = 0; l < t.beta.size(); ++l) b.push_back(beta.at("beta[" + std::to_string(l) + "]"));
    for (double v : se_beta(b, t.beta)) mm.se_beta.push_back(v);
  }
  return mm;
}

inline std::string optional_cell(const std::optional<double>& v) { return v ? io::format_double(*v) : "NA"; }

/// Writes metrics_by_replicate.csv and metrics.csv (replicate means, one row
/// per method with trajectory, log-volatility and coefficient columns).
inline void cmd_evaluate(const RunConfig& c) {
  validate(c, "evaluate");
  const std::vector<fs::path> sims = replicate_dirs(c.data, "truth.csv");
  const bool single = sims.size() == 1 && sims[0] == c.data;
  std::vector<ReplicateTruth> truths(sims.size());
  std::vector<MethodMetrics> svr_m(sims.size());
  std::vector<std::optional<MethodMetrics>> ncs_m(sims.size());
  parallel_for(static_cast<int>(sims.size()), c.jobs, [&](int k) {
    const auto kk = static_cast<std::size_t>(k);
    const fs::path fit = single ? c.fits : c.fits / sims[kk].filename();
    require_exists(fit / "fitted.csv", "fitted trajectories");
    truths[kk] = read_truth(sims[kk]);
    svr_m[kk] = evaluate_svr(truths[kk], fit);
    ncs_m[kk] = evaluate_ncs(truths[kk], fit);
  });

  std::size_t nbeta = truths.front().beta.size();
  const bool volatility = !truths.front().log_sigma2_U.empty();
  std::vector<std::string> metric_names{"ase_MU"};
  if (volatility) metric_names.push_back("ase_log_sigma2_U");
  for (std::size_t l = 0; l < nbeta; ++l) metric_names.push_back("se_beta[" + std::to_string(l) + "]");
  auto cells = [&](const MethodMetrics& m) {
    std::vector<std::optional<double>> v{m.ase_mu};
    if (volatility) v.push_back(m.ase_logvol);
    for (std::size_t l = 0; l < nbeta; ++l) v.push_back(l < m.se_beta.size() ? m.se_beta[l] : std::nullopt);
    return v;
  };

  StagedDirectory out(c.out, c.overwrite);
  io::CsvWriter w(out.path() / "metrics_by_replicate.csv");
  std::vector<std::string> head{"replicate", "method"};
  head.insert(head.end(), metric_names.begin(), metric_names.end());
  w.row(head);
  std::map<std::string, std::vector<std::vector<std::optional<double>>>> by_method;
  for (std::size_t k = 0; k < sims.size(); ++k) {
    const std::string rep = sims[k].filename().string();
    std::vector<std::pair<std::string, MethodMetrics>> rows{{"SVR", svr_m[k]}};
    if (ncs_m[k]) rows.emplace_back("NCS", *ncs_m[k]);
    for (const auto& [method, m] : rows) {
      const auto v = cells(m);
      std::vector<std::string> r{rep, method};
      for (const auto& x : v) r.push_back(optional_cell(x));
      w.row(r);
      by_method[method].push_back(v);
    }
  }
  w.close();

  io::CsvWriter t(out.path() / "metrics.csv");
  std::vector<std::string> thead{"method", "replicates"};
  thead.insert(thead.end(), metric_names.begin(), metric_names.end());
  t.row(thead);
  for (const char* method : {"SVR", "NCS"}) {
    auto it = by_method.find(method);
    if (it == by_method.end()) continue;
    std::vector<std::string> r{method, std::to_string(it->second.size())};
    for (std::size_t col = 0; col < metric_names.size(); ++col) {
      double s = 0.0;
      std::size_t n = 0;
      for (const auto& row : it->second)
        if (row[col]) {
          s += *row[col];
          ++n;
        }
      r.push_back(n == it->second.size() && n > 0 ? io::format_double(s / static_cast<double>(n)) : "NA");
    }
    t.row(r);
  }
  t.close();
  out.commit();
}

// ---------------------------------------------------------------------------
// summarize
// ---------------------------------------------------------------------------

/// Recomputes summary.csv from a draws file.
inline void cmd_summarize(const RunConfig& c) {
  validate(c, "summarize");
  const fs::path src = c.draws.empty() ? c.fits / "draws.csv" : c.draws;
  const io::CsvTable t = io::read_csv(src);
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  for (std::size_t col = 0; col < t.header.size(); ++col) {
    if (t.header[col] == "iteration") continue;
    names.push_back(t.header[col]);
    columns.emplace_back();
    for (std::size_t r = 0; r < t.rows.size(); ++r) columns.back().push_back(t.number(r, col));
  }
  if (t.rows.empty()) throw io::InputError(src.string() + ": no draws");
  if (t.rows.size() < kMinSummaryDraws)
    std::cerr << "warning: only " << t.rows.size() << " draws; summaries below 100 draws are unreliable\n";
  StagedDirectory out(c.out, c.overwrite);
  write_summary(names, columns, c.hpd_mass, out.path() / "summary.csv");
  out.commit();
}

inline void run_command(const std::string& command, const RunConfig& c) {
  if (command == "simulate") cmd_simulate(c);
  else if (command == "fit") cmd_fit(c);
  else if (command == "evaluate") cmd_evaluate(c);
  else if (command == "summarize") cmd_summarize(c);
  else throw std::invalid_argument("unknown command '" + command + "'");
}

}  // namespace svr::cli
