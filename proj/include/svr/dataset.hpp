// Multi-subject functional data: irregular observation times per subject,
// a time-constant group label and covariate vector per subject.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace svr {

struct Subject {
  std::string id;
  int group = 1;  // 1-based
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> covariates;  // leading entry is the intercept 1
};

struct Dataset {
  std::vector<Subject> subjects;
  int groups = 0;
  std::vector<std::string> covariate_names;  // excludes the intercept
  std::vector<double> grid;                  // merged grid: sorted union of all times
  std::vector<std::vector<std::size_t>> grid_index;  // per subject, position of each time in grid

  std::size_t size() const { return subjects.size(); }
  std::size_t grid_size() const { return grid.size(); }
  std::size_t covariate_count() const {
    return subjects.empty() ? covariate_names.size() + 1 : subjects.front().covariates.size();
  }
  std::size_t observation_count() const {
    std::size_t n = 0;
    for (const Subject& s : subjects) n += s.times.size();
    return n;
  }

  /// m x k design matrix.
  Eigen::MatrixXd design() const {
    const auto m = static_cast<Eigen::Index>(subjects.size());
    const auto k = static_cast<Eigen::Index>(covariate_count());
    Eigen::MatrixXd x(m, k);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index c = 0; c < k; ++c) x(i, c) = subjects[i].covariates[c];
    return x;
  }

  /// Checks invariants and rebuilds the merged grid. `min_observations` is 2
  /// for ingested data; small synthetic instances may lower it.
  void finalize(std::size_t min_observations = 2) {
    int max_group = 0;
    for (const Subject& s : subjects) max_group = std::max(max_group, s.group);
    if (groups < max_group) groups = max_group;
    std::vector<int> group_count(static_cast<std::size_t>(groups) + 1, 0);
    const std::size_t k = subjects.empty() ? 0 : subjects.front().covariates.size();

    for (const Subject& s : subjects) {
      const std::string who = "subject '" + s.id + "'";
      if (s.group < 1) throw std::invalid_argument(who + ": group must be a positive integer");
      ++group_count[static_cast<std::size_t>(s.group)];
      if (s.times.size() != s.values.size())
        throw std::invalid_argument(who + ": times and values differ in length");
      if (s.times.size() < min_observations)
        throw std::invalid_argument(who + ": needs at least " + std::to_string(min_observations) +
                                    " observations");
      for (std::size_t j = 0; j < s.times.size(); ++j) {
        if (!(s.times[j] > 0.0))
          throw std::invalid_argument(who + ": observation times must be positive");
        if (j > 0 && !(s.times[j] > s.times[j - 1]))
          throw std::invalid_argument(who + ": observation times must be strictly increasing");
      }
      if (s.covariates.size() != k)
        throw std::invalid_argument(who + ": covariate vectors differ in length");
      if (k == 0 || s.covariates.front() != 1.0)
        throw std::invalid_argument(who + ": covariates must start with the intercept 1");
    }
    for (int g = 1; g <= groups; ++g)
      if (!subjects.empty() && group_count[static_cast<std::size_t>(g)] == 0)
        throw std::invalid_argument("group " + std::to_string(g) + " has no subjects");

    grid.clear();
    for (const Subject& s : subjects) grid.insert(grid.end(), s.times.begin(), s.times.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    grid_index.assign(subjects.size(), {});
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      auto& idx = grid_index[i];
      idx.reserve(subjects[i].times.size());
      for (double t : subjects[i].times)
        idx.push_back(static_cast<std::size_t>(
            std::lower_bound(grid.begin(), grid.end(), t) - grid.begin()));
    }
  }

  /// Indices of the subjects in 1-based group `g`.
  std::vector<std::size_t> members(int g) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < subjects.size(); ++i)
      if (subjects[i].group == g) out.push_back(i);
    return out;
  }
};

}  // namespace svr
