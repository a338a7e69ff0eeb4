#include "abmuq/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "abmuq/errors.hpp"

namespace abmuq::design {

void ReplicatedDesign::validate() const {
  if (static_cast<Eigen::Index>(replicates.size()) != points.rows()) {
    throw ConfigError("replicate count list does not match design size");
  }
  for (int a : replicates) {
    if (a < 1) throw ConfigError("replicate counts must be >= 1");
  }
  if ((points.array() < 0.0).any() || (points.array() > 1.0).any()) {
    throw ConfigError("design coordinates must lie in [0,1]");
  }
}

DesignMatrix lhd(int n, int p, Rng& rng) {
  if (n < 1 || p < 1) throw ConfigError("lhd needs n >= 1 and p >= 1");
  DesignMatrix X(n, p);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int j = 0; j < p; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    for (int i = 0; i < n; ++i) {
      X(i, j) = (perm[static_cast<std::size_t>(i)] + uniform01(rng)) / n;
    }
  }
  return X;
}

double min_pairwise_distance(const DesignMatrix& X) {
  if (X.rows() < 2) {
    throw ConfigError("min_pairwise_distance needs at least 2 points, got " +
                      std::to_string(X.rows()));
  }
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index k = i + 1; k < X.rows(); ++k) {
      best = std::min(best, (X.row(i) - X.row(k)).squaredNorm());
    }
  }
  return std::sqrt(best);
}

bool is_latin_hypercube(const DesignMatrix& X) {
  const Eigen::Index n = X.rows();
  if (n < 1) return false;
  std::vector<char> seen(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    std::fill(seen.begin(), seen.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = X(i, j);
      if (!(v >= 0.0 && v <= 1.0)) return false;
      auto s = static_cast<Eigen::Index>(std::floor(v * static_cast<double>(n)));
      s = std::min(s, n - 1);
      if (seen[static_cast<std::size_t>(s)]) return false;
      seen[static_cast<std::size_t>(s)] = 1;
    }
  }
  return true;
}

SwapStats maximin_swap(DesignMatrix& X, int n_swaps, Rng& rng) {
  SwapStats stats;
  const Eigen::Index n = X.rows();
  if (n < 2) throw ConfigError("maximin_swap needs at least 2 points");
  double current = min_pairwise_distance(X);
  stats.initial_criterion = current;
  for (int s = 0; s < n_swaps; ++s) {
    const auto col = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(X.cols())));
    const auto a = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
    auto b = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n - 1)));
    if (b >= a) ++b;
    std::swap(X(a, col), X(b, col));
    const double candidate = min_pairwise_distance(X);
    if (candidate > current) {
      current = candidate;
      ++stats.accepted;
    } else {
      std::swap(X(a, col), X(b, col));
    }
  }
  stats.final_criterion = current;
  return stats;
}

DesignMatrix maximin_lhd(int n, int p, int n_restarts, Rng& rng, int swaps_per_restart) {
  if (n < 2) throw ConfigError("maximin_lhd needs n >= 2");
  if (n_restarts < 1) throw ConfigError("maximin_lhd needs n_restarts >= 1");
  if (swaps_per_restart < 0) swaps_per_restart = 20 * n * p;
  DesignMatrix best;
  double best_value = -1.0;
  for (int r = 0; r < n_restarts; ++r) {
    DesignMatrix X = lhd(n, p, rng);
    const SwapStats stats = maximin_swap(X, swaps_per_restart, rng);
    if (stats.final_criterion > best_value) {
      best_value = stats.final_criterion;
      best = std::move(X);
    }
  }
  return best;
}

DesignMatrix maximin_subset(const DesignMatrix& pool, int k) {
  const Eigen::Index m = pool.rows();
  if (k < 0 || k > m) throw ConfigError("maximin_subset: k exceeds pool size");
  DesignMatrix out(k, pool.cols());
  if (k == 0) return out;
  Eigen::VectorXd nearest = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(m), 0);
  Eigen::Index chosen = 0;
  for (int c = 0; c < k; ++c) {
    out.row(c) = pool.row(chosen);
    taken[static_cast<std::size_t>(chosen)] = 1;
    Eigen::Index next = -1;
    double far = -1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      nearest(i) = std::min(nearest(i), (pool.row(i) - pool.row(chosen)).squaredNorm());
      if (nearest(i) > far) {
        far = nearest(i);
        next = i;
      }
    }
    chosen = next;
  }
  return out;
}

namespace {

double radical_inverse(long long index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

}  // namespace

DesignMatrix halton(int m, int p, int skip) {
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  if (p < 1 || p > static_cast<int>(std::size(kPrimes))) {
    throw ConfigError("halton supports 1..12 dimensions");
  }
  DesignMatrix X(m, p);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < p; ++j) X(i, j) = radical_inverse(i + skip, kPrimes[j]);
  }
  return X;
}

}  // namespace abmuq::design
