#pragma once

#include <vector>

#include <Eigen/Dense>

#include "abmuq/random.hpp"

// Space-filling designs on the unit hypercube. Rows are points, columns are
// input dimensions.
namespace abmuq::design {

using DesignMatrix = Eigen::MatrixXd;

struct ReplicatedDesign {
  DesignMatrix points;
  std::vector<int> replicates;  // one count >= 1 per row of `points`

  Eigen::Index size() const { return points.rows(); }
  void validate() const;
};

// Random Latin hypercube with jittered positions inside each stratum.
DesignMatrix lhd(int n, int p, Rng& rng);

double min_pairwise_distance(const DesignMatrix& X);

// True when every column places exactly one point in each of the n strata
// [i/n, (i+1)/n).
bool is_latin_hypercube(const DesignMatrix& X);

struct SwapStats {
  double initial_criterion = 0.0;
  double final_criterion = 0.0;
  int accepted = 0;
};

// Improves X in place by exchanging two entries of one column, keeping the
// exchange only when the minimum pairwise distance strictly increases.
// Column multisets are untouched, so an LHD stays an LHD.
SwapStats maximin_swap(DesignMatrix& X, int n_swaps, Rng& rng);

// Best of `n_restarts` swap-optimized random LHDs. The first restart starts
// from exactly the design lhd(n, p, rng) would have returned.
DesignMatrix maximin_lhd(int n, int p, int n_restarts, Rng& rng,
                         int swaps_per_restart = -1);

// Greedy maximin sub-selection of k rows: starts from row 0 and repeatedly
// adds the row farthest from everything already chosen.
DesignMatrix maximin_subset(const DesignMatrix& pool, int k);

// First m points of the Halton sequence in p dimensions (bases = first
// primes), skipping the origin.
DesignMatrix halton(int m, int p, int skip = 1);

}  // namespace abmuq::design
