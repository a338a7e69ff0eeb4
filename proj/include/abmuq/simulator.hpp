#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "abmuq/classify.hpp"
#include "abmuq/design.hpp"
#include "abmuq/hetgp.hpp"

namespace abmuq {

// A stochastic simulator on the unit hypercube. Returns no value for a
// censored run. Must be deterministic in (x, seed) and callable
// concurrently.
using Simulator = std::function<std::optional<double>(const Eigen::VectorXd& x, std::uint64_t seed)>;

struct RunRecord {
  Eigen::VectorXd x;
  std::uint64_t seed = 0;
  std::optional<double> output;
};

// Runs every replicate of `design`. Run k (counting from `first_index`) uses
// seed derive_seed(seed_base, k); records come back in design order.
std::vector<RunRecord> run_design(const design::ReplicatedDesign& design, const Simulator& simulator,
                                  std::uint64_t seed_base, std::size_t first_index, int jobs = 1);

// Unique inputs with their run multiplicities, in first-appearance order.
design::ReplicatedDesign replicated_design_of(const std::vector<RunRecord>& runs);

// Sample moments of the runs that produced an output.
hetgp::TrainingSummary quantitative_summary(const std::vector<RunRecord>& runs);

// +1 for runs with output, -1 for censored, collapsed per input.
classify::LabeledDesign existence_labels(const std::vector<RunRecord>& runs);

}  // namespace abmuq
