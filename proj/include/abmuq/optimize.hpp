#pragma once

#include <functional>

#include <Eigen/Dense>

namespace abmuq {

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }
};

struct NelderMeadOptions {
  int max_evaluations = 400;
  double initial_step = 0.5;  // fraction of the box width per coordinate
  double f_tolerance = 1e-9;
  double x_tolerance = 1e-7;
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
};

// Minimizes `f` over the box. Vertices are projected onto the box, so `f`
// is only ever evaluated at feasible points. Non-finite objective values
// count as +infinity.
OptimResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Eigen::VectorXd& start, const Box& box,
                        const NelderMeadOptions& options = {});

}  // namespace abmuq
