#pragma once

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "abmuq/kernel.hpp"
#include "abmuq/optimize.hpp"
#include "abmuq/random.hpp"

// Binary GP classification with a logistic likelihood and Laplace-approximate
// posterior. Label +1 means the simulator produced an output, -1 censored.
namespace abmuq::classify {

struct LabeledDesign {
  Eigen::MatrixXd X;
  std::vector<int> labels;  // +1 / -1
};

// One label per distinct input by majority vote; ties go to -1.
LabeledDesign collapse_replicate_labels(const Eigen::MatrixXd& X_full, const std::vector<int>& labels_full);

struct LaplaceOptions {
  int max_newton_steps = 100;
  double gradient_tolerance = 1e-6;
};

struct ClassifierModel {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;  // +1 / -1 as doubles
  gp::KernelParams kernel;
  Eigen::VectorXd f_hat;        // posterior mode of the latent function
  Eigen::VectorXd W;            // -d2 log p(y|f) at the mode
  Eigen::VectorXd grad_loglik;  // d log p(y|f) at the mode
  Eigen::MatrixXd chol_B;       // lower factor of I + W^1/2 K W^1/2
  double log_marginal = 0.0;    // Laplace approximation to log p(y | X, kernel)
  int newton_steps = 0;
  std::vector<double> objective_trace;  // Psi(f) after each accepted step
};

// Laplace approximation at fixed kernel hyperparameters. Throws
// NumericalError when Newton does not converge.
ClassifierModel laplace_fit(const LabeledDesign& data, const gp::KernelParams& kernel,
                            const LaplaceOptions& options = {});

struct ClassifierFitOptions {
  gp::KernelFamily family = gp::KernelFamily::SquaredExponential;
  std::vector<double> lengthscale_grid{0.05, 0.1, 0.2, 0.4, 0.8, 1.6};
  std::vector<double> signal_var_grid{0.5, 2.0, 8.0, 32.0};
  double lengthscale_min = 0.02;
  double lengthscale_max = 5.0;
  double signal_var_min = 0.1;
  double signal_var_max = 100.0;
  int random_starts = 2;
  NelderMeadOptions local{200};
  LaplaceOptions laplace{};
};

// Hyperparameters by maximizing the Laplace marginal likelihood: exhaustive
// grid, then local refinement from the best grid point and a few seeded
// random starts. Throws ConfigError unless both classes are present.
ClassifierModel fit_classifier(const LabeledDesign& data, const ClassifierFitOptions& options, Rng& rng);

struct LatentPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

LatentPrediction predict_latent(const ClassifierModel& model, const Eigen::MatrixXd& Xnew);

// E[sigmoid(f)] for f ~ N(mean, var), by 32-node Gauss-Hermite quadrature.
double expected_sigmoid(double mean, double var);

// Probability that the label is +1.
Eigen::VectorXd predict_prob(const ClassifierModel& model, const Eigen::MatrixXd& Xnew);

// +1 where probability >= threshold. Threshold must lie in [0, 1].
std::vector<int> predict_class(const ClassifierModel& model, const Eigen::MatrixXd& Xnew,
                               double threshold = 0.5);
std::vector<int> threshold_probabilities(const Eigen::VectorXd& prob, double threshold = 0.5);

struct Segment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
};

// Iso-contour of a field sampled at cell centres of a res x res grid on the
// unit square; values(i, j) sits at ((i + 0.5) / res, (j + 0.5) / res).
std::vector<Segment> marching_squares(const Eigen::MatrixXd& values, double level);

nlohmann::json to_json(const ClassifierModel& model);
// Refits the Laplace mode at the stored hyperparameters.
ClassifierModel classifier_from_json(const nlohmann::json& j);

}  // namespace abmuq::classify
