#pragma once

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "abmuq/gp.hpp"

// Heteroskedastic emulation from replicate sample moments: one GP on the log
// intrinsic variance, one on the sample means with an input-dependent
// nugget tau^2(x_i) / a_i.
namespace abmuq::hetgp {

struct TrainingSummary {
  Eigen::MatrixXd unique_X;
  Eigen::VectorXd ybar;
  Eigen::VectorXd s2;       // unbiased sample variance per input
  std::vector<int> counts;  // replicates a_i
  std::vector<bool> imputed;  // s2 not observed (a_i < 2)

  Eigen::Index size() const { return unique_X.rows(); }
};

// Groups rows of X_full by exact equality (first-appearance order). Groups
// with a single replicate get s2 imputed from the pooled within-group
// variance and are flagged. Throws ConfigError on empty input.
TrainingSummary summarize_replicates(const Eigen::MatrixXd& X_full, const Eigen::VectorXd& y_full);

struct HetGPOptions {
  gp::FitOptions mean_fit{};
  gp::FitOptions logvar_fit{};
  // s2 below this fraction of var(ybar) is raised to it before the log.
  double variance_floor_scale = 1e-6;
  // Range for the factor applied to the Gaussian sampling variance of log s2
  // when used as the variance GP's nugget.
  double logvar_noise_min = 1.0;
  double logvar_noise_max = 100.0;
};

struct HetGPModel {
  gp::GPModel mean_gp;
  gp::GPModel logvar_gp;
  std::vector<int> counts;
  double logvar_noise_scale = 1.0;
};

struct HetPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd var_mean;       // latent mean-function variance
  Eigen::VectorXd intrinsic_var;  // exp of the log-variance posterior mean
};

// Floor applied to sample variances of this summary.
double variance_floor(const TrainingSummary& summary, double floor_scale);

// log max(s2, floor) on the rows used to train the variance GP. Returns the selected row indices through `rows`.
Eigen::VectorXd log_variance_targets(const TrainingSummary& summary, double floor_scale,
                                     std::vector<Eigen::Index>& rows);

// Var[log s2] under Gaussian replicates, trigamma((a - 1) / 2), for `rows`.
// Singleton rows count as a = 2.
Eigen::VectorXd log_variance_noise(const TrainingSummary& summary, const std::vector<Eigen::Index>& rows);

double digamma(double x);
double trigamma(double x);

// Two-stage fit: variance GP on log sample variances, then the mean GP with
// fixed per-point nugget exp(m_logvar(x_i)) / a_i.
HetGPModel fit_hetgp(const TrainingSummary& summary, const HetGPOptions& options, Rng& rng);

// Rebuilds both GPs on new data with the hyperparameters of `source` held
// fixed.
HetGPModel recondition(const HetGPModel& source, const TrainingSummary& summary,
                       double variance_floor_scale = 1e-6);

// Mean GP for sample means `ybar` at `X` with counts `counts`, using the
// hyperparameters of source.mean_gp and intrinsic variances from
// source.logvar_gp.
gp::GPModel condition_mean_gp(const HetGPModel& source, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& ybar, const std::vector<int>& counts);

HetPrediction predict_hetgp(const HetGPModel& model, const Eigen::MatrixXd& Xnew);

// exp(m_logvar(x)) only.
Eigen::VectorXd intrinsic_variance(const HetGPModel& model, const Eigen::MatrixXd& Xnew);

nlohmann::json to_json(const HetGPModel& model);
HetGPModel hetgp_model_from_json(const nlohmann::json& j);

}  // namespace abmuq::hetgp
