#pragma once

#include <optional>
#include <variant>

#include <Eigen/Dense>
#include <json.hpp>

#include "abmuq/kernel.hpp"
#include "abmuq/optimize.hpp"
#include "abmuq/random.hpp"

namespace abmuq::gp {

// Posterior summaries at a set of query points. `var` is the variance of the
// latent mean function; `var_with_noise` adds the intrinsic variance tau^2(x)
// when the model knows it.
struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  std::optional<Eigen::VectorXd> var_with_noise;
};

// Diagonal added to every covariance matrix regardless of the nugget,
// relative to the signal variance.
inline constexpr double kJitterScale = 1e-8;

// GP regression with constant mean, conditioned on (X, y). Immutable once
// built; all queries are const and safe to share across threads.
class GPModel {
 public:
  GPModel() = default;

  // Factorizes K(X,X) + diag(nugget) + jitter*I. When `mean_const` is empty
  // the constant mean is estimated by generalized least squares. Throws
  // NumericalError if the factorization fails.
  static GPModel condition(Eigen::MatrixXd X, Eigen::VectorXd y, KernelParams kernel,
                           Eigen::VectorXd nugget,
                           std::optional<double> mean_const = std::nullopt);

  // Homoskedastic variant; the scalar is also used as tau^2 at new inputs.
  static GPModel condition_homoskedastic(Eigen::MatrixXd X, Eigen::VectorXd y,
                                         KernelParams kernel, double nugget,
                                         std::optional<double> mean_const = std::nullopt);

  Eigen::Index size() const { return X_.rows(); }
  Eigen::Index dim() const { return kernel_.dim(); }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_; }
  double mean_const() const { return mean_; }
  const KernelParams& kernel() const { return kernel_; }
  // Per-point nugget, excluding jitter.
  const Eigen::VectorXd& nugget() const { return nugget_; }
  std::optional<double> homoskedastic_nugget() const { return homoskedastic_; }
  double jitter() const { return kJitterScale * kernel_.signal_var; }
  const Eigen::MatrixXd& chol_lower() const { return L_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }

  // m*(x) and k*(x). var_with_noise is filled for homoskedastic models.
  Prediction predict(const Eigen::MatrixXd& Xnew) const;

  // Same, with var_with_noise = var + noise_at_new.
  Prediction predict(const Eigen::MatrixXd& Xnew, const Eigen::VectorXd& noise_at_new) const;

  double log_marginal_likelihood() const;

  // L^{-1} k(X, Xnew); columns are whitened cross-covariances.
  Eigen::MatrixXd whitened_cross(const Eigen::MatrixXd& Xnew) const;

 private:
  Prediction predict_latent(const Eigen::MatrixXd& Xnew) const;

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  KernelParams kernel_;
  Eigen::VectorXd nugget_;
  std::optional<double> homoskedastic_;
  double mean_ = 0.0;
  Eigen::MatrixXd L_;
  Eigen::VectorXd alpha_;
  double log_det_ = 0.0;
};

struct EstimatedNugget {};
struct FixedNugget {
  Eigen::VectorXd values;
};
// Nugget c * base with the scalar c estimated inside [min_scale, max_scale].
// `base` is in the units of y.
struct ScaledNugget {
  Eigen::VectorXd base;
  double min_scale = 1.0;
  double max_scale = 100.0;
};
using NuggetMode = std::variant<EstimatedNugget, FixedNugget, ScaledNugget>;

// Search box and effort for hyperparameter fitting. Variance bounds refer to
// the standardized response (zero mean, unit variance).
struct FitOptions {
  KernelFamily family = KernelFamily::Matern52;
  int n_starts = 10;
  double lengthscale_min = 0.01;
  double lengthscale_max = 10.0;
  double signal_var_min = 1e-4;
  double signal_var_max = 1e4;
  double nugget_min = 1e-8;
  double nugget_max = 10.0;
  NelderMeadOptions local{};
};

// Maximum marginal likelihood fit over log-lengthscales, log signal variance
// and (for EstimatedNugget) the log nugget, from a seeded multi-start. The
// constant mean is profiled out by GLS. Throws NumericalError when no start
// produces a valid factorization.
GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const NuggetMode& nugget,
            const FitOptions& options, Rng& rng);

nlohmann::json to_json(const GPModel& model);
GPModel gp_model_from_json(const nlohmann::json& j);

}  // namespace abmuq::gp
