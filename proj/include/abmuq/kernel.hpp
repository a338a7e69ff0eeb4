#pragma once

#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace abmuq::gp {

enum class KernelFamily { SquaredExponential, Matern52 };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& s);

// Stationary product-form kernel with one lengthscale per input.
struct KernelParams {
  Eigen::VectorXd lengthscales;
  double signal_var = 1.0;
  KernelFamily family = KernelFamily::Matern52;

  Eigen::Index dim() const { return lengthscales.size(); }
  void validate() const;
};

void to_json(nlohmann::json& j, const KernelParams& k);
void from_json(const nlohmann::json& j, KernelParams& k);

// Throws std::invalid_argument when x, x' and the lengthscales disagree in
// dimension.
double kernel_eval(const KernelParams& k, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& x2);

// Cross-covariance matrix between the rows of A and the rows of B.
Eigen::MatrixXd cross_covariance(const KernelParams& k, const Eigen::MatrixXd& A,
                                 const Eigen::MatrixXd& B);

}  // namespace abmuq::gp
