#include "abmuq/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include "abmuq/errors.hpp"

namespace abmuq::gp {

std::string to_string(KernelFamily family) {
  return family == KernelFamily::SquaredExponential ? "squared_exponential" : "matern52";
}

KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "squared_exponential") return KernelFamily::SquaredExponential;
  if (s == "matern52") return KernelFamily::Matern52;
  throw ConfigError("unknown kernel family: " + s);
}

void KernelParams::validate() const {
  if (lengthscales.size() == 0) throw ConfigError("kernel needs at least one lengthscale");
  if ((lengthscales.array() <= 0.0).any()) throw ConfigError("lengthscales must be > 0");
  if (!(signal_var > 0.0)) throw ConfigError("signal variance must be > 0");
}

void to_json(nlohmann::json& j, const KernelParams& k) {
  j = nlohmann::json{{"family", to_string(k.family)},
                     {"signal_var", k.signal_var},
                     {"lengthscales", std::vector<double>(k.lengthscales.data(),
                                                          k.lengthscales.data() + k.lengthscales.size())}};
}

void from_json(const nlohmann::json& j, KernelParams& k) {
  k.family = kernel_family_from_string(j.at("family").get<std::string>());
  k.signal_var = j.at("signal_var").get<double>();
  const auto ls = j.at("lengthscales").get<std::vector<double>>();
  k.lengthscales = Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
  k.validate();
}

namespace {

// Covariance as a function of the scaled squared distance r2.
double from_scaled_r2(KernelFamily family, double signal_var, double r2) {
  if (family == KernelFamily::SquaredExponential) return signal_var * std::exp(-0.5 * r2);
  const double r = std::sqrt(5.0 * r2);
  return signal_var * (1.0 + r + r * r / 3.0) * std::exp(-r);
}

}  // namespace

double kernel_eval(const KernelParams& k, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& x2) {
  if (x.size() != x2.size() || x.size() != k.dim()) {
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  }
  const double r2 = ((x - x2).array() / k.lengthscales.array()).square().sum();
  return from_scaled_r2(k.family, k.signal_var, r2);
}

Eigen::MatrixXd cross_covariance(const KernelParams& k, const Eigen::MatrixXd& A,
                                 const Eigen::MatrixXd& B) {
  if (A.cols() != k.dim() || B.cols() != k.dim()) {
    throw std::invalid_argument("cross_covariance: dimension mismatch");
  }
  const Eigen::ArrayXd inv_ls = k.lengthscales.array().inverse();
  const Eigen::MatrixXd As = A * inv_ls.matrix().asDiagonal();
  const Eigen::MatrixXd Bs = B * inv_ls.matrix().asDiagonal();
  Eigen::MatrixXd out(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      double r2 = 0.0;
      for (Eigen::Index d = 0; d < As.cols(); ++d) {
        const double diff = As(i, d) - Bs(j, d);
        r2 += diff * diff;
      }
      out(i, j) = from_scaled_r2(k.family, k.signal_var, r2);
    }
  }
  return out;
}

}  // namespace abmuq::gp
