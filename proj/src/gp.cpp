#include "abmuq/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "abmuq/design.hpp"
#include "abmuq/errors.hpp"

namespace abmuq::gp {

GPModel GPModel::condition(Eigen::MatrixXd X, Eigen::VectorXd y, KernelParams kernel,
                           Eigen::VectorXd nugget, std::optional<double> mean_const) {
  kernel.validate();
  const Eigen::Index n = X.rows();
  if (y.size() != n || nugget.size() != n) {
    throw std::invalid_argument("GPModel::condition: X, y and nugget sizes differ");
  }
  if (n > 0 && X.cols() != kernel.dim()) {
    throw std::invalid_argument("GPModel::condition: input dimension does not match kernel");
  }
  if ((nugget.array() < 0.0).any()) throw NumericalError("negative nugget entry");

  GPModel m;
  m.X_ = std::move(X);
  m.y_ = std::move(y);
  m.kernel_ = std::move(kernel);
  m.nugget_ = std::move(nugget);

  Eigen::MatrixXd K = cross_covariance(m.kernel_, m.X_, m.X_);
  K.diagonal() += m.nugget_ + Eigen::VectorXd::Constant(n, m.jitter());
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("covariance matrix is not positive definite");
  }
  m.L_ = llt.matrixL();
  m.log_det_ = 2.0 * m.L_.diagonal().array().log().sum();

  if (mean_const) {
    m.mean_ = *mean_const;
  } else if (n > 0) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd c_inv_1 = llt.solve(ones);
    m.mean_ = c_inv_1.dot(m.y_) / c_inv_1.sum();
  }
  m.alpha_ = llt.solve(m.y_ - Eigen::VectorXd::Constant(n, m.mean_));
  if (!m.alpha_.allFinite()) throw NumericalError("non-finite solve against covariance");
  return m;
}

GPModel GPModel::condition_homoskedastic(Eigen::MatrixXd X, Eigen::VectorXd y, KernelParams kernel,
                                         double nugget, std::optional<double> mean_const) {
  const Eigen::Index n = X.rows();
  GPModel m = condition(std::move(X), std::move(y), std::move(kernel),
                        Eigen::VectorXd::Constant(n, nugget), mean_const);
  m.homoskedastic_ = nugget;
  return m;
}

Eigen::MatrixXd GPModel::whitened_cross(const Eigen::MatrixXd& Xnew) const {
  const Eigen::MatrixXd Ks = cross_covariance(kernel_, X_, Xnew);
  return L_.triangularView<Eigen::Lower>().solve(Ks);
}

Prediction GPModel::predict_latent(const Eigen::MatrixXd& Xnew) const {
  if (Xnew.cols() != dim()) throw std::invalid_argument("predict: dimension mismatch");
  Prediction out;
  out.mean = Eigen::VectorXd::Constant(Xnew.rows(), mean_);
  out.var = Eigen::VectorXd::Constant(Xnew.rows(), kernel_.signal_var);
  if (size() == 0) return out;
  const Eigen::MatrixXd Ks = cross_covariance(kernel_, X_, Xnew);
  out.mean.noalias() += Ks.transpose() * alpha_;
  const Eigen::MatrixXd V = L_.triangularView<Eigen::Lower>().solve(Ks);
  out.var -= V.colwise().squaredNorm().transpose();
  out.var = out.var.cwiseMax(0.0);
  return out;
}

Prediction GPModel::predict(const Eigen::MatrixXd& Xnew) const {
  Prediction out = predict_latent(Xnew);
  if (homoskedastic_) out.var_with_noise = out.var.array() + *homoskedastic_;
  return out;
}

Prediction GPModel::predict(const Eigen::MatrixXd& Xnew, const Eigen::VectorXd& noise_at_new) const {
  if (noise_at_new.size() != Xnew.rows()) throw std::invalid_argument("predict: noise size mismatch");
  Prediction out = predict_latent(Xnew);
  out.var_with_noise = out.var + noise_at_new;
  return out;
}

double GPModel::log_marginal_likelihood() const {
  const Eigen::Index n = size();
  const Eigen::VectorXd r = y_ - Eigen::VectorXd::Constant(n, mean_);
  return -0.5 * r.dot(alpha_) - 0.5 * log_det_ -
         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

namespace {

struct Standardizer {
  double center = 0.0;
  double scale = 1.0;
};

Standardizer standardizer_for(const Eigen::VectorXd& y) {
  Standardizer s;
  s.center = y.mean();
  const double var = (y.array() - s.center).square().mean();
  s.scale = var > 1e-300 ? std::sqrt(var) : 1.0;
  return s;
}

}  // namespace

GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const NuggetMode& nugget,
            const FitOptions& options, Rng& rng) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n < 2) throw ConfigError("GP fit needs at least 2 points, got " + std::to_string(n));
  if (y.size() != n) throw std::invalid_argument("GP fit: X and y sizes differ");
  if (!y.allFinite()) throw ConfigError("GP fit: non-finite response");

  const bool estimate_nugget = !std::holds_alternative<FixedNugget>(nugget);
  const auto* scaled = std::get_if<ScaledNugget>(&nugget);
  const Standardizer st = standardizer_for(y);
  const Eigen::VectorXd ys = (y.array() - st.center) / st.scale;
  Eigen::VectorXd fixed_s;
  if (const auto* f = std::get_if<FixedNugget>(&nugget)) {
    if (f->values.size() != n) throw std::invalid_argument("GP fit: fixed nugget size mismatch");
    fixed_s = f->values / (st.scale * st.scale);
  }
  if (scaled) {
    if (scaled->base.size() != n) throw std::invalid_argument("GP fit: nugget base size mismatch");
    if ((scaled->base.array() <= 0.0).any() || !(scaled->min_scale > 0.0) ||
        !(scaled->max_scale >= scaled->min_scale)) {
      throw ConfigError("GP fit: invalid scaled nugget");
    }
    fixed_s = scaled->base / (st.scale * st.scale);
  }

  // Parameter layout: log lengthscales, log signal variance, [log nugget].
  const Eigen::Index d = p + 1 + (estimate_nugget ? 1 : 0);
  Box box{Eigen::VectorXd(d), Eigen::VectorXd(d)};
  box.lower.head(p).setConstant(std::log(options.lengthscale_min));
  box.upper.head(p).setConstant(std::log(options.lengthscale_max));
  box.lower(p) = std::log(options.signal_var_min);
  box.upper(p) = std::log(options.signal_var_max);
  if (scaled) {
    box.lower(p + 1) = std::log(scaled->min_scale);
    box.upper(p + 1) = std::log(scaled->max_scale);
  } else if (estimate_nugget) {
    box.lower(p + 1) = std::log(options.nugget_min);
    box.upper(p + 1) = std::log(options.nugget_max);
  }

  auto unpack = [&](const Eigen::VectorXd& theta) {
    KernelParams k;
    k.family = options.family;
    k.lengthscales = theta.head(p).array().exp();
    k.signal_var = std::exp(theta(p));
    return k;
  };
  auto nugget_for = [&](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    if (scaled) return fixed_s * std::exp(theta(p + 1));
    if (estimate_nugget) return Eigen::VectorXd::Constant(n, std::exp(theta(p + 1)));
    return fixed_s;
  };
  auto objective = [&](const Eigen::VectorXd& theta) {
    try {
      return -GPModel::condition(X, ys, unpack(theta), nugget_for(theta)).log_marginal_likelihood();
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const design::DesignMatrix starts = design::lhd(options.n_starts, static_cast<int>(d), rng);
  OptimResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < starts.rows(); ++s) {
    const Eigen::VectorXd theta0 =
        box.lower.array() + starts.row(s).transpose().array() * (box.upper - box.lower).array();
    const OptimResult r = nelder_mead(objective, theta0, box, options.local);
    if (r.value < best.value) best = r;
  }
  if (!std::isfinite(best.value)) {
    throw NumericalError("GP fit: every start failed to factorize the covariance");
  }

  KernelParams kernel = unpack(best.x);
  const double var_scale = st.scale * st.scale;
  kernel.signal_var *= var_scale;
  if (scaled) return GPModel::condition(X, y, kernel, scaled->base * std::exp(best.x(p + 1)));
  if (estimate_nugget) {
    return GPModel::condition_homoskedastic(X, y, kernel, std::exp(best.x(p + 1)) * var_scale);
  }
  return GPModel::condition(X, y, kernel, std::get<FixedNugget>(nugget).values);
}

nlohmann::json to_json(const GPModel& model) {
  nlohmann::json j;
  j["kernel"] = model.kernel();
  j["mean_const"] = model.mean_const();
  j["nugget"] = std::vector<double>(model.nugget().data(), model.nugget().data() + model.nugget().size());
  if (model.homoskedastic_nugget()) j["homoskedastic_nugget"] = *model.homoskedastic_nugget();
  nlohmann::json xs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.size(); ++i) {
    const Eigen::VectorXd row = model.X().row(i);
    xs.push_back(std::vector<double>(row.data(), row.data() + row.size()));
  }
  j["X"] = std::move(xs);
  j["y"] = std::vector<double>(model.y().data(), model.y().data() + model.y().size());
  return j;
}

GPModel gp_model_from_json(const nlohmann::json& j) {
  try {
    const KernelParams kernel = j.at("kernel").get<KernelParams>();
    const auto rows = j.at("X").get<std::vector<std::vector<double>>>();
    const auto yv = j.at("y").get<std::vector<double>>();
    const auto nv = j.at("nugget").get<std::vector<double>>();
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd X(n, kernel.dim());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& r = rows[static_cast<std::size_t>(i)];
      if (static_cast<Eigen::Index>(r.size()) != kernel.dim()) throw ConfigError("GP model JSON: ragged X");
      for (Eigen::Index c = 0; c < kernel.dim(); ++c) X(i, c) = r[static_cast<std::size_t>(c)];
    }
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
    const double mean = j.at("mean_const").get<double>();
    if (j.contains("homoskedastic_nugget")) {
      return GPModel::condition_homoskedastic(std::move(X), std::move(y), kernel,
                                              j.at("homoskedastic_nugget").get<double>(), mean);
    }
    Eigen::VectorXd nug = Eigen::Map<const Eigen::VectorXd>(nv.data(), static_cast<Eigen::Index>(nv.size()));
    return GPModel::condition(std::move(X), std::move(y), kernel, std::move(nug), mean);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("GP model JSON: ") + e.what());
  }
}

}  // namespace abmuq::gp
