#include "abmuq/classify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

#include "abmuq/design.hpp"
#include "abmuq/errors.hpp"
#include "abmuq/gp.hpp"

namespace abmuq::classify {

LabeledDesign collapse_replicate_labels(const Eigen::MatrixXd& X_full, const std::vector<int>& labels_full) {
  if (static_cast<Eigen::Index>(labels_full.size()) != X_full.rows()) {
    throw std::invalid_argument("collapse_replicate_labels: size mismatch");
  }
  std::map<std::vector<double>, std::size_t> index;
  std::vector<Eigen::Index> first_row;
  std::vector<int> votes;
  for (Eigen::Index i = 0; i < X_full.rows(); ++i) {
    const int label = labels_full[static_cast<std::size_t>(i)];
    if (label != 1 && label != -1) throw ConfigError("labels must be +1 or -1");
    std::vector<double> key(static_cast<std::size_t>(X_full.cols()));
    for (Eigen::Index c = 0; c < X_full.cols(); ++c) key[static_cast<std::size_t>(c)] = X_full(i, c);
    auto [it, inserted] = index.emplace(std::move(key), votes.size());
    if (inserted) {
      first_row.push_back(i);
      votes.push_back(0);
    }
    votes[it->second] += label;
  }
  LabeledDesign out;
  out.X.resize(static_cast<Eigen::Index>(votes.size()), X_full.cols());
  for (std::size_t g = 0; g < votes.size(); ++g) {
    out.X.row(static_cast<Eigen::Index>(g)) = X_full.row(first_row[g]);
    out.labels.push_back(votes[g] > 0 ? 1 : -1);
  }
  return out;
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& f) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) s -= softplus(-y(i) * f(i));
  return s;
}

Eigen::MatrixXd prior_covariance(const gp::KernelParams& kernel, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd K = gp::cross_covariance(kernel, X, X);
  K.diagonal().array() += gp::kJitterScale * kernel.signal_var;
  return K;
}

struct LikelihoodTerms {
  Eigen::VectorXd grad;
  Eigen::VectorXd W;
};

LikelihoodTerms likelihood_terms(const Eigen::VectorXd& y, const Eigen::VectorXd& f) {
  LikelihoodTerms t{Eigen::VectorXd(y.size()), Eigen::VectorXd(y.size())};
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pi = sigmoid(f(i));
    t.grad(i) = (y(i) + 1.0) / 2.0 - pi;
    t.W(i) = pi * (1.0 - pi);
  }
  return t;
}

Eigen::MatrixXd factor_B(const Eigen::MatrixXd& K, const Eigen::VectorXd& W) {
  const Eigen::VectorXd sw = W.cwiseSqrt();
  Eigen::MatrixXd B = sw.asDiagonal() * K * sw.asDiagonal();
  B.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success) throw NumericalError("Laplace: B is not positive definite");
  return llt.matrixL();
}

}  // namespace

ClassifierModel laplace_fit(const LabeledDesign& data, const gp::KernelParams& kernel,
                            const LaplaceOptions& options) {
  kernel.validate();
  const Eigen::Index n = data.X.rows();
  if (static_cast<Eigen::Index>(data.labels.size()) != n) throw std::invalid_argument("laplace_fit: size mismatch");
  if (n == 0) throw ConfigError("laplace_fit: no data");

  ClassifierModel m;
  m.X = data.X;
  m.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) m.y(i) = data.labels[static_cast<std::size_t>(i)];
  m.kernel = kernel;
  const Eigen::MatrixXd K = prior_covariance(kernel, data.X);

  // Newton iterations in the a-parameterization f = K a, with step halving
  // so the objective Psi = log p(y|f) - a'f / 2 never decreases.
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  double psi = log_likelihood(m.y, f);
  bool converged = false;
  for (int it = 0; it <= options.max_newton_steps; ++it) {
    const LikelihoodTerms t = likelihood_terms(m.y, f);
    if ((t.grad - a).cwiseAbs().maxCoeff() < options.gradient_tolerance) {
      converged = true;
      break;
    }
    if (it == options.max_newton_steps) break;
    const Eigen::VectorXd sw = t.W.cwiseSqrt();
    const Eigen::MatrixXd L = factor_B(K, t.W);
    const Eigen::VectorXd b = t.W.cwiseProduct(f) + t.grad;
    const Eigen::VectorXd rhs = L.triangularView<Eigen::Lower>().solve(sw.cwiseProduct(K * b));
    const Eigen::VectorXd a_newton =
        b - sw.cwiseProduct(L.transpose().triangularView<Eigen::Upper>().solve(rhs));
    const Eigen::VectorXd direction = a_newton - a;

    double step = 1.0;
    bool accepted = false;
    while (step > 1e-12) {
      const Eigen::VectorXd a_try = a + step * direction;
      const Eigen::VectorXd f_try = K * a_try;
      const double psi_try = log_likelihood(m.y, f_try) - 0.5 * a_try.dot(f_try);
      if (psi_try >= psi) {
        a = a_try;
        f = f_try;
        psi = psi_try;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    m.objective_trace.push_back(psi);
    ++m.newton_steps;
    if (!accepted) {
      // No ascent possible at machine precision: the mode is reached as
      // far as arithmetic allows.
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NumericalError("Laplace: Newton did not converge in " +
                         std::to_string(options.max_newton_steps) + " steps");
  }

  const LikelihoodTerms t = likelihood_terms(m.y, f);
  m.f_hat = f;
  m.W = t.W;
  m.grad_loglik = t.grad;
  m.chol_B = factor_B(K, t.W);
  m.log_marginal = psi - m.chol_B.diagonal().array().log().sum();
  return m;
}

ClassifierModel fit_classifier(const LabeledDesign& data, const ClassifierFitOptions& options, Rng& rng) {
  bool has_pos = false;
  bool has_neg = false;
  for (int l : data.labels) (l > 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw ConfigError("fit_classifier needs both classes present");

  const Eigen::Index p = data.X.cols();
  auto make_kernel = [&](const Eigen::VectorXd& theta) {
    gp::KernelParams k;
    k.family = options.family;
    k.lengthscales = theta.head(p).array().exp();
    k.signal_var = std::exp(theta(p));
    return k;
  };
  auto objective = [&](const Eigen::VectorXd& theta) {
    try {
      return -laplace_fit(data, make_kernel(theta), options.laplace).log_marginal;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // Exhaustive grid over per-dimension lengthscales and signal variance.
  const auto nls = options.lengthscale_grid.size();
  std::size_t combos = options.signal_var_grid.size();
  for (Eigen::Index d = 0; d < p; ++d) combos *= nls;
  Eigen::VectorXd best_theta(p + 1);
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < combos; ++c) {
    Eigen::VectorXd theta(p + 1);
    std::size_t rest = c;
    for (Eigen::Index d = 0; d < p; ++d) {
      theta(d) = std::log(options.lengthscale_grid[rest % nls]);
      rest /= nls;
    }
    theta(p) = std::log(options.signal_var_grid[rest]);
    const double v = objective(theta);
    if (v < best_value) {
      best_value = v;
      best_theta = theta;
    }
  }

  Box box{Eigen::VectorXd(p + 1), Eigen::VectorXd(p + 1)};
  box.lower.head(p).setConstant(std::log(options.lengthscale_min));
  box.upper.head(p).setConstant(std::log(options.lengthscale_max));
  box.lower(p) = std::log(options.signal_var_min);
  box.upper(p) = std::log(options.signal_var_max);

  std::vector<Eigen::VectorXd> starts;
  if (std::isfinite(best_value)) starts.push_back(box.clamp(best_theta));
  if (options.random_starts > 0) {
    const design::DesignMatrix u = design::lhd(options.random_starts, static_cast<int>(p + 1), rng);
    for (Eigen::Index s = 0; s < u.rows(); ++s) {
      starts.push_back(box.lower.array() + u.row(s).transpose().array() * (box.upper - box.lower).array());
    }
  }
  NelderMeadOptions local = options.local;
  local.initial_step = 0.1;
  for (const auto& start : starts) {
    const OptimResult r = nelder_mead(objective, start, box, local);
    if (r.value < best_value) {
      best_value = r.value;
      best_theta = r.x;
    }
  }
  if (!std::isfinite(best_value)) throw NumericalError("fit_classifier: no hyperparameter setting converged");
  return laplace_fit(data, make_kernel(best_theta), options.laplace);
}

LatentPrediction predict_latent(const ClassifierModel& model, const Eigen::MatrixXd& Xnew) {
  if (Xnew.cols() != model.X.cols()) throw std::invalid_argument("predict: dimension mismatch");
  const Eigen::MatrixXd Ks = gp::cross_covariance(model.kernel, model.X, Xnew);
  LatentPrediction out;
  out.mean = Ks.transpose() * model.grad_loglik;
  const Eigen::MatrixXd V =
      model.chol_B.triangularView<Eigen::Lower>().solve(model.W.cwiseSqrt().asDiagonal() * Ks);
  out.var = (Eigen::VectorXd::Constant(Xnew.rows(), model.kernel.signal_var) -
             V.colwise().squaredNorm().transpose())
                .cwiseMax(0.0);
  return out;
}

namespace {

struct GaussHermite {
  std::array<double, 32> nodes{};
  std::array<double, 32> weights{};  // normalized to sum to 1
};

// Golub-Welsch for the physicists' Hermite weight exp(-x^2).
GaussHermite make_gauss_hermite() {
  constexpr int n = 32;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussHermite gh;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    gh.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    gh.weights[static_cast<std::size_t>(i)] = v0 * v0;
    total += v0 * v0;
  }
  // Enforce exact mirror symmetry.
  for (int i = 0; i < n / 2; ++i) {
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    const double x = 0.5 * (gh.nodes[hi] - gh.nodes[lo]);
    const double w = 0.5 * (gh.weights[hi] + gh.weights[lo]) / total;
    gh.nodes[lo] = -x;
    gh.nodes[hi] = x;
    gh.weights[lo] = gh.weights[hi] = w;
  }
  return gh;
}

const GaussHermite& gauss_hermite() {
  static const GaussHermite gh = make_gauss_hermite();
  return gh;
}

}  // namespace

double expected_sigmoid(double mean, double var) {
  const auto& gh = gauss_hermite();
  const double scale = std::sqrt(2.0 * std::max(var, 0.0));
  // Pair mirrored nodes so that flipping the sign of `mean` gives exactly
  // one minus the result.
  double s = 0.0;
  for (std::size_t i = 0; i < gh.nodes.size() / 2; ++i) {
    const std::size_t j = gh.nodes.size() - 1 - i;
    s += gh.weights[i] * (sigmoid(mean + scale * gh.nodes[i]) + sigmoid(mean + scale * gh.nodes[j]));
  }
  return std::clamp(s, 0.0, 1.0);
}

Eigen::VectorXd predict_prob(const ClassifierModel& model, const Eigen::MatrixXd& Xnew) {
  const LatentPrediction lp = predict_latent(model, Xnew);
  Eigen::VectorXd out(Xnew.rows());
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = expected_sigmoid(lp.mean(i), lp.var(i));
  return out;
}

std::vector<int> threshold_probabilities(const Eigen::VectorXd& prob, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
  std::vector<int> out(static_cast<std::size_t>(prob.size()));
  for (Eigen::Index i = 0; i < prob.size(); ++i) out[static_cast<std::size_t>(i)] = prob(i) >= threshold ? 1 : -1;
  return out;
}

std::vector<int> predict_class(const ClassifierModel& model, const Eigen::MatrixXd& Xnew, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
  return threshold_probabilities(predict_prob(model, Xnew), threshold);
}

std::vector<Segment> marching_squares(const Eigen::MatrixXd& values, double level) {
  const Eigen::Index res = values.rows();
  if (values.cols() != res) throw std::invalid_argument("marching_squares: grid must be square");
  std::vector<Segment> out;
  if (res < 2) return out;
  auto coord = [res](double idx) { return (idx + 0.5) / static_cast<double>(res); };
  // Point on the edge between two corners where the field crosses `level`.
  auto cross = [&](Eigen::Index i0, Eigen::Index j0, Eigen::Index i1, Eigen::Index j1) {
    const double v0 = values(i0, j0) - level;
    const double v1 = values(i1, j1) - level;
    const double t = v0 == v1 ? 0.5 : v0 / (v0 - v1);
    return Eigen::Vector2d(coord(static_cast<double>(i0) + t * static_cast<double>(i1 - i0)),
                           coord(static_cast<double>(j0) + t * static_cast<double>(j1 - j0)));
  };
  for (Eigen::Index i = 0; i + 1 < res; ++i) {
    for (Eigen::Index j = 0; j + 1 < res; ++j) {
      // Corners counter-clockwise: (i,j) (i+1,j) (i+1,j+1) (i,j+1).
      const bool c0 = values(i, j) >= level;
      const bool c1 = values(i + 1, j) >= level;
      const bool c2 = values(i + 1, j + 1) >= level;
      const bool c3 = values(i, j + 1) >= level;
      const int mask = (c0 ? 1 : 0) | (c1 ? 2 : 0) | (c2 ? 4 : 0) | (c3 ? 8 : 0);
      if (mask == 0 || mask == 15) continue;
      const Eigen::Vector2d e0 = cross(i, j, i + 1, j);              // bottom
      const Eigen::Vector2d e1 = cross(i + 1, j, i + 1, j + 1);      // right
      const Eigen::Vector2d e2 = cross(i, j + 1, i + 1, j + 1);      // top
      const Eigen::Vector2d e3 = cross(i, j, i, j + 1);              // left
      switch (mask) {
        case 1: case 14: out.push_back({e3, e0}); break;
        case 2: case 13: out.push_back({e0, e1}); break;
        case 3: case 12: out.push_back({e3, e1}); break;
        case 4: case 11: out.push_back({e1, e2}); break;
        case 6: case 9: out.push_back({e0, e2}); break;
        case 7: case 8: out.push_back({e3, e2}); break;
        case 5: case 10: {
          const double centre = 0.25 * (values(i, j) + values(i + 1, j) + values(i + 1, j + 1) + values(i, j + 1));
          const bool centre_above = centre >= level;
          // Saddle: connect so that the centre's side stays joined.
          if ((mask == 5) == centre_above) {
            out.push_back({e3, e2});
            out.push_back({e0, e1});
          } else {
            out.push_back({e3, e0});
            out.push_back({e1, e2});
          }
          break;
        }
        default: break;
      }
    }
  }
  return out;
}

nlohmann::json to_json(const ClassifierModel& model) {
  nlohmann::json xs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.X.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(model.X.cols()));
    for (Eigen::Index c = 0; c < model.X.cols(); ++c) row[static_cast<std::size_t>(c)] = model.X(i, c);
    xs.push_back(row);
  }
  std::vector<int> labels(static_cast<std::size_t>(model.y.size()));
  for (Eigen::Index i = 0; i < model.y.size(); ++i) labels[static_cast<std::size_t>(i)] = model.y(i) > 0 ? 1 : -1;
  return nlohmann::json{{"kernel", model.kernel}, {"X", xs}, {"labels", labels},
                        {"log_marginal", model.log_marginal}};
}

ClassifierModel classifier_from_json(const nlohmann::json& j) {
  try {
    const gp::KernelParams kernel = j.at("kernel").get<gp::KernelParams>();
    const auto rows = j.at("X").get<std::vector<std::vector<double>>>();
    LabeledDesign data;
    data.labels = j.at("labels").get<std::vector<int>>();
    data.X.resize(static_cast<Eigen::Index>(rows.size()), kernel.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != kernel.dim()) throw ConfigError("classifier JSON: ragged X");
      for (std::size_t c = 0; c < rows[i].size(); ++c) data.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
    return laplace_fit(data, kernel);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("classifier JSON: ") + e.what());
  }
}

}  // namespace abmuq::classify
