#include "abmuq/hetgp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "abmuq/errors.hpp"

namespace abmuq::hetgp {

namespace {

struct RowLess {
  bool operator()(const std::vector<double>& a, const std::vector<double>& b) const { return a < b; }
};

double population_variance(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  return (v.array() - v.mean()).square().mean();
}

}  // namespace

TrainingSummary summarize_replicates(const Eigen::MatrixXd& X_full, const Eigen::VectorXd& y_full) {
  if (X_full.rows() == 0) throw ConfigError("summarize_replicates: no runs");
  if (X_full.rows() != y_full.size()) throw std::invalid_argument("summarize_replicates: size mismatch");

  std::map<std::vector<double>, std::size_t, RowLess> index;
  std::vector<std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < X_full.rows(); ++i) {
    std::vector<double> key(X_full.cols());
    for (Eigen::Index c = 0; c < X_full.cols(); ++c) key[static_cast<std::size_t>(c)] = X_full(i, c);
    auto [it, inserted] = index.emplace(std::move(key), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  const auto m = static_cast<Eigen::Index>(groups.size());
  TrainingSummary s;
  s.unique_X.resize(m, X_full.cols());
  s.ybar.resize(m);
  s.s2.resize(m);
  s.counts.resize(groups.size());
  s.imputed.assign(groups.size(), false);

  double pooled_ss = 0.0;
  long long pooled_df = 0;
  for (Eigen::Index g = 0; g < m; ++g) {
    const auto& rows = groups[static_cast<std::size_t>(g)];
    const auto a = static_cast<int>(rows.size());
    s.unique_X.row(g) = X_full.row(rows.front());
    double mean = 0.0;
    for (auto r : rows) mean += y_full(r);
    mean /= a;
    double ss = 0.0;
    for (auto r : rows) ss += (y_full(r) - mean) * (y_full(r) - mean);
    s.ybar(g) = mean;
    s.counts[static_cast<std::size_t>(g)] = a;
    if (a >= 2) {
      s.s2(g) = ss / (a - 1);
      pooled_ss += ss;
      pooled_df += a - 1;
    }
  }

  double fill = 0.0;
  if (pooled_df > 0) {
    fill = pooled_ss / static_cast<double>(pooled_df);
  } else if (m >= 2) {
    fill = population_variance(s.ybar) * static_cast<double>(m) / static_cast<double>(m - 1);
  }
  for (Eigen::Index g = 0; g < m; ++g) {
    if (s.counts[static_cast<std::size_t>(g)] < 2) {
      s.s2(g) = fill;
      s.imputed[static_cast<std::size_t>(g)] = true;
    }
  }
  return s;
}

double digamma(double x) {
  double acc = 0.0;
  while (x < 12.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  return acc + std::log(x) - 0.5 / x -
         f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f / 132))));
}

double trigamma(double x) {
  double acc = 0.0;
  while (x < 12.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  return acc + 1.0 / x + f / 2.0 +
         f / x * (1.0 / 6 - f * (1.0 / 30 - f * (1.0 / 42 - f * (1.0 / 30 - f * 5.0 / 66))));
}

namespace {

double half_df(const TrainingSummary& s, Eigen::Index i) {
  return 0.5 * std::max(s.counts[static_cast<std::size_t>(i)] - 1, 1);
}

}  // namespace

double variance_floor(const TrainingSummary& summary, double floor_scale) {
  const double v = population_variance(summary.ybar);
  return v > 0.0 ? floor_scale * v : 1e-12;
}

Eigen::VectorXd log_variance_targets(const TrainingSummary& summary, double floor_scale,
                                     std::vector<Eigen::Index>& rows) {
  rows.clear();
  for (Eigen::Index i = 0; i < summary.size(); ++i) {
    if (!summary.imputed[static_cast<std::size_t>(i)]) rows.push_back(i);
  }
  // Too few observed variances to train on: fall back to imputed values.
  if (rows.size() < 2) {
    rows.clear();
    for (Eigen::Index i = 0; i < summary.size(); ++i) rows.push_back(i);
  }
  const double floor = variance_floor(summary, floor_scale);
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = std::log(std::max(summary.s2(rows[k]), floor));
  }
  return out;
}

Eigen::VectorXd log_variance_noise(const TrainingSummary& summary, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = trigamma(half_df(summary, rows[k]));
  }
  return out;
}

namespace {

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = X.row(rows[k]);
  return out;
}

Eigen::VectorXd mean_nugget(const gp::GPModel& logvar_gp, const Eigen::MatrixXd& X,
                            const std::vector<int>& counts) {
  const Eigen::VectorXd tau2 = logvar_gp.predict(X).mean.array().exp();
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = tau2(i) / counts[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace

HetGPModel fit_hetgp(const TrainingSummary& summary, const HetGPOptions& options, Rng& rng) {
  if (summary.size() < 2) throw ConfigError("fit_hetgp needs at least 2 distinct inputs");
  std::vector<Eigen::Index> rows;
  const Eigen::VectorXd log_s2 = log_variance_targets(summary, options.variance_floor_scale, rows);
  HetGPModel model;
  const Eigen::VectorXd base = log_variance_noise(summary, rows);
  model.logvar_gp = gp::fit(select_rows(summary.unique_X, rows), log_s2,
                            gp::ScaledNugget{base, options.logvar_noise_min, options.logvar_noise_max},
                            options.logvar_fit, rng);
  model.logvar_noise_scale = model.logvar_gp.nugget()(0) / base(0);
  model.counts = summary.counts;
  const Eigen::VectorXd nugget = mean_nugget(model.logvar_gp, summary.unique_X, summary.counts);
  model.mean_gp = gp::fit(summary.unique_X, summary.ybar, gp::FixedNugget{nugget}, options.mean_fit, rng);
  return model;
}

gp::GPModel condition_mean_gp(const HetGPModel& source, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& ybar, const std::vector<int>& counts) {
  return gp::GPModel::condition(X, ybar, source.mean_gp.kernel(),
                                mean_nugget(source.logvar_gp, X, counts));
}

HetGPModel recondition(const HetGPModel& source, const TrainingSummary& summary,
                       double variance_floor_scale) {
  std::vector<Eigen::Index> rows;
  const Eigen::VectorXd log_s2 = log_variance_targets(summary, variance_floor_scale, rows);
  HetGPModel model;
  model.logvar_gp = gp::GPModel::condition(select_rows(summary.unique_X, rows), log_s2,
                                           source.logvar_gp.kernel(),
                                           source.logvar_noise_scale * log_variance_noise(summary, rows));
  model.mean_gp = source.mean_gp;
  model.counts = summary.counts;
  model.mean_gp = condition_mean_gp(model, summary.unique_X, summary.ybar, summary.counts);
  return model;
}

Eigen::VectorXd intrinsic_variance(const HetGPModel& model, const Eigen::MatrixXd& Xnew) {
  return model.logvar_gp.predict(Xnew).mean.array().exp();
}

HetPrediction predict_hetgp(const HetGPModel& model, const Eigen::MatrixXd& Xnew) {
  const gp::Prediction p = model.mean_gp.predict(Xnew);
  return {p.mean, p.var, intrinsic_variance(model, Xnew)};
}

nlohmann::json to_json(const HetGPModel& model) {
  return nlohmann::json{{"mean_gp", gp::to_json(model.mean_gp)},
                        {"logvar_gp", gp::to_json(model.logvar_gp)},
                        {"counts", model.counts},
                        {"logvar_noise_scale", model.logvar_noise_scale}};
}

HetGPModel hetgp_model_from_json(const nlohmann::json& j) {
  try {
    HetGPModel m;
    m.mean_gp = gp::gp_model_from_json(j.at("mean_gp"));
    m.logvar_gp = gp::gp_model_from_json(j.at("logvar_gp"));
    m.counts = j.at("counts").get<std::vector<int>>();
    m.logvar_noise_scale = j.at("logvar_noise_scale").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("hetGP model JSON: ") + e.what());
  }
}

}  // namespace abmuq::hetgp
