#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "abmuq/errors.hpp"
#include "abmuq/hetgp.hpp"

using namespace abmuq;
using namespace abmuq::hetgp;

namespace {

// n inputs on a grid in [0,1]^p, a replicates each, noise sd from `sd`.
template <class Mean, class Sd>
std::pair<Eigen::MatrixXd, Eigen::VectorXd> replicated_data(const Eigen::MatrixXd& pts, int a, Mean f, Sd sd,
                                                            Rng& rng) {
  const Eigen::Index n = pts.rows();
  Eigen::MatrixXd X(n * a, pts.cols());
  Eigen::VectorXd y(n * a);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int r = 0; r < a; ++r) {
      const Eigen::Index k = i * a + r;
      X.row(k) = pts.row(i);
      y(k) = f(pts.row(i).transpose()) + sd(pts.row(i).transpose()) * standard_normal(rng);
    }
  }
  return {X, y};
}

Eigen::MatrixXd uniform_points(int n, int p, Rng& rng) {
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) X(i, j) = uniform01(rng);
  }
  return X;
}

}  // namespace

TEST_CASE("summary of replicates {4, 6}") {
  Eigen::MatrixXd X(2, 1);
  X << 0.3, 0.3;
  const TrainingSummary s = summarize_replicates(X, Eigen::Vector2d(4.0, 6.0));
  REQUIRE(s.size() == 1);
  CHECK(s.ybar(0) == 5.0);
  CHECK(s.s2(0) == 2.0);
  CHECK(s.counts[0] == 2);
  CHECK_FALSE(s.imputed[0]);
}

TEST_CASE("identical replicates are floored before the log") {
  Eigen::MatrixXd X(6, 1);
  X << 0.1, 0.1, 0.1, 0.9, 0.9, 0.9;
  Eigen::VectorXd y(6);
  y << 1.0, 1.0, 1.0, 3.0, 3.5, 2.5;
  const TrainingSummary s = summarize_replicates(X, y);
  CHECK(s.s2(0) == 0.0);
  std::vector<Eigen::Index> rows;
  const Eigen::VectorXd t = log_variance_targets(s, 1e-6, rows);
  CHECK(rows.size() == 2);
  CHECK(std::isfinite(t(0)));
  CHECK(t(0) == doctest::Approx(std::log(variance_floor(s, 1e-6))));
  CHECK(variance_floor(s, 1e-6) == doctest::Approx(1e-6 * 1.0));
}

TEST_CASE("digamma and trigamma at known values") {
  const double euler = 0.57721566490153286;
  CHECK(digamma(1.0) == doctest::Approx(-euler).epsilon(1e-12));
  CHECK(digamma(0.5) == doctest::Approx(-euler - 2 * std::log(2.0)).epsilon(1e-12));
  CHECK(digamma(10.0) == doctest::Approx(2.251752589066721).epsilon(1e-12));
  CHECK(trigamma(1.0) == doctest::Approx(std::numbers::pi * std::numbers::pi / 6).epsilon(1e-12));
  CHECK(trigamma(0.5) == doctest::Approx(std::numbers::pi * std::numbers::pi / 2).epsilon(1e-12));
  CHECK(trigamma(4.5) == doctest::Approx(0.248725103039010).epsilon(1e-12));
}

TEST_CASE("log sample variance moments match the chi-square oracle") {
  Rng rng(11);
  const int a = 5;
  const int groups = 4000;
  double sum = 0.0;
  double sumsq = 0.0;
  for (int g = 0; g < groups; ++g) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(a, 1);
    Eigen::VectorXd y(a);
    for (int r = 0; r < a; ++r) y(r) = 2.0 * standard_normal(rng);
    TrainingSummary s = summarize_replicates(X, y);
    std::vector<Eigen::Index> rows;
    const double t = log_variance_targets(s, 1e-12, rows)(0);
    sum += t;
    sumsq += t * t;
  }
  const double mean = sum / groups;
  const double var = sumsq / groups - mean * mean;
  // E[log s2] = log tau^2 + digamma(h) - log(h), Var = trigamma(h), h = (a-1)/2.
  CHECK(mean == doctest::Approx(std::log(4.0) + digamma(2.0) - std::log(2.0)).epsilon(0.03));
  CHECK(var == doctest::Approx(trigamma(2.0)).epsilon(0.08));
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(a, 1);
  const TrainingSummary s = summarize_replicates(X, Eigen::VectorXd::Ones(a));
  CHECK(log_variance_noise(s, {0})(0) == trigamma(2.0));
}

TEST_CASE("30 inputs by 10 replicates gives 30 rows with count 10") {
  Rng rng(1);
  const Eigen::MatrixXd pts = uniform_points(30, 2, rng);
  auto [X, y] = replicated_data(pts, 10, [](const Eigen::VectorXd& x) { return x.sum(); },
                                [](const Eigen::VectorXd&) { return 0.1; }, rng);
  // Interleave rows so grouping cannot rely on adjacency.
  std::vector<int> order(300);
  for (int i = 0; i < 300; ++i) order[static_cast<std::size_t>(i)] = i;
  shuffle(order, rng);
  Eigen::MatrixXd Xs(300, 2);
  Eigen::VectorXd ys(300);
  for (int i = 0; i < 300; ++i) {
    Xs.row(i) = X.row(order[static_cast<std::size_t>(i)]);
    ys(i) = y(order[static_cast<std::size_t>(i)]);
  }
  const TrainingSummary s = summarize_replicates(Xs, ys);
  CHECK(s.size() == 30);
  CHECK(std::all_of(s.counts.begin(), s.counts.end(), [](int c) { return c == 10; }));
  CHECK((s.s2.array() >= 0.0).all());
}

TEST_CASE("singleton groups are imputed and flagged") {
  Eigen::MatrixXd X(5, 1);
  X << 0.1, 0.1, 0.5, 0.9, 0.9;
  Eigen::VectorXd y(5);
  y << 1.0, 3.0, 7.0, 2.0, 2.0;
  const TrainingSummary s = summarize_replicates(X, y);
  REQUIRE(s.size() == 3);
  CHECK(s.imputed[1]);
  CHECK(s.s2(1) == doctest::Approx(1.0));  // pooled: (2 + 0) / (1 + 1)
  std::vector<Eigen::Index> rows;
  log_variance_targets(s, 1e-6, rows);
  CHECK(rows == std::vector<Eigen::Index>{0, 2});
  CHECK_THROWS_AS(summarize_replicates(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0)), ConfigError);
}

TEST_CASE("constant true variance gives a flat log-variance surface") {
  Rng rng(2);
  const Eigen::MatrixXd pts = uniform_points(30, 2, rng);
  auto [X, y] = replicated_data(pts, 10, [](const Eigen::VectorXd& x) { return std::sin(3 * x(0)) + x(1); },
                                [](const Eigen::VectorXd&) { return 0.3; }, rng);
  const HetGPModel m = fit_hetgp(summarize_replicates(X, y), {}, rng);
  Eigen::MatrixXd grid(400, 2);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) grid.row(i * 20 + j) << (i + 0.5) / 20, (j + 0.5) / 20;
  }
  const Eigen::VectorXd lv = m.logvar_gp.predict(grid).mean;
  CHECK(lv.maxCoeff() - lv.minCoeff() < 1.0);
}

TEST_CASE("100:1 variance ratio is recovered at the extremes") {
  Rng rng(3);
  Eigen::MatrixXd pts(20, 1);
  for (int i = 0; i < 20; ++i) pts(i, 0) = (i + 0.5) / 20;
  auto [X, y] = replicated_data(pts, 10, [](const Eigen::VectorXd& x) { return std::cos(4 * x(0)); },
                                [](const Eigen::VectorXd& x) { return 0.05 * std::pow(10.0, x(0)); }, rng);
  const HetGPModel m = fit_hetgp(summarize_replicates(X, y), {}, rng);
  Eigen::MatrixXd ends(2, 1);
  ends << 0.02, 0.98;
  const Eigen::VectorXd iv = intrinsic_variance(m, ends);
  CHECK(iv(1) > 10.0 * iv(0));
}

TEST_CASE("mean GP nugget equals exp(logvar mean) over counts") {
  Rng rng(4);
  const Eigen::MatrixXd pts = uniform_points(12, 2, rng);
  auto [X, y] = replicated_data(pts, 4, [](const Eigen::VectorXd& x) { return x(0) - x(1); },
                                [](const Eigen::VectorXd& x) { return 0.1 + x(0); }, rng);
  const TrainingSummary s = summarize_replicates(X, y);
  const HetGPModel m = fit_hetgp(s, {}, rng);
  const Eigen::VectorXd tau2 = m.logvar_gp.predict(s.unique_X).mean.array().exp();
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    CHECK(m.mean_gp.nugget()(i) == doctest::Approx(tau2(i) / s.counts[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("prediction properties on a grid") {
  Rng rng(5);
  const Eigen::MatrixXd pts = uniform_points(15, 2, rng);
  auto [X, y] = replicated_data(pts, 6, [](const Eigen::VectorXd& x) { return x.squaredNorm(); },
                                [](const Eigen::VectorXd& x) { return 0.05 + 0.3 * x(1); }, rng);
  const TrainingSummary s = summarize_replicates(X, y);
  const HetGPModel m = fit_hetgp(s, {}, rng);
  Eigen::MatrixXd grid(2500, 2);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) grid.row(i * 50 + j) << i / 49.0, j / 49.0;
  }
  const HetPrediction p = predict_hetgp(m, grid);
  CHECK((p.intrinsic_var.array() > 0.0).all());
  CHECK((p.var_mean.array() >= 0.0).all());
  CHECK(((p.var_mean + p.intrinsic_var).array() >= p.intrinsic_var.array()).all());
}

TEST_CASE("with many replicates the mean at a training input is close to ybar") {
  Rng rng(12);
  Eigen::MatrixXd pts(8, 2);
  for (int i = 0; i < 8; ++i) pts.row(i) << (i % 4 + 0.5) / 4, (i / 4 + 0.5) / 2;
  auto [X, y] = replicated_data(pts, 200, [](const Eigen::VectorXd& x) { return std::sin(3 * x(0)) + x(1); },
                                [](const Eigen::VectorXd& x) { return 0.05 + 0.1 * x(0); }, rng);
  const TrainingSummary s = summarize_replicates(X, y);
  const HetGPModel m = fit_hetgp(s, {}, rng);
  const HetPrediction at = predict_hetgp(m, s.unique_X);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    CHECK(std::abs(at.mean(i) - s.ybar(i)) <= 2.0 * std::sqrt(at.var_mean(i)));
  }
}

TEST_CASE("doubling replicate counts never increases var_mean at training inputs") {
  Rng rng(6);
  const Eigen::MatrixXd pts = uniform_points(10, 2, rng);
  auto [X, y] = replicated_data(pts, 5, [](const Eigen::VectorXd& x) { return std::sin(5 * x(0)); },
                                [](const Eigen::VectorXd& x) { return 0.2 + x(0); }, rng);
  const TrainingSummary s = summarize_replicates(X, y);
  const HetGPModel m = fit_hetgp(s, {}, rng);
  std::vector<int> doubled = s.counts;
  for (int& c : doubled) c *= 2;
  const gp::GPModel base = condition_mean_gp(m, s.unique_X, s.ybar, s.counts);
  const gp::GPModel more = condition_mean_gp(m, s.unique_X, s.ybar, doubled);
  const Eigen::VectorXd v0 = base.predict(s.unique_X).var;
  const Eigen::VectorXd v1 = more.predict(s.unique_X).var;
  CHECK((v1.array() <= v0.array() + 1e-12).all());
}

TEST_CASE("equal sample variances match a homoskedastic fit with tau^2 = s2 / a") {
  // Construct replicates with exactly equal sample variance at every input:
  // ybar +/- d gives s2 = 2 d^2 for two replicates.
  Rng rng(7);
  const Eigen::MatrixXd pts = uniform_points(15, 1, rng);
  const double d = 0.2;
  Eigen::MatrixXd X(30, 1);
  Eigen::VectorXd y(30);
  Eigen::VectorXd ybar(15);
  for (int i = 0; i < 15; ++i) {
    ybar(i) = std::sin(6 * pts(i, 0));
    X(2 * i, 0) = X(2 * i + 1, 0) = pts(i, 0);
    y(2 * i) = ybar(i) + d;
    y(2 * i + 1) = ybar(i) - d;
  }
  const TrainingSummary s = summarize_replicates(X, y);
  CHECK((s.s2.array() - 2 * d * d).abs().maxCoeff() < 1e-12);
  Rng a(8);
  const HetGPModel m = fit_hetgp(s, {}, a);
  const Eigen::VectorXd tau = m.mean_gp.nugget();
  CHECK((tau.array() - d * d).abs().maxCoeff() < 1e-3 * d * d);

  Rng b(9);
  const gp::GPModel homo = gp::fit(s.unique_X, s.ybar, gp::FixedNugget{Eigen::VectorXd::Constant(15, d * d)}, {}, b);
  Eigen::MatrixXd grid(101, 1);
  for (int i = 0; i <= 100; ++i) grid(i, 0) = i / 100.0;
  const Eigen::VectorXd mh = m.mean_gp.predict(grid).mean;
  const Eigen::VectorXd mo = homo.predict(grid).mean;
  CHECK((mh - mo).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("recondition keeps hyperparameters and JSON round trip") {
  Rng rng(10);
  const Eigen::MatrixXd pts = uniform_points(10, 2, rng);
  auto [X, y] = replicated_data(pts, 3, [](const Eigen::VectorXd& x) { return x(0); },
                                [](const Eigen::VectorXd&) { return 0.1; }, rng);
  const TrainingSummary s = summarize_replicates(X, y);
  const HetGPModel m = fit_hetgp(s, {}, rng);
  const HetGPModel r = recondition(m, s);
  CHECK(r.mean_gp.kernel().lengthscales == m.mean_gp.kernel().lengthscales);
  const Eigen::MatrixXd Q = uniform_points(20, 2, rng);
  CHECK((predict_hetgp(r, Q).mean - predict_hetgp(m, Q).mean).cwiseAbs().maxCoeff() < 1e-9);
  const HetGPModel back = hetgp_model_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK((predict_hetgp(back, Q).intrinsic_var - predict_hetgp(m, Q).intrinsic_var).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.counts == m.counts);
}
