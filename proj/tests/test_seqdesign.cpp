#include <doctest.h>

#include <cmath>

#include "abmuq/errors.hpp"
#include "abmuq/seqdesign.hpp"
#include "oracles.hpp"

using namespace abmuq;
using namespace abmuq::seqdesign;

namespace {

gp::KernelParams kernel(gp::KernelFamily f, double sv, std::vector<double> ls) {
  gp::KernelParams k;
  k.family = f;
  k.signal_var = sv;
  k.lengthscales = Eigen::Map<Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
  return k;
}

// Heteroskedastic model with fixed hyperparameters: log tau^2 interpolates
// `logvar` at X.
hetgp::HetGPModel fixed_model(const Eigen::MatrixXd& X, const Eigen::VectorXd& ybar, const Eigen::VectorXd& logvar,
                              const std::vector<int>& counts, double ls = 0.2) {
  std::vector<double> lsv(static_cast<std::size_t>(X.cols()), ls);
  hetgp::HetGPModel m;
  m.logvar_gp = gp::GPModel::condition(X, logvar, kernel(gp::KernelFamily::Matern52, 1.0, lsv),
                                       Eigen::VectorXd::Constant(X.rows(), 1e-6));
  m.mean_gp = gp::GPModel::condition(X, ybar, kernel(gp::KernelFamily::Matern52, 1.0, lsv),
                                     Eigen::VectorXd::Ones(X.rows()));
  m.counts = counts;
  m.mean_gp = hetgp::condition_mean_gp(m, X, ybar, counts);
  return m;
}

DesignState state_for(const Eigen::MatrixXd& X, const std::vector<int>& counts, hetgp::HetGPModel m) {
  DesignState s;
  s.rep_design.points = X;
  s.rep_design.replicates = counts;
  s.model = std::move(m);
  return s;
}

// Synthetic heteroskedastic simulator on [0,1]^p.
std::optional<double> synthetic(const Eigen::VectorXd& x, std::uint64_t seed) {
  Rng rng(seed);
  const double sd = x(0) < 0.5 ? 0.05 : 0.5;
  return std::sin(2 * std::numbers::pi * x(0)) + (x.size() > 1 ? x(1) : 0.0) + sd * standard_normal(rng);
}

DesignState initial_state(int n, int reps, int p, std::uint64_t seed) {
  Rng rng(seed);
  design::ReplicatedDesign d{design::lhd(n, p, rng), std::vector<int>(static_cast<std::size_t>(n), reps)};
  auto runs = run_design(d, synthetic, seed, 0);
  auto model = hetgp::fit_hetgp(quantitative_summary(runs), {}, rng);
  return make_state(std::move(runs), std::move(model));
}

}  // namespace

TEST_CASE("IMSPE vanishes on the training inputs of an interpolating model") {
  Rng rng(1);
  const Eigen::MatrixXd X = design::lhd(10, 2, rng);
  const gp::GPModel m = gp::GPModel::condition(X, Eigen::VectorXd::Random(10),
                                               kernel(gp::KernelFamily::Matern52, 1.0, {0.3, 0.3}),
                                               Eigen::VectorXd::Zero(10));
  CHECK(imspe(m, ReferenceSet{X}) < 1e-6);
}

TEST_CASE("IMSPE of the prior is the signal variance") {
  const gp::GPModel m = gp::GPModel::condition(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0),
                                               kernel(gp::KernelFamily::Matern52, 2.7, {0.3, 0.3}),
                                               Eigen::VectorXd(0), 0.0);
  CHECK(imspe(m, make_reference_set(2)) == doctest::Approx(2.7).epsilon(1e-12));
  CHECK_THROWS_AS(imspe(m, ReferenceSet{Eigen::MatrixXd(0, 2)}), ConfigError);
}

TEST_CASE("reference-set IMSPE matches a dense trapezoid integral in 1-D") {
  Eigen::MatrixXd X(3, 1);
  X << 0.15, 0.5, 0.8;
  const gp::GPModel m = gp::GPModel::condition(X, Eigen::Vector3d(0.1, -0.4, 0.3),
                                               kernel(gp::KernelFamily::SquaredExponential, 1.0, {0.15}),
                                               Eigen::Vector3d(0.01, 0.02, 0.01));
  const int n = 10001;
  Eigen::MatrixXd grid(n, 1);
  for (int i = 0; i < n; ++i) grid(i, 0) = static_cast<double>(i) / (n - 1);
  const Eigen::VectorXd v = m.predict(grid).var;
  const double h = 1.0 / (n - 1);
  const double trap = h * (v.sum() - 0.5 * (v(0) + v(n - 1)));
  CHECK(imspe(m, make_reference_set(1)) == doctest::Approx(trap).epsilon(0.01));
}

TEST_CASE("a fresh far point beats replicating a well-replicated point") {
  Eigen::MatrixXd X(2, 1);
  X << 0.1, 0.2;
  const std::vector<int> counts{10, 10};
  const auto m = fixed_model(X, Eigen::Vector2d(0.0, 0.5), Eigen::Vector2d(std::log(0.1), std::log(0.1)), counts);
  const DesignState s = state_for(X, counts, m);
  const ReferenceSet ref = make_reference_set(1);
  const double dup = hypothetical_imspe(m, s, Replicate{0}, ref);
  const double fresh = hypothetical_imspe(m, s, FreshPoint{Eigen::VectorXd::Constant(1, 0.8)}, ref);
  CHECK(fresh < dup);
}

TEST_CASE("replicating the high-variance point gains more") {
  Eigen::MatrixXd X(2, 1);
  X << 0.2, 0.8;
  const std::vector<int> counts{3, 3};
  const auto m = fixed_model(X, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(std::log(10.0), std::log(0.01)), counts);
  const DesignState s = state_for(X, counts, m);
  const ReferenceSet ref = make_reference_set(1);
  CHECK(candidate_gain(m, s, Replicate{0}, ref) > candidate_gain(m, s, Replicate{1}, ref));
  CHECK(intrinsic_variance(m, X)(0) > 100 * intrinsic_variance(m, X)(1));
}

TEST_CASE("hypothetical additions never increase IMSPE") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const DesignState s = initial_state(12, 3, 2, 100 + seed);
    const ReferenceSet ref = make_reference_set(2);
    const double before = imspe(s.model, ref);
    Rng rng(seed);
    for (int c = 0; c < 30; ++c) {
      const Candidate cand = c % 3 == 0 ? Candidate{Replicate{static_cast<Eigen::Index>(uniform_index(rng, 12))}}
                                        : Candidate{FreshPoint{Eigen::Vector2d(uniform01(rng), uniform01(rng))}};
      CHECK(hypothetical_imspe(s.model, s, cand, ref) <= before + 1e-10);
    }
  }
}

TEST_CASE("refactorized hypothetical variance equals the rank-one update") {
  const DesignState s = initial_state(10, 4, 2, 7);
  const gp::GPModel& g = s.model.mean_gp;
  const Eigen::MatrixXd& X = g.X();
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd C = gp::cross_covariance(g.kernel(), X, X);
  C.diagonal() += g.nugget() + Eigen::VectorXd::Constant(n, g.jitter());
  const Eigen::MatrixXd Ci = C.inverse();
  auto post_cov = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd ka = gp::cross_covariance(g.kernel(), X, a.transpose());
    const Eigen::VectorXd kb = gp::cross_covariance(g.kernel(), X, b.transpose());
    return gp::kernel_eval(g.kernel(), a, b) - ka.dot(Ci * kb);
  };
  Rng rng(3);
  Eigen::MatrixXd Q(25, 2);
  for (int i = 0; i < 25; ++i) Q.row(i) << uniform01(rng), uniform01(rng);

  // Fresh point: new observation with noise tau^2(x) + jitter.
  const Eigen::Vector2d xn(0.37, 0.61);
  const double r_fresh = intrinsic_variance(s.model, xn.transpose())(0) + g.jitter();
  const Eigen::VectorXd v_fresh = hypothetical_mean_gp(s.model, s, FreshPoint{xn}).predict(Q).var;
  for (int i = 0; i < 25; ++i) {
    const Eigen::VectorXd q = Q.row(i).transpose();
    const double expected = post_cov(q, q) - std::pow(post_cov(q, xn), 2) / (post_cov(xn, xn) + r_fresh);
    CHECK(v_fresh(i) == doctest::Approx(expected).epsilon(1e-6));
  }

  // Replicate of row 0: precision gain equal to one extra observation.
  const Eigen::VectorXd x0 = X.row(0).transpose();
  const double n_old = g.nugget()(0) + g.jitter();
  const double n_new = g.nugget()(0) * s.model.counts[0] / (s.model.counts[0] + 1) + g.jitter();
  const double r_rep = 1.0 / (1.0 / n_new - 1.0 / n_old);
  const Eigen::VectorXd v_rep = hypothetical_mean_gp(s.model, s, Replicate{0}).predict(Q).var;
  for (int i = 0; i < 25; ++i) {
    const Eigen::VectorXd q = Q.row(i).transpose();
    const double expected = post_cov(q, q) - std::pow(post_cov(q, x0), 2) / (post_cov(x0, x0) + r_rep);
    CHECK(v_rep(i) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("an empty corner attracts the next fresh point") {
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const double a = (i + 0.5) / 8;
      const double b = (j + 0.5) / 8;
      if (a > 0.6 && b > 0.6) continue;
      pts.emplace_back(a, b);
    }
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  const std::vector<int> counts(pts.size(), 5);
  const auto m = fixed_model(X, Eigen::VectorXd::Zero(X.rows()), Eigen::VectorXd::Constant(X.rows(), std::log(0.05)),
                             counts, 0.15);
  const DesignState s = state_for(X, counts, m);
  Rng rng(4);
  const Choice c = select_next(m, s, 100, rng, make_reference_set(2));
  REQUIRE(std::holds_alternative<FreshPoint>(c.candidate));
  const Eigen::VectorXd x = std::get<FreshPoint>(c.candidate).x;
  CHECK(x(0) > 0.6);
  CHECK(x(1) > 0.6);
  CHECK(c.imspe_after <= c.imspe_before);
}

TEST_CASE("when every fresh candidate duplicates a design point a replicate is chosen") {
  Rng probe(5);
  const Eigen::MatrixXd X = design::lhd(6, 2, probe);
  const std::vector<int> counts(6, 2);
  const auto m = fixed_model(X, Eigen::VectorXd::Zero(6), Eigen::VectorXd::Constant(6, std::log(0.1)), counts);
  const DesignState s = state_for(X, counts, m);
  Rng rng(5);
  const Choice c = select_next(m, s, 6, rng, make_reference_set(2));
  CHECK(std::holds_alternative<Replicate>(c.candidate));
  CHECK(c.candidates_evaluated == 6);
}

TEST_CASE("selection is reproducible and parallel-invariant") {
  const DesignState s = initial_state(10, 3, 2, 8);
  const ReferenceSet ref = make_reference_set(2);
  Rng a(9);
  Rng b(9);
  const Choice ca = select_next(s.model, s, 50, a, ref);
  const Choice cb = select_next(s.model, s, 50, b, ref, nullptr, 4);
  CHECK(ca.imspe_after == cb.imspe_after);
  CHECK(ca.candidate.index() == cb.candidate.index());
}

TEST_CASE("classifier rejecting every candidate is an error") {
  const DesignState s = initial_state(8, 3, 2, 10);
  Rng rng(11);
  classify::LabeledDesign neg;
  neg.X = design::lhd(30, 2, rng);
  neg.labels.assign(30, -1);
  neg.labels[0] = 1;
  const auto cls = classify::laplace_fit(neg, kernel(gp::KernelFamily::SquaredExponential, 10.0, {0.5, 0.5}));
  CHECK_THROWS_AS(select_next(s.model, s, 20, rng, make_reference_set(2), &cls), NumericalError);
}

TEST_CASE("run_sequential: budget zero leaves the state unchanged") {
  const DesignState s = initial_state(8, 3, 2, 12);
  Rng rng(13);
  const DesignState t = run_sequential(s, 0, rng, synthetic, make_reference_set(2));
  CHECK(t.all_runs.size() == s.all_runs.size());
  CHECK(t.history.empty());
  CHECK(t.rep_design.points == s.rep_design.points);
}

TEST_CASE("run_sequential history and design invariants") {
  const DesignState s = initial_state(10, 3, 2, 14);
  Rng rng(15);
  SequentialOptions opt;
  opt.n_candidates = 40;
  opt.run_seed_base = 99;
  const DesignState t = run_sequential(s, 6, rng, synthetic, make_reference_set(2), opt);
  REQUIRE(t.history.size() == 6);
  CHECK(t.all_runs.size() == s.all_runs.size() + 6);
  int total = 0;
  for (Eigen::Index i = 0; i < t.rep_design.size(); ++i) {
    int mult = 0;
    for (const auto& r : t.all_runs) mult += (r.x.transpose().array() == t.rep_design.points.row(i).array()).all();
    CHECK(mult == t.rep_design.replicates[static_cast<std::size_t>(i)]);
    total += mult;
  }
  CHECK(total == static_cast<int>(t.all_runs.size()));
  for (const auto& h : t.history) {
    CHECK(h.imspe_after <= h.imspe_before + 1e-10);
    CHECK(h.total_replicates >= 1);
    CHECK(h.candidates_evaluated >= static_cast<int>(s.rep_design.size()));
  }
  Rng rng2(15);
  const DesignState u = run_sequential(s, 6, rng2, synthetic, make_reference_set(2), opt);
  for (std::size_t i = 0; i < 6; ++i) CHECK(u.history[i].x == t.history[i].x);
}

TEST_CASE("nrmse") {
  CHECK(nrmse(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)) == 0.0);
  CHECK(nrmse(Eigen::Vector2d(1, 1), Eigen::Vector2d(0, 2)) == doctest::Approx(0.5));
}
