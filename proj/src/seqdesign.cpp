#include "abmuq/seqdesign.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "abmuq/errors.hpp"
#include "abmuq/parallel.hpp"

namespace abmuq::seqdesign {

ReferenceSet make_reference_set(int p, const classify::ClassifierModel* classifier, int size, int min_size) {
  if (size < 1) throw ConfigError("reference set size must be >= 1");
  if (classifier == nullptr) return {design::halton(size, p)};
  constexpr int kMaxPoints = 1 << 16;
  for (int total = size; total <= kMaxPoints; total *= 2) {
    const Eigen::MatrixXd all = design::halton(total, p);
    const Eigen::VectorXd prob = classify::predict_prob(*classifier, all);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < all.rows() && static_cast<int>(keep.size()) < size; ++i) {
      if (prob(i) >= 0.5) keep.push_back(i);
    }
    if (static_cast<int>(keep.size()) >= min_size) {
      ReferenceSet ref{Eigen::MatrixXd(static_cast<Eigen::Index>(keep.size()), p)};
      for (std::size_t k = 0; k < keep.size(); ++k) ref.points.row(static_cast<Eigen::Index>(k)) = all.row(keep[k]);
      return ref;
    }
  }
  throw NumericalError("classifier leaves fewer than " + std::to_string(min_size) +
                       " reference points with an output");
}

double imspe(const gp::GPModel& mean_gp, const ReferenceSet& reference) {
  if (reference.points.rows() == 0) throw ConfigError("imspe: empty reference set");
  return mean_gp.predict(reference.points).var.mean();
}

double imspe(const hetgp::HetGPModel& model, const ReferenceSet& reference) {
  return imspe(model.mean_gp, reference);
}

std::string to_string(ChoiceKind kind) { return kind == ChoiceKind::Fresh ? "fresh" : "replicate"; }

DesignState make_state(std::vector<RunRecord> runs, hetgp::HetGPModel model) {
  DesignState s;
  s.rep_design = replicated_design_of(runs);
  s.all_runs = std::move(runs);
  s.model = std::move(model);
  return s;
}

namespace {

// Row of `X` equal to `x`, or -1.
Eigen::Index find_row(const Eigen::MatrixXd& X, const Eigen::VectorXd& x) {
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if ((X.row(i).transpose().array() == x.array()).all()) return i;
  }
  return -1;
}

}  // namespace

gp::GPModel hypothetical_mean_gp(const hetgp::HetGPModel& model, const DesignState& state,
                                 const Candidate& candidate) {
  Eigen::VectorXd x;
  if (const auto* fresh = std::get_if<FreshPoint>(&candidate)) {
    if (fresh->x.size() != model.mean_gp.dim() || (fresh->x.array() < 0.0).any() ||
        (fresh->x.array() > 1.0).any()) {
      throw ConfigError("candidate point lies outside the unit hypercube");
    }
    x = fresh->x;
  } else {
    const Eigen::Index idx = std::get<Replicate>(candidate).index;
    if (idx < 0 || idx >= state.rep_design.size()) throw ConfigError("replicate index out of range");
    x = state.rep_design.points.row(idx).transpose();
  }

  Eigen::MatrixXd X = model.mean_gp.X();
  Eigen::VectorXd ybar = model.mean_gp.y();
  std::vector<int> counts = model.counts;
  const Eigen::Index row = std::holds_alternative<Replicate>(candidate) ? find_row(X, x) : -1;
  if (row >= 0) {
    ++counts[static_cast<std::size_t>(row)];
  } else {
    // A design point with no output yet behaves like a fresh input.
    const Eigen::Index n = X.rows();
    X.conservativeResize(n + 1, Eigen::NoChange);
    X.row(n) = x.transpose();
    ybar.conservativeResize(n + 1);
    ybar(n) = model.mean_gp.predict(x.transpose()).mean(0);
    counts.push_back(1);
  }
  return hetgp::condition_mean_gp(model, X, ybar, counts);
}

double hypothetical_imspe(const hetgp::HetGPModel& model, const DesignState& state,
                          const Candidate& candidate, const ReferenceSet& reference) {
  return imspe(hypothetical_mean_gp(model, state, candidate), reference);
}

double candidate_gain(const hetgp::HetGPModel& model, const DesignState& state,
                      const Candidate& candidate, const ReferenceSet& reference) {
  return imspe(model, reference) - hypothetical_imspe(model, state, candidate, reference);
}

Choice select_next(const hetgp::HetGPModel& model, const DesignState& state, int n_candidates, Rng& rng,
                   const ReferenceSet& reference, const classify::ClassifierModel* classifier, int jobs) {
  const auto p = static_cast<int>(model.mean_gp.dim());
  std::vector<Candidate> pool;
  if (n_candidates > 0) {
    const Eigen::MatrixXd fresh = design::lhd(n_candidates, p, rng);
    std::vector<char> admissible(static_cast<std::size_t>(fresh.rows()), 1);
    if (classifier != nullptr) {
      const Eigen::VectorXd prob = classify::predict_prob(*classifier, fresh);
      bool any = false;
      for (Eigen::Index i = 0; i < fresh.rows(); ++i) {
        admissible[static_cast<std::size_t>(i)] = prob(i) >= 0.5;
        any = any || prob(i) >= 0.5;
      }
      if (!any) {
        throw NumericalError("classifier rejects every fresh candidate; refit the classifier on current runs");
      }
    }
    for (Eigen::Index i = 0; i < fresh.rows(); ++i) {
      const Eigen::VectorXd x = fresh.row(i).transpose();
      if (admissible[static_cast<std::size_t>(i)] && find_row(state.rep_design.points, x) < 0) {
        pool.push_back(FreshPoint{x});
      }
    }
  }
  for (Eigen::Index i = 0; i < state.rep_design.size(); ++i) pool.push_back(Replicate{i});
  if (pool.empty()) throw NumericalError("select_next: no admissible candidates");

  std::vector<double> scores(pool.size());
  parallel_for(pool.size(), jobs,
               [&](std::size_t i) { scores[i] = hypothetical_imspe(model, state, pool[i], reference); });
  Choice best{pool.front(), imspe(model, reference), std::numeric_limits<double>::infinity(),
              static_cast<int>(pool.size())};
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (scores[i] < best.imspe_after) {
      best.imspe_after = scores[i];
      best.candidate = pool[i];
    }
  }
  return best;
}

DesignState run_sequential(DesignState state, int budget, Rng& rng, const Simulator& simulator,
                           const ReferenceSet& reference, const SequentialOptions& options) {
  if (budget < 0) throw ConfigError("sequential budget must be >= 0");
  if (options.refit_every < 1) throw ConfigError("refit_every must be >= 1");
  for (int iter = 1; iter <= budget; ++iter) {
    const Choice choice = select_next(state.model, state, options.n_candidates, rng, reference, options.classifier,
                                     options.jobs);

    IterationRecord rec;
    rec.iter = iter;
    rec.imspe_before = choice.imspe_before;
    rec.imspe_after = choice.imspe_after;
    rec.candidates_evaluated = choice.candidates_evaluated;
    if (const auto* fresh = std::get_if<FreshPoint>(&choice.candidate)) {
      rec.kind = ChoiceKind::Fresh;
      rec.x = fresh->x;
    } else {
      rec.kind = ChoiceKind::Replicate;
      rec.x = state.rep_design.points.row(std::get<Replicate>(choice.candidate).index).transpose();
    }

    RunRecord run;
    run.x = rec.x;
    run.seed = derive_seed(options.run_seed_base, static_cast<std::uint64_t>(state.all_runs.size()));
    run.output = simulator(run.x, run.seed);
    rec.produced_output = run.output.has_value();
    state.all_runs.push_back(std::move(run));
    state.rep_design = replicated_design_of(state.all_runs);

    const hetgp::TrainingSummary summary = quantitative_summary(state.all_runs);
    if (iter % options.refit_every == 0) {
      state.model = hetgp::fit_hetgp(summary, options.fit, rng);
    } else {
      state.model = hetgp::recondition(state.model, summary, options.fit.variance_floor_scale);
    }

    for (Eigen::Index i = 0; i < state.rep_design.size(); ++i) {
      if ((state.rep_design.points.row(i).transpose().array() == rec.x.array()).all()) {
        rec.total_replicates = state.rep_design.replicates[static_cast<std::size_t>(i)];
      }
    }
    state.history.push_back(std::move(rec));
  }
  return state;
}

double nrmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
  if (predicted.size() != truth.size() || truth.size() == 0) throw std::invalid_argument("nrmse: size mismatch");
  const double range = truth.maxCoeff() - truth.minCoeff();
  const double rmse = std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(truth.size()));
  return range > 0.0 ? rmse / range : rmse;
}

}  // namespace abmuq::seqdesign
