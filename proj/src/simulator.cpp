#include "abmuq/simulator.hpp"

#include <map>

#include "abmuq/errors.hpp"
#include "abmuq/parallel.hpp"
#include "abmuq/random.hpp"

namespace abmuq {

std::vector<RunRecord> run_design(const design::ReplicatedDesign& design, const Simulator& simulator,
                                  std::uint64_t seed_base, std::size_t first_index, int jobs) {
  design.validate();
  std::vector<RunRecord> runs;
  for (Eigen::Index i = 0; i < design.size(); ++i) {
    for (int r = 0; r < design.replicates[static_cast<std::size_t>(i)]; ++r) {
      RunRecord rec;
      rec.x = design.points.row(i).transpose();
      rec.seed = derive_seed(seed_base, static_cast<std::uint64_t>(first_index + runs.size()));
      runs.push_back(std::move(rec));
    }
  }
  parallel_for(runs.size(), jobs, [&](std::size_t k) { runs[k].output = simulator(runs[k].x, runs[k].seed); });
  return runs;
}

design::ReplicatedDesign replicated_design_of(const std::vector<RunRecord>& runs) {
  std::map<std::vector<double>, std::size_t> index;
  std::vector<Eigen::VectorXd> points;
  std::vector<int> counts;
  for (const auto& r : runs) {
    std::vector<double> key(r.x.data(), r.x.data() + r.x.size());
    auto [it, inserted] = index.emplace(std::move(key), points.size());
    if (inserted) {
      points.push_back(r.x);
      counts.push_back(0);
    }
    ++counts[it->second];
  }
  design::ReplicatedDesign out;
  const Eigen::Index p = points.empty() ? 0 : points.front().size();
  out.points.resize(static_cast<Eigen::Index>(points.size()), p);
  for (std::size_t i = 0; i < points.size(); ++i) out.points.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  out.replicates = std::move(counts);
  return out;
}

hetgp::TrainingSummary quantitative_summary(const std::vector<RunRecord>& runs) {
  std::vector<const RunRecord*> kept;
  for (const auto& r : runs) {
    if (r.output) kept.push_back(&r);
  }
  if (kept.empty()) throw ConfigError("no run produced an output");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(kept.size()), kept.front()->x.size());
  Eigen::VectorXd y(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = kept[i]->x.transpose();
    y(static_cast<Eigen::Index>(i)) = *kept[i]->output;
  }
  return hetgp::summarize_replicates(X, y);
}

classify::LabeledDesign existence_labels(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw ConfigError("no runs to label");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(runs.size()), runs.front().x.size());
  std::vector<int> labels;
  labels.reserve(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = runs[i].x.transpose();
    labels.push_back(runs[i].output ? 1 : -1);
  }
  return classify::collapse_replicate_labels(X, labels);
}

}  // namespace abmuq
