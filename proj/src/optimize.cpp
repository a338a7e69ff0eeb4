#include "abmuq/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace abmuq {

OptimResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Eigen::VectorXd& start, const Box& box,
                        const NelderMeadOptions& options) {
  const Eigen::Index d = start.size();
  const auto npts = static_cast<std::size_t>(d + 1);
  int evaluations = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> simplex(npts);
  std::vector<double> values(npts);
  simplex[0] = box.clamp(start);
  values[0] = eval(simplex[0]);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd v = simplex[0];
    const double width = box.upper(i) - box.lower(i);
    double step = options.initial_step * width;
    if (v(i) + step > box.upper(i)) step = -step;
    v(i) += step;
    simplex[static_cast<std::size_t>(i + 1)] = box.clamp(v);
    values[static_cast<std::size_t>(i + 1)] = eval(simplex[static_cast<std::size_t>(i + 1)]);
  }

  std::vector<std::size_t> order(npts);
  while (evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[npts - 2];

    double spread = 0.0;
    for (std::size_t i = 0; i < npts; ++i) {
      spread = std::max(spread, (simplex[i] - simplex[best]).cwiseAbs().maxCoeff());
    }
    if (std::isfinite(values[worst]) &&
        std::abs(values[worst] - values[best]) <= options.f_tolerance * (1.0 + std::abs(values[best])) &&
        spread <= options.x_tolerance) {
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < npts; ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd reflected = box.clamp(centroid + (centroid - simplex[worst]));
    const double f_reflected = eval(reflected);
    if (f_reflected < values[best]) {
      const Eigen::VectorXd expanded = box.clamp(centroid + 2.0 * (centroid - simplex[worst]));
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[worst];
    const Eigen::VectorXd contracted =
        outside ? box.clamp(centroid + 0.5 * (reflected - centroid))
                : box.clamp(centroid + 0.5 * (simplex[worst] - centroid));
    const double f_contracted = eval(contracted);
    if (f_contracted < (outside ? f_reflected : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = f_contracted;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t i = 0; i < npts; ++i) {
      if (i == best) continue;
      simplex[i] = box.clamp(simplex[best] + 0.5 * (simplex[i] - simplex[best]));
      values[i] = eval(simplex[i]);
    }
  }

  const auto it = std::min_element(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(std::distance(values.begin(), it));
  return {simplex[idx], values[idx], evaluations};
}

}  // namespace abmuq
