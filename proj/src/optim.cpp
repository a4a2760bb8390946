#include "optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace nlmemboot::detail {

Eigen::VectorXd nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& start, double initial_step, int max_evals,
    double tol) {
  const int n = static_cast<int>(start.size());
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;

  std::vector<Eigen::VectorXd> verts;
  std::vector<double> vals;
  verts.push_back(start);
  vals.push_back(objective(start));
  int evals = 1;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v = start;
    const double step = initial_step * std::max(1.0, std::abs(start(i)));
    v(i) += step;
    verts.push_back(v);
    vals.push_back(objective(v));
    ++evals;
  }

  std::vector<int> order(verts.size());
  auto sort_order = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return vals[a] < vals[b]; });
  };

  while (evals < max_evals) {
    sort_order();
    const int best = order.front(), worst = order.back();
    const int second_worst = order[order.size() - 2];
    if (std::isfinite(vals[best]) && std::isfinite(vals[worst]) &&
        vals[worst] - vals[best] <=
            tol * (std::abs(vals[best]) + std::abs(vals[worst]) + 1e-30))
      break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int idx : order)
      if (idx != worst) centroid += verts[idx];
    centroid /= static_cast<double>(verts.size() - 1);

    const Eigen::VectorXd reflected = centroid + alpha * (centroid - verts[worst]);
    const double f_ref = objective(reflected);
    ++evals;

    if (f_ref < vals[order[0]]) {
      const Eigen::VectorXd expanded = centroid + gamma * (reflected - centroid);
      const double f_exp = objective(expanded);
      ++evals;
      if (f_exp < f_ref) {
        verts[worst] = expanded;
        vals[worst] = f_exp;
      } else {
        verts[worst] = reflected;
        vals[worst] = f_ref;
      }
    } else if (f_ref < vals[second_worst]) {
      verts[worst] = reflected;
      vals[worst] = f_ref;
    } else {
      const Eigen::VectorXd contracted = centroid + rho * (verts[worst] - centroid);
      const double f_con = objective(contracted);
      ++evals;
      if (f_con < vals[worst]) {
        verts[worst] = contracted;
        vals[worst] = f_con;
      } else {
        for (std::size_t i = 1; i < order.size(); ++i) {
          const int idx = order[i];
          verts[idx] = verts[order[0]] + shrink * (verts[idx] - verts[order[0]]);
          vals[idx] = objective(verts[idx]);
          ++evals;
        }
      }
    }
  }

  sort_order();
  return verts[order.front()];
}

}  // namespace nlmemboot::detail
