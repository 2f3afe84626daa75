#include "gemr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gemr {
namespace {

void check_step(double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: step must be positive");
}

}  // namespace

std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                               std::span<const double> x, double h) {
  check_step(h);
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = f(point);
    point[i] = saved - h;
    const double down = f(point);
    point[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

std::vector<std::vector<double>> finite_difference_gradient(const std::function<double()>& f,
                                                            std::span<Tensor<double>* const> params,
                                                            double h) {
  check_step(h);
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (Tensor<double>* p : params) {
    std::vector<double> g(p->numel());
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const double saved = (*p)[i];
      (*p)[i] = saved + h;
      const double up = f();
      (*p)[i] = saved - h;
      const double down = f();
      (*p)[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace gemr
