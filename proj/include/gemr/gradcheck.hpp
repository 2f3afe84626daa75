#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gemr/tensor.hpp"

namespace gemr {

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate,
/// evaluated in double precision. Throws std::invalid_argument if h <= 0.
std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                               std::span<const double> x, double h);

/// Same, but perturbs the entries of `params` in place (restoring them) and
/// returns one gradient buffer per tensor.
std::vector<std::vector<double>> finite_difference_gradient(const std::function<double()>& f,
                                                            std::span<Tensor<double>* const> params,
                                                            double h);

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

}  // namespace gemr
