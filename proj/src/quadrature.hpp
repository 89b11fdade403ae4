#pragma once

#include <utility>
#include <vector>

namespace wb::quad {

/// Gauss-Legendre nodes and weights on [a, b]; n in {10, 20, 30, 40, 50, 60, 80, 100}
/// (other n round up to the next supported size).
std::vector<std::pair<double, double>> gauss_legendre(int n, double a, double b);

}  // namespace wb::quad
