#include "quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

namespace wb::quad {

namespace {

template <unsigned N>
std::vector<std::pair<double, double>> rule(double a, double b) {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  const double m = 0.5 * (a + b), h = 0.5 * (b - a);
  std::vector<std::pair<double, double>> out;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      out.emplace_back(m, h * w[i]);
    } else {
      out.emplace_back(m - h * x[i], h * w[i]);
      out.emplace_back(m + h * x[i], h * w[i]);
    }
  }
  return out;
}

}  // namespace

std::vector<std::pair<double, double>> gauss_legendre(int n, double a, double b) {
  if (n <= 10) return rule<10>(a, b);
  if (n <= 20) return rule<20>(a, b);
  if (n <= 30) return rule<30>(a, b);
  if (n <= 40) return rule<40>(a, b);
  if (n <= 50) return rule<50>(a, b);
  if (n <= 60) return rule<60>(a, b);
  if (n <= 80) return rule<80>(a, b);
  return rule<100>(a, b);
}

}  // namespace wb::quad
