#pragma once

#include <functional>
#include <vector>

namespace sadl {

struct QuadRule {
  std::vector<double> x;
  std::vector<double> w;
};

//! Gauss-Legendre rule mapped to [0, 1]. Supported orders: 4, 7, 8, 16, 20, 32, 64.
const QuadRule& gauss_legendre_unit(int order);
//! Gauss-Hermite rule for E[f(Z)], Z standard normal (Golub-Welsch).
QuadRule gauss_hermite_normal(int order);
//! Adaptive Gauss-Kronrod on [a, b]; tolerance relative to the L1 norm of f.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-12, double* err_out = nullptr);

}  // namespace sadl
