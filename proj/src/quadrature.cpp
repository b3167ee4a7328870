#include "sadl/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <string>
#include <map>
#include <mutex>

#include <Eigen/Dense>

#include "sadl/error.hpp"

namespace sadl {

namespace {

template <unsigned P>
QuadRule make_gl() {
  using G = boost::math::quadrature::gauss<double, P>;
  const auto& ab = G::abscissa();
  const auto& wt = G::weights();
  QuadRule r;
  // boost stores the nonnegative half
  for (std::size_t i = 0; i < ab.size(); ++i) {
    const double a = ab[i];
    const double w = wt[i];
    if (a == 0.0) {
      r.x.push_back(0.5);
      r.w.push_back(0.5 * w);
    } else {
      r.x.push_back(0.5 - 0.5 * a);
      r.w.push_back(0.5 * w);
      r.x.push_back(0.5 + 0.5 * a);
      r.w.push_back(0.5 * w);
    }
  }
  // sort by node
  std::vector<std::size_t> idx(r.x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return r.x[a] < r.x[b]; });
  QuadRule s;
  for (auto i : idx) {
    s.x.push_back(r.x[i]);
    s.w.push_back(r.w[i]);
  }
  return s;
}

}  // namespace

const QuadRule& gauss_legendre_unit(int order) {
  static const QuadRule r4 = make_gl<4>();
  static const QuadRule r7 = make_gl<7>();
  static const QuadRule r8 = make_gl<8>();
  static const QuadRule r16 = make_gl<16>();
  static const QuadRule r20 = make_gl<20>();
  static const QuadRule r32 = make_gl<32>();
  static const QuadRule r64 = make_gl<64>();
  switch (order) {
    case 4: return r4;
    case 7: return r7;
    case 8: return r8;
    case 16: return r16;
    case 20: return r20;
    case 32: return r32;
    case 64: return r64;
    default: throw ValidationError("gauss_legendre_unit: unsupported order " + std::to_string(order));
  }
}

QuadRule gauss_hermite_normal(int order) {
  if (order < 1 || order > 200) throw ValidationError("gauss_hermite_normal: bad order");
  // Jacobi matrix of the probabilists' Hermite polynomials
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) {
    J(i, i - 1) = std::sqrt(static_cast<double>(i));
    J(i - 1, i) = J(i, i - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success) throw EigenSolverError("gauss_hermite_normal: eigensolver failed");
  QuadRule r;
  for (int i = 0; i < order; ++i) {
    r.x.push_back(es.eigenvalues()(i));
    const double v = es.eigenvectors()(0, i);
    r.w.push_back(v * v);
  }
  return r;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double rel_tol,
                          double* err_out) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, rel_tol, &err);
  if (err_out) *err_out = err;
  return v;
}

}  // namespace sadl
