#include "sadl/model.hpp"

#include <cmath>

#include "sadl/error.hpp"

namespace sadl {

Mat sym_sqrt(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  if (es.info() != Eigen::Success) throw EigenSolverError("sym_sqrt: eigendecomposition failed");
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

ProblemModel linear_gaussian(const Mat& A_mat, const Vec& root, const Mat& Sigma) {
  const int d = static_cast<int>(A_mat.rows());
  if (d < 1 || d > kMaxDim) throw ValidationError("linear_gaussian: dimension out of range");
  if (A_mat.cols() != d || root.size() != d || Sigma.rows() != d || Sigma.cols() != d)
    throw ValidationError("linear_gaussian: inconsistent dimensions");
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ValidationError("linear_gaussian: noise covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(Sigma);
  if (es.info() != Eigen::Success) throw EigenSolverError("linear_gaussian: eigensolver failed");
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw ValidationError("linear_gaussian: noise covariance must be positive semidefinite");
  const Mat sq = sym_sqrt(Sigma);

  ProblemModel m;
  m.name = "linear_gaussian";
  m.dim = d;
  m.root = root;
  m.mean_field = [A_mat, root](const Vec& th) -> Vec { return A_mat * (th - root); };
  m.jacobian = [A_mat](const Vec&) -> Mat { return A_mat; };
  m.noise_cov = [Sigma](const Vec&) -> Mat { return Sigma; };
  m.innovation = [sq](const Vec&, const Vec& eta) -> Vec { return sq * eta; };
  m.state_independent_noise = true;
  return m;
}

ProblemModel linear_gaussian_1d(double a, double root, double sigma2) {
  return linear_gaussian(mat1(a), vec1(root), mat1(sigma2));
}

ProblemModel sine_perturbed() {
  ProblemModel m;
  m.name = "sine_perturbed";
  m.dim = 1;
  m.root = vec1(0.0);
  m.mean_field = [](const Vec& th) { return vec1(th(0) + 0.5 * std::sin(th(0))); };
  m.jacobian = [](const Vec& th) { return mat1(1.0 + 0.5 * std::cos(th(0))); };
  m.noise_cov = [](const Vec& th) {
    const double s = std::sin(th(0));
    return mat1(1.0 + 0.2 * s * s);
  };
  m.innovation = [](const Vec& th, const Vec& eta) {
    const double s = std::sin(th(0));
    return vec1(std::sqrt(1.0 + 0.2 * s * s) * eta(0));
  };
  return m;
}

ProblemModel drift_free_1d(double rate) {
  if (!(rate > 0.0)) throw ValidationError("drift_free_1d: rate must be positive");
  ProblemModel m;
  m.name = "drift_free";
  m.dim = 1;
  m.root = vec1(0.0);
  m.mean_field = [](const Vec&) { return vec1(0.0); };
  m.jacobian = [](const Vec&) { return mat1(0.0); };
  m.noise_cov = [rate](const Vec&) { return mat1(rate); };
  const double sd = std::sqrt(rate);
  m.innovation = [sd](const Vec&, const Vec& eta) { return vec1(sd * eta(0)); };
  m.state_independent_noise = true;
  return m;
}

Vec draw_eta(int dim, RandomSource& rng) {
  Vec eta(dim);
  for (int i = 0; i < dim; ++i) eta(i) = rng.normal();
  return eta;
}

Vec sample_H(const ProblemModel& m, const Vec& theta, RandomSource& rng) {
  if (!theta.allFinite()) throw ValidationError("sample_H: theta not finite");
  const Vec eta = draw_eta(m.dim, rng);
  return m.h(theta) + m.innovation(theta, eta);
}

bool check_lyapunov(const ProblemModel& m, const StepSchedule& s) {
  const Mat D = s.bar_alpha() * Mat::Identity(m.dim, m.dim) - m.Dh(m.root);
  Eigen::EigenSolver<Mat> es(D, false);
  if (es.info() != Eigen::Success) throw EigenSolverError("check_lyapunov: eigensolver did not converge");
  return (es.eigenvalues().real().array() < 0.0).all();
}

bool check_inward(const ProblemModel& m, double delta, const std::vector<Vec>& samples) {
  if (!(delta > 0.0)) throw ValidationError("check_inward: delta must be positive");
  for (const Vec& th : samples) {
    if (!th.allFinite()) throw ValidationError("check_inward: sample not finite");
    const Vec d = th - m.root;
    if (d.dot(m.h(th)) < delta * d.squaredNorm()) return false;
  }
  return true;
}

bool inward_rate_compatible(const StepSchedule& s, double delta) {
  if (s.beta() < 1.0) return true;
  return delta > 1.0 / (2.0 * s.A());
}

std::vector<ModelCheckRow> validate_model(const ProblemModel& m, const std::vector<Vec>& thetas,
                                          std::size_t n_draws, std::uint64_t seed) {
  std::vector<ModelCheckRow> out;
  const int d = m.dim;
  {
    const double r = m.h(m.root).norm();
    out.push_back({"root_residual", m.root, r, 1e-12, r <= 1e-12});
  }
  for (std::size_t ti = 0; ti < thetas.size(); ++ti) {
    const Vec& th = thetas[ti];
    // Jacobian by central differences
    const double hstep = 1e-5;
    Mat fd(d, d);
    for (int j = 0; j < d; ++j) {
      Vec p = th, q = th;
      p(j) += hstep;
      q(j) -= hstep;
      fd.col(j) = (m.h(p) - m.h(q)) / (2 * hstep);
    }
    const Mat J = m.Dh(th);
    const double rel = (fd - J).norm() / std::max(1.0, J.norm());
    out.push_back({"jacobian_fd", th, rel, 1e-6, rel <= 1e-6});

    const Mat R = m.R(th);
    const double asym = (R - R.transpose()).cwiseAbs().maxCoeff();
    out.push_back({"cov_symmetric", th, asym, 1e-12, asym <= 1e-12});
    Eigen::SelfAdjointEigenSolver<Mat> es(R);
    const double lmin = es.eigenvalues().minCoeff();
    out.push_back({"cov_min_eigenvalue", th, lmin, 0.0, lmin > 0.0});

    RandomSource rng(seed, ti, StreamTag::model_check);
    Vec mean = Vec::Zero(d);
    Mat second = Mat::Zero(d, d);
    const Vec hth = m.h(th);
    for (std::size_t n = 0; n < n_draws; ++n) {
      const Vec x = sample_H(m, th, rng) - hth;
      mean += x;
      second += x * x.transpose();
    }
    const double nd = static_cast<double>(n_draws);
    mean /= nd;
    const Mat cov = second / nd - mean * mean.transpose();
    const double mean_err = mean.norm();
    const double mean_band = 5.0 * std::sqrt(R.trace() / nd);
    out.push_back({"sample_mean", th, mean_err, mean_band, mean_err <= mean_band});
    double worst = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double se = std::sqrt((R(i, i) * R(j, j) + R(i, j) * R(i, j)) / nd);
        worst = std::max(worst, std::abs(cov(i, j) - R(i, j)) / se);
      }
    out.push_back({"sample_cov_se", th, worst, 5.0, worst <= 5.0});
  }
  return out;
}

}  // namespace sadl
