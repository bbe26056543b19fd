// Randomized truncated SVD: Gaussian range finder with normalized power
// iterations (Halko, Martinsson & Tropp, Algorithms 4.3/4.4), then an exact
// SVD of the small projected matrix.

#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "topicgraph/common.hpp"
#include "topicgraph/features.hpp"

namespace topicgraph {
namespace {

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

// Leading-k left singular directions of Q Q^T A, from the Gram matrix of Z = A^T Q.
Eigen::MatrixXd ritz_directions(const Eigen::MatrixXd& q, const Eigen::MatrixXd& z, Eigen::Index k) {
  // Eigenvalues come out ascending; only the spanned subspace matters here.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(z.transpose() * z);
  return q * eig.eigenvectors().rightCols(k);
}

double subspace_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd residual = b - a * (a.transpose() * b);
  return residual.colwise().norm().maxCoeff();
}

template <typename Matrix>
TruncatedSvd randomized_svd_impl(const Matrix& a, std::size_t k_requested, std::uint64_t seed,
                                 const RandomizedSvdOptions& options) {
  const Eigen::Index n = a.rows();
  const Eigen::Index d = a.cols();
  const auto k = static_cast<Eigen::Index>(k_requested);
  if (k <= 0 || k > std::min(n, d)) {
    throw InputError("randomized_svd: k must lie in [1, min(rows, cols)]");
  }
  const Eigen::Index l = std::min<Eigen::Index>(k + static_cast<Eigen::Index>(options.oversampling), std::min(n, d));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd omega(d, l);
  for (Eigen::Index c = 0; c < l; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) omega(r, c) = gauss(rng);
  }

  Eigen::MatrixXd q = orthonormal_basis(a * omega);
  Eigen::MatrixXd z;
  Eigen::MatrixXd previous;
  std::size_t iterations = 0;
  while (true) {
    z = a.transpose() * q;
    if (iterations >= options.min_power_iterations) {
      Eigen::MatrixXd current = ritz_directions(q, z, k);
      if (previous.size() > 0 && subspace_distance(previous, current) < options.subspace_tolerance) break;
      previous = std::move(current);
      if (iterations >= options.max_power_iterations) break;
    }
    q = orthonormal_basis(a * orthonormal_basis(z));
    ++iterations;
  }

  // B = Q^T A = Z^T.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(z.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  TruncatedSvd out;
  out.u = q * svd.matrixU().leftCols(k);
  out.singular_values = svd.singularValues().head(k);
  out.v = svd.matrixV().leftCols(k);
  out.power_iterations = iterations;
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    out.u.col(c).cwiseAbs().maxCoeff(&arg);
    if (out.u(arg, c) < 0.0) {
      out.u.col(c) *= -1.0;
      out.v.col(c) *= -1.0;
    }
  }
  return out;
}

}  // namespace

TruncatedSvd randomized_svd(const Eigen::MatrixXd& a, std::size_t k, std::uint64_t seed,
                            const RandomizedSvdOptions& options) {
  return randomized_svd_impl(a, k, seed, options);
}

TruncatedSvd randomized_svd(const SparseRows& a, std::size_t k, std::uint64_t seed,
                            const RandomizedSvdOptions& options) {
  return randomized_svd_impl(a, k, seed, options);
}

}  // namespace topicgraph
