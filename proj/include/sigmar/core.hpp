// Dense linear-algebra kernel: vectorization, Kronecker products, block
// rearrangement operators, proximal operators (soft-threshold / SVT),
// spectral quantities, and the structured log-determinant of I - W (x) C.
//
// Storage is Eigen's default column-major, so vec() is column stacking and
// costs nothing but a copy.  All functions here are pure.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <complex>
#include <stdexcept>
#include <string>

namespace sigmar {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

// Outer block-grid dimensions (p1 x p2) and inner block dimensions (d1 x d2)
// of the rearrangement operators.
struct BlockShape {
  Eigen::Index p1, p2, d1, d2;
};

inline Vec vec(const Mat& M) {
  return Eigen::Map<const Vec>(M.data(), M.size());
}

inline Mat unvec(const Vec& v, Eigen::Index k, Eigen::Index n) {
  if (v.size() != k * n)
    throw std::invalid_argument("unvec: length " + std::to_string(v.size()) +
                                " != " + std::to_string(k) + "x" + std::to_string(n));
  return Eigen::Map<const Mat>(v.data(), k, n);
}

inline Mat kron(const Mat& P, const Mat& Q) {
  Mat R(P.rows() * Q.rows(), P.cols() * Q.cols());
  for (Eigen::Index j = 0; j < P.cols(); ++j)
    for (Eigen::Index i = 0; i < P.rows(); ++i)
      R.block(i * Q.rows(), j * Q.cols(), Q.rows(), Q.cols()) = P(i, j) * Q;
  return R;
}

// R_{p1,p2,d1,d2}: maps a (p1*d1) x (p2*d2) matrix, viewed as a p1 x p2 grid
// of d1 x d2 blocks, to the (p1*p2) x (d1*d2) matrix whose row (j + k*p1) is
// vec(block_{j,k})^T.  Under this map a Kronecker product becomes rank one:
// R(kron(W, C)) = vec(W) vec(C)^T.
inline Mat rearrange(const Mat& M, const BlockShape& s) {
  if (M.rows() != s.p1 * s.d1 || M.cols() != s.p2 * s.d2)
    throw std::invalid_argument("rearrange: matrix is " + std::to_string(M.rows()) + "x" +
                                std::to_string(M.cols()) + ", shape wants " +
                                std::to_string(s.p1 * s.d1) + "x" + std::to_string(s.p2 * s.d2));
  Mat N(s.p1 * s.p2, s.d1 * s.d2);
  for (Eigen::Index k = 0; k < s.p2; ++k)
    for (Eigen::Index j = 0; j < s.p1; ++j)
      N.row(j + k * s.p1) = vec(M.block(j * s.d1, k * s.d2, s.d1, s.d2)).transpose();
  return N;
}

inline Mat rearrange_inv(const Mat& N, const BlockShape& s) {
  if (N.rows() != s.p1 * s.p2 || N.cols() != s.d1 * s.d2)
    throw std::invalid_argument("rearrange_inv: matrix is " + std::to_string(N.rows()) + "x" +
                                std::to_string(N.cols()) + ", shape wants " +
                                std::to_string(s.p1 * s.p2) + "x" + std::to_string(s.d1 * s.d2));
  Mat M(s.p1 * s.d1, s.p2 * s.d2);
  for (Eigen::Index k = 0; k < s.p2; ++k)
    for (Eigen::Index j = 0; j < s.p1; ++j)
      M.block(j * s.d1, k * s.d2, s.d1, s.d2) =
          unvec(N.row(j + k * s.p1).transpose(), s.d1, s.d2);
  return M;
}

// Companion operator R2, the inverse of M |-> rearrange(M^T)^T with swapped
// shape parameters.  Satisfies rearrange2(rearrange(kron(W,C))^T)^T = kron(W,C)
// and rearrange(M^T)^T = rearrange2^{-1}(M); maps kron(E,E)-structured input
// to vec(E) vec(E)^T.
inline Mat rearrange2(const Mat& M, const BlockShape& s) {
  if (M.rows() != s.d1 * s.d2 || M.cols() != s.p1 * s.p2)
    throw std::invalid_argument("rearrange2: matrix is " + std::to_string(M.rows()) + "x" +
                                std::to_string(M.cols()) + ", shape wants " +
                                std::to_string(s.d1 * s.d2) + "x" + std::to_string(s.p1 * s.p2));
  const BlockShape sw{s.p2, s.p1, s.d2, s.d1};
  return rearrange_inv(M.transpose(), sw).transpose();
}

inline double soft_threshold(double x, double tau) {
  double a = std::abs(x) - tau;
  return a > 0 ? (x > 0 ? a : -a) : 0.0;
}

inline Mat soft_threshold(const Mat& M, double tau) {
  return M.unaryExpr([tau](double x) { return soft_threshold(x, tau); });
}

// Singular value thresholding: SVD, shrink singular values by tau, rebuild.
// Proximal operator of the nuclear norm.
inline Mat svt(const Mat& M, double tau) {
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vec sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i) sv[i] = std::max(sv[i] - tau, 0.0);
  return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

inline CVec eigenvalues(const Mat& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("eigenvalues: matrix not square");
  Eigen::EigenSolver<Mat> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigenvalues: solver failed");
  return es.eigenvalues();
}

inline double spectral_radius(const Mat& M) {
  return eigenvalues(M).cwiseAbs().maxCoeff();
}

// ln det(I - W (x) C) = sum_{i,j} ln(1 - lambda_i(W) mu_j(C)), accumulated in
// complex arithmetic.  The eigenvalues of W are precomputed by the caller and
// stay fixed across likelihood evaluations.  Throws std::domain_error when the
// determinant is zero or negative (parameter outside the admissible set); the
// check is the imaginary residual of the log-sum modulo 2*pi, so conjugate
// pairs and even counts of negative real factors pass, odd counts fail.
inline double logdet_I_minus_kron(const CVec& eigW, const Mat& C) {
  const CVec eigC = eigenvalues(C);
  std::complex<double> s(0.0, 0.0);
  for (Eigen::Index i = 0; i < eigW.size(); ++i)
    for (Eigen::Index j = 0; j < eigC.size(); ++j) {
      std::complex<double> f = 1.0 - eigW[i] * eigC[j];
      if (std::abs(f) < 1e-12) throw std::domain_error("logdet_I_minus_kron: singular factor");
      s += std::log(f);
    }
  const double resid = std::remainder(s.imag(), 2.0 * M_PI);
  if (std::abs(resid) > 1e-8 * std::max(1.0, std::abs(s.real())))
    throw std::domain_error("logdet_I_minus_kron: determinant not positive");
  return s.real();
}

}  // namespace sigmar
