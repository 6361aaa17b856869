// Decomposition of an unstructured transition matrix Phi into a Kronecker
// part kron(B, A) plus a sparse part S: rearrange Phi so the Kronecker part
// becomes rank one, split low-rank + sparse by alternating directions
// (SVT / soft-threshold / multiplier update), and read (A, B) off the top
// singular triplet.
#pragma once

#include <sigmar/core.hpp>
#include <sigmar/model.hpp>

namespace sigmar {

struct AdmmConfig {
  double lambda = 0.0;  // <= 0: use the default 1/sqrt(kn)
  double mu = 0.0;      // <= 0: use the default k^2 n^2 / (4 ||vec(PhiTilde)||_1)
  double tol = 1e-7;    // relative primal residual
  int max_iter = 1000;
};

struct AdmmDiagnostics {
  double primal_residual = 0.0;  // ||PhiTilde - L - Stilde||_F / max(1, ||PhiTilde||_F)
  int iterations = 0;
  bool converged = false;
  double lambda = 0.0, mu = 0.0;  // values actually used
};

struct ProjectionResult {
  Mat L;        // n^2 x k^2 low-rank part of the rearranged Phi
  Mat Stilde;   // n^2 x k^2 sparse part
  Mat A;        // k x k, ||A||_F = 1
  Mat B;        // n x n
  Mat S;        // kn x kn, rearrange_inv of Stilde
  double primal_residual = 0.0;
  double residual = 0.0;  // ||Phi - kron(B,A) - S||_F
  int iterations = 0;
};

// Alternating directions on min ||L||_* + lambda ||vec(Stilde)||_1 subject to
// PhiTilde = L + Stilde: from Stilde = Y = 0 iterate
//   L      <- SVT_{1/mu}(PhiTilde - Stilde + Y/mu)
//   Stilde <- shrink_{lambda/mu}(PhiTilde - L + Y/mu)
//   Y      <- Y + mu (PhiTilde - L - Stilde)
inline std::pair<Mat, Mat> admm_lowrank_sparse(const Mat& PhiTilde, const AdmmConfig& cfg,
                                               AdmmDiagnostics* diag = nullptr) {
  const double l1 = vec(PhiTilde).cwiseAbs().sum();
  const double lambda = cfg.lambda > 0 ? cfg.lambda : 1.0 / std::sqrt(std::sqrt(
                            static_cast<double>(PhiTilde.rows() * PhiTilde.cols())));
  const double mu = cfg.mu > 0
                        ? cfg.mu
                        : static_cast<double>(PhiTilde.rows() * PhiTilde.cols()) /
                              (4.0 * std::max(l1, 1e-300));
  const double scale = std::max(1.0, PhiTilde.norm());

  Mat L = Mat::Zero(PhiTilde.rows(), PhiTilde.cols());
  Mat St = L, Y = L;
  AdmmDiagnostics d;
  d.lambda = lambda;
  d.mu = mu;
  Mat Lprev = L, Stprev = St;
  for (d.iterations = 0; d.iterations < cfg.max_iter;) {
    L = svt(PhiTilde - St + Y / mu, 1.0 / mu);
    St = soft_threshold(PhiTilde - L + Y / mu, lambda / mu);
    Y += mu * (PhiTilde - L - St);
    ++d.iterations;
    d.primal_residual = (PhiTilde - L - St).norm() / scale;
    double change = ((L - Lprev).norm() + (St - Stprev).norm()) / scale;
    // Primary criterion: primal feasibility.  The relative-change criterion
    // is secondary and only trusted once the residual is already small:
    // early iterates can be transiently stationary while the multiplier is
    // still adjusting.
    if (d.primal_residual <= cfg.tol ||
        (d.iterations >= 10 && change <= cfg.tol &&
         d.primal_residual <= std::sqrt(cfg.tol))) {
      d.converged = true;
      break;
    }
    Lprev = L;
    Stprev = St;
  }
  if (diag) *diag = d;
  return {L, St};
}

// vec(A) = top right singular vector (unit norm, so ||A||_F = 1);
// vec(B) = top singular value times the top left singular vector.
// Signs resolved by the (A, B) normalization gauge.
inline std::pair<Mat, Mat> extract_ab(const Mat& L, Eigen::Index k, Eigen::Index n) {
  if (L.rows() != n * n || L.cols() != k * k)
    throw std::invalid_argument("extract_ab: L is not n^2 x k^2");
  if (L.norm() == 0.0) throw std::invalid_argument("extract_ab: L is zero");
  Eigen::JacobiSVD<Mat> svd(L, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Mat A = unvec(svd.matrixV().col(0), k, k);
  Mat B = unvec(svd.singularValues()[0] * svd.matrixU().col(0), n, n);
  return normalize_ab(A, B);
}

inline ProjectionResult project_phi(const Mat& Phi, Eigen::Index k, Eigen::Index n,
                                    const AdmmConfig& cfg = {}) {
  if (Phi.rows() != k * n || Phi.cols() != k * n)
    throw std::invalid_argument("project_phi: Phi is not kn x kn");
  const BlockShape shape{n, n, k, k};
  Mat PhiTilde = rearrange(Phi, shape);
  ProjectionResult res;
  if (PhiTilde.norm() == 0.0) {
    res.L = Mat::Zero(n * n, k * k);
    res.Stilde = res.L;
    res.A = Mat::Zero(k, k);
    res.B = Mat::Zero(n, n);
    res.S = Mat::Zero(k * n, k * n);
    return res;
  }
  AdmmDiagnostics diag;
  auto [L, St] = admm_lowrank_sparse(PhiTilde, cfg, &diag);
  res.L = L;
  res.Stilde = St;
  res.primal_residual = diag.primal_residual;
  res.iterations = diag.iterations;
  std::tie(res.A, res.B) = extract_ab(L, k, n);
  res.S = rearrange_inv(St, shape);
  res.residual = (Phi - kron(res.B, res.A) - res.S).norm();
  return res;
}

}  // namespace sigmar
