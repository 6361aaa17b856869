// Shared helpers for the test binaries: reproducible random matrices and
// quick construction of admissible parameter sets (independent of the
// library's own generators, so generator bugs can't mask model bugs).
#pragma once

#include <sigmar/core.hpp>
#include <sigmar/model.hpp>

#include <random>

namespace testutil {

inline sigmar::Mat randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& g) {
  std::normal_distribution<double> d;
  sigmar::Mat M(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) M(i, j) = d(g);
  return M;
}

// Row-normalized nonnegative weight matrix with zero diagonal.
inline sigmar::WeightMatrix random_weight(Eigen::Index n, std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  sigmar::Mat W(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) W(i, j) = i == j ? 0.0 : u(g);
  for (Eigen::Index i = 0; i < n; ++i) W.row(i) /= W.row(i).sum();
  return sigmar::WeightMatrix(W);
}

// Random parameters scaled to the given spectral targets, S = 0.
inline sigmar::SigmarParams random_params(Eigen::Index k, Eigen::Index n,
                                          std::mt19937_64& g, double rho_ar = 0.5,
                                          double rho_sp = 0.5) {
  sigmar::SigmarParams p;
  p.A = randn(k, k, g);
  p.B = randn(n, n, g);
  p.C = randn(k, k, g);
  double s = std::sqrt(rho_ar / (sigmar::spectral_radius(p.A) * sigmar::spectral_radius(p.B)));
  p.A *= s;
  p.B *= s;
  p.C *= rho_sp / sigmar::spectral_radius(p.C);
  p.S = sigmar::Mat::Zero(k * n, k * n);
  p.sigma2 = 1.0;
  return p;
}

}  // namespace testutil
