// Comparator estimators, each reduced to a kn x kn one-step transition:
// per-series AR(1) (iar), per-country VAR(1) (ivar), per-country VARX with
// network-weighted contemporaneous star regressors (ivarx), the unrestricted
// stacked VAR (svar), and the Kronecker autoregression fitted by alternating
// least squares (mar).
#pragma once

#include <sigmar/amabc.hpp>
#include <sigmar/core.hpp>
#include <sigmar/model.hpp>
#include <sigmar/simulate.hpp>

#include <string>
#include <vector>

namespace sigmar {

enum class ForecasterKind { iar, ivar, ivarx, svar, mar };

inline const char* kind_name(ForecasterKind k) {
  switch (k) {
    case ForecasterKind::iar: return "iar";
    case ForecasterKind::ivar: return "ivar";
    case ForecasterKind::ivarx: return "ivarx";
    case ForecasterKind::svar: return "svar";
    case ForecasterKind::mar: return "mar";
  }
  return "?";
}

struct LinearForecaster {
  ForecasterKind kind = ForecasterKind::svar;
  Eigen::Index k = 0, n = 0;
  Mat transition;  // kn x kn reduced form used for forecasting

  // kind-specific coefficient blocks
  std::vector<Mat> phi_blocks;  // ivar / ivarx: per-country k x k lag blocks
  std::vector<Mat> psi_blocks;  // ivarx: per-country k x k star loadings
  Mat A, B;                     // mar factors (normalized)

  bool warning = false;  // iar zero-variance series or svar ridge fallback

  Mat predict(const Mat& X) const {
    if (X.rows() != k || X.cols() != n)
      throw std::invalid_argument("LinearForecaster::predict: frame is not k x n");
    return unvec(transition * vec(X), k, n);
  }
};

namespace detail {

inline std::string country_label(const PanelSeries& data, Eigen::Index j) {
  if (static_cast<Eigen::Index>(data.countries.size()) == data.n) return data.countries[j];
  return "country " + std::to_string(j);
}

}  // namespace detail

// Per-series AR(1): a diagonal transition. Zero-variance series get
// coefficient 0 and set the warning flag.
inline LinearForecaster fit_iar(const PanelSeries& data) {
  data.validate();
  if (data.T() < 3) throw std::invalid_argument("fit_iar: need T >= 3");
  const Eigen::Index k = data.k, n = data.n, kn = k * n;
  LinearForecaster f;
  f.kind = ForecasterKind::iar;
  f.k = k;
  f.n = n;
  f.transition = Mat::Zero(kn, kn);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < k; ++i) {
      double num = 0.0, den = 0.0;
      for (Eigen::Index t = 1; t < data.T(); ++t) {
        double prev = data.frames[t - 1](i, j);
        num += data.frames[t](i, j) * prev;
        den += prev * prev;
      }
      Eigen::Index r = j * k + i;
      if (den == 0.0)
        f.warning = true;  // coefficient stays 0
      else
        f.transition(r, r) = num / den;
    }
  return f;
}

// Per-country VAR(1): block-diagonal transition with k x k blocks.
inline LinearForecaster fit_ivar(const PanelSeries& data) {
  data.validate();
  const Eigen::Index k = data.k, n = data.n, kn = k * n;
  if (data.T() < k + 2) throw std::invalid_argument("fit_ivar: need T >= k + 2");
  LinearForecaster f;
  f.kind = ForecasterKind::ivar;
  f.k = k;
  f.n = n;
  f.transition = Mat::Zero(kn, kn);
  for (Eigen::Index j = 0; j < n; ++j) {
    Mat Gram = Mat::Zero(k, k), Cross = Mat::Zero(k, k);
    for (Eigen::Index t = 1; t < data.T(); ++t) {
      Vec prev = data.frames[t - 1].col(j);
      Gram += prev * prev.transpose();
      Cross += data.frames[t].col(j) * prev.transpose();
    }
    Eigen::FullPivLU<Mat> lu(Gram);
    if (!lu.isInvertible())
      throw std::runtime_error("fit_ivar: singular Gram for " +
                               detail::country_label(data, j));
    Mat Phi = lu.solve(Cross.transpose()).transpose();
    f.phi_blocks.push_back(Phi);
    f.transition.block(j * k, j * k, k, k) = Phi;
  }
  return f;
}

// Per-country VARX with the network-weighted star x*_{t,i} = (X_t W^T) e_i as
// an exogenous contemporaneous regressor; the joint forecaster solves the
// simultaneous system (I - diag(Psi)(W (x) I_k)) vec(X_t) = diag(Phi) vec(X_{t-1}).
inline LinearForecaster fit_ivarx(const PanelSeries& data, const WeightMatrix& w) {
  data.validate();
  const Eigen::Index k = data.k, n = data.n, kn = k * n;
  if (w.W.rows() != n) throw std::invalid_argument("fit_ivarx: W is not n x n");
  if (data.T() < 2 * k + 2) throw std::invalid_argument("fit_ivarx: need T >= 2k + 2");
  LinearForecaster f;
  f.kind = ForecasterKind::ivarx;
  f.k = k;
  f.n = n;
  Mat DPhi = Mat::Zero(kn, kn), DPsi = Mat::Zero(kn, kn);
  for (Eigen::Index j = 0; j < n; ++j) {
    Mat Gram = Mat::Zero(2 * k, 2 * k);
    Mat Cross = Mat::Zero(k, 2 * k);
    for (Eigen::Index t = 1; t < data.T(); ++t) {
      Vec z(2 * k);
      z.head(k) = data.frames[t - 1].col(j);
      z.tail(k) = (data.frames[t] * w.W.transpose()).col(j);  // star regressor
      Gram += z * z.transpose();
      Cross += data.frames[t].col(j) * z.transpose();
    }
    Eigen::FullPivLU<Mat> lu(Gram);
    if (!lu.isInvertible())
      throw std::runtime_error("fit_ivarx: singular joint Gram for " +
                               detail::country_label(data, j));
    Mat Coef = lu.solve(Cross.transpose()).transpose();  // k x 2k
    Mat Phi = Coef.leftCols(k), Psi = Coef.rightCols(k);
    f.phi_blocks.push_back(Phi);
    f.psi_blocks.push_back(Psi);
    DPhi.block(j * k, j * k, k, k) = Phi;
    DPsi.block(j * k, j * k, k, k) = Psi;
  }
  Mat G = Mat::Identity(kn, kn) - DPsi * kron(w.W, Mat::Identity(k, k));
  Eigen::FullPivLU<Mat> lu(G);
  if (!lu.isInvertible())
    throw std::runtime_error("fit_ivarx: simultaneous system is singular");
  f.transition = lu.solve(DPhi);
  return f;
}

// Unrestricted stacked VAR(1) on vec(X_t). When T - 1 <= kn the Gram matrix
// cannot have full rank; a small ridge (1e-4 trace(Gram)/kn) keeps the solve
// defined and the warning flag is set.
inline LinearForecaster fit_svar(const PanelSeries& data) {
  data.validate();
  const Eigen::Index kn = data.k * data.n;
  if (data.T() < 3) throw std::invalid_argument("fit_svar: need T >= 3");
  LinearForecaster f;
  f.kind = ForecasterKind::svar;
  f.k = data.k;
  f.n = data.n;
  Mat Gram = Mat::Zero(kn, kn), Cross = Mat::Zero(kn, kn);
  for (Eigen::Index t = 1; t < data.T(); ++t) {
    Vec prev = vec(data.frames[t - 1]);
    Gram += prev * prev.transpose();
    Cross += vec(data.frames[t]) * prev.transpose();
  }
  if (data.T() - 1 <= kn) {
    Gram += (1e-4 * Gram.trace() / static_cast<double>(kn)) * Mat::Identity(kn, kn);
    f.warning = true;
  }
  Eigen::FullPivLU<Mat> lu(Gram);
  if (!lu.isInvertible())
    throw std::runtime_error("fit_svar: rank-deficient design");
  f.transition = lu.solve(Cross.transpose()).transpose();
  return f;
}

struct MarOptions {
  double tol = 1e-8;   // relative change of kron(B, A)
  int max_iter = 200;  // alternations per start
  int restarts = 5;    // random starts; best in-sample RSS wins
  std::uint64_t seed = 1;
};

// Kronecker autoregression X_t = A X_{t-1} B^T + E_t by alternating least
// squares. The surface has material local optima on network-coupled data, so
// several seeded starts are run and the lowest in-sample RSS kept.
inline LinearForecaster fit_mar(const PanelSeries& data, const MarOptions& opts = {}) {
  data.validate();
  if (data.T() < 3) throw std::invalid_argument("fit_mar: need T >= 3");
  const Eigen::Index k = data.k, n = data.n;
  const WeightMatrix w0(Mat::Zero(n, n));  // C = 0: the weight matrix is inert
  const Mat C0 = Mat::Zero(k, k), S0 = Mat::Zero(k * n, k * n);

  auto rss_of = [&](const Mat& A, const Mat& B) {
    double rss = 0.0;
    for (Eigen::Index t = 1; t < data.T(); ++t)
      rss += (data.frames[t] - A * data.frames[t - 1] * B.transpose()).squaredNorm();
    return rss;
  };

  LinearForecaster f;
  f.kind = ForecasterKind::mar;
  f.k = k;
  f.n = n;
  double best_rss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    auto g = make_rng(opts.seed + static_cast<std::uint64_t>(r), 0x4d415231 /* "MAR1" */);
    Mat A = detail::randn_mat(k, k, g);
    Mat B = detail::randn_mat(n, n, g);
    for (int it = 0; it < opts.max_iter; ++it) {
      Mat prev = kron(B, A);
      A = update_a(data, w0, C0, B, S0);
      B = update_b(data, w0, C0, A, S0);
      double change = (kron(B, A) - prev).norm() / std::max(1.0, prev.norm());
      if (change < opts.tol) break;
    }
    double rss = rss_of(A, B);
    if (rss < best_rss) {
      best_rss = rss;
      std::tie(f.A, f.B) = normalize_ab(A, B);
    }
  }
  f.transition = kron(f.B, f.A);
  return f;
}

}  // namespace sigmar
