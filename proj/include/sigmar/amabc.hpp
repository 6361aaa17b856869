// Alternating minimization for the network matrix autoregression: per outer
// iteration a least-squares C update with moment-based bias correction,
// closed-form A and B updates, the (A, B) scale/sign normalization, and a
// Lasso S update tuned by BIC.
#pragma once

#include <sigmar/core.hpp>
#include <sigmar/model.hpp>
#include <sigmar/simulate.hpp>

#include <vector>

namespace sigmar {

struct AmaConfig {
  int J = 500;                      // outer iteration cap
  double phi_tol = 1e-6;            // relative Phi change for early stop
  std::vector<double> lambda_grid;  // descending; empty -> 20 log-spaced
                                    // points from lambda_max down to 1e-3 lambda_max
  double lasso_tol = 1e-8;
  int lasso_max_iter = 10000;
  bool bias_correction = true;
};

struct ResidualMoments {
  Mat GammaW;  // (1/T) sum X_t W^T W X_t^T
  Mat SigW;    // (1/T) sum E~_t W E~_t^T
  Mat SigW2;   // (1/T) sum E~_t W^T W E~_t^T
};  // E~_t are one-step innovations of the unrestricted first-order VAR

struct AmaTraceEntry {
  int iteration = 0;
  double objective = 0.0;   // sum_t ||structural residual||^2 + lambda ||vec(S)||_1
  double rel_change = 0.0;  // relative Frobenius change of Phi
};

struct AmaFit {
  SigmarParams params;
  std::vector<AmaTraceEntry> trace;
  int iterations = 0;
  bool converged = false;
  double lambda = 0.0;  // last BIC-selected penalty
};

namespace detail {

inline Mat solve_right(const Mat& Num, const Mat& Den, const char* what) {
  // X = Num * Den^{-1} via X Den = Num; Den is symmetric PSD in all uses.
  Eigen::FullPivLU<Mat> lu(Den);
  if (!lu.isInvertible()) {
    Eigen::JacobiSVD<Mat> svd(Den);
    double cond = svd.singularValues()[0] /
                  std::max(svd.singularValues().tail(1)[0], 1e-300);
    throw std::runtime_error(std::string(what) +
                             ": singular denominator, condition number " +
                             std::to_string(cond));
  }
  return lu.solve(Num.transpose()).transpose();
}

}  // namespace detail

// Least-squares C given Phi: regress X_t^c = X_t - unvec(Phi vec(X_{t-1}))
// on X_t W^T.  Biased in general because X_t W^T is correlated with the
// noise; see bias_correct_c.
inline Mat update_c_lse(const PanelSeries& data, const WeightMatrix& w, const Mat& Phi) {
  const Eigen::Index k = data.k, n = data.n;
  Mat Num = Mat::Zero(k, k), Den = Mat::Zero(k, k);
  for (Eigen::Index t = 1; t < data.T(); ++t) {
    const Mat& Xt = data.frames[t];
    Mat Xc = Xt - unvec(Phi * vec(data.frames[t - 1]), k, n);
    Num += Xc * w.W * Xt.transpose();
    Den += Xt * w.W.transpose() * w.W * Xt.transpose();
  }
  return detail::solve_right(Num, Den, "update_c_lse");
}

// Moments of the one-step innovations E~_t.  The innovations are estimated
// from the data alone, as the residuals of the unrestricted least-squares
// regression of vec(X_t) on vec(X_{t-1}): the model's reduced form is a
// first-order vector autoregression, so its innovations are identified
// without knowing any of the structural coefficients.  This keeps the bias
// correction well defined even when the current C iterate is far off.
inline ResidualMoments residual_moments(const PanelSeries& data, const WeightMatrix& w) {
  const Eigen::Index k = data.k, n = data.n, kn = k * n;
  Mat Gram = Mat::Zero(kn, kn), Cross = Mat::Zero(kn, kn);
  for (Eigen::Index t = 1; t < data.T(); ++t) {
    Vec x = vec(data.frames[t - 1]);
    Gram.noalias() += x * x.transpose();
    Cross.noalias() += vec(data.frames[t]) * x.transpose();
  }
  Mat Pi = detail::solve_right(Cross, Gram, "residual_moments");
  ResidualMoments m;
  m.GammaW = Mat::Zero(k, k);
  m.SigW = Mat::Zero(k, k);
  m.SigW2 = Mat::Zero(k, k);
  const double Tt = static_cast<double>(data.T() - 1);
  for (Eigen::Index t = 1; t < data.T(); ++t) {
    const Mat& Xt = data.frames[t];
    Mat Et = Xt - unvec(Pi * vec(data.frames[t - 1]), k, n);
    m.GammaW += Xt * w.W.transpose() * w.W * Xt.transpose();
    m.SigW += Et * w.W * Et.transpose();
    m.SigW2 += Et * w.W.transpose() * w.W * Et.transpose();
  }
  m.GammaW /= Tt;
  m.SigW /= Tt;
  m.SigW2 /= Tt;
  return m;
}

// C^bc = (C^lse Gamma_w - Sigma~_w)(Gamma_w - Sigma~_{w^2})^{-1}
inline Mat bias_correct_c(const Mat& C_lse, const ResidualMoments& m) {
  return detail::solve_right(C_lse * m.GammaW - m.SigW, m.GammaW - m.SigW2,
                             "bias_correct_c");
}

namespace detail {
inline Mat xab_frame(const PanelSeries& data, const WeightMatrix& w, const Mat& C,
                     const Mat& S, Eigen::Index t) {
  const Mat& Xt = data.frames[t];
  return Xt - C * Xt * w.W.transpose() -
         unvec(S * vec(data.frames[t - 1]), data.k, data.n);
}
}  // namespace detail

// A = (sum X_t^ab B X_{t-1}^T)(sum X_{t-1} B^T B X_{t-1}^T)^{-1}
inline Mat update_a(const PanelSeries& data, const WeightMatrix& w, const Mat& C,
                    const Mat& B, const Mat& S) {
  const Eigen::Index k = data.k;
  Mat Num = Mat::Zero(k, k), Den = Mat::Zero(k, k);
  for (Eigen::Index t = 1; t < data.T(); ++t) {
    const Mat& Xp = data.frames[t - 1];
    Num += detail::xab_frame(data, w, C, S, t) * B * Xp.transpose();
    Den += Xp * B.transpose() * B * Xp.transpose();
  }
  return detail::solve_right(Num, Den, "update_a");
}

// B = (sum (X_t^ab)^T A X_{t-1})(sum X_{t-1}^T A^T A X_{t-1})^{-1}
inline Mat update_b(const PanelSeries& data, const WeightMatrix& w, const Mat& C,
                    const Mat& A, const Mat& S) {
  const Eigen::Index n = data.n;
  Mat Num = Mat::Zero(n, n), Den = Mat::Zero(n, n);
  for (Eigen::Index t = 1; t < data.T(); ++t) {
    const Mat& Xp = data.frames[t - 1];
    Num += detail::xab_frame(data, w, C, S, t).transpose() * A * Xp;
    Den += Xp.transpose() * A.transpose() * A * Xp;
  }
  return detail::solve_right(Num, Den, "update_b");
}

namespace detail {

// Shared sufficient statistics of the Lasso problems: Gram of vec(X_{t-1})
// and cross-products with the S-step targets vec(X_t^s).
struct LassoStats {
  Mat Gram;    // kn x kn
  Mat Cross;   // kn x kn, Cross(i, j) = sum_t y_i z_j
  double yss;  // sum_t ||y_t||^2
};

inline LassoStats lasso_stats(const PanelSeries& data, const WeightMatrix& w,
                              const Mat& C, const Mat& A, const Mat& B) {
  const Eigen::Index kn = data.k * data.n;
  LassoStats st;
  st.Gram = Mat::Zero(kn, kn);
  st.Cross = Mat::Zero(kn, kn);
  st.yss = 0.0;
  for (Eigen::Index t = 1; t < data.T(); ++t) {
    const Mat& Xt = data.frames[t];
    const Mat& Xp = data.frames[t - 1];
    Vec z = vec(Xp);
    Vec y = vec(Mat(Xt - C * Xt * w.W.transpose() - A * Xp * B.transpose()));
    st.Gram.noalias() += z * z.transpose();
    st.Cross.noalias() += y * z.transpose();
    st.yss += y.squaredNorm();
  }
  return st;
}

// Cyclic coordinate descent on min_S sum_t ||y_t - S z_t||^2 + lambda ||vec S||_1,
// one independent row problem per row of S, all sharing Gram.  S is updated
// in place (warm start).
inline void lasso_cd(const LassoStats& st, double lambda, double tol, int max_iter,
                     Mat& S) {
  const Eigen::Index kn = st.Gram.rows();
  for (int it = 0; it < max_iter; ++it) {
    double max_delta = 0.0;
    for (Eigen::Index i = 0; i < kn; ++i) {
      for (Eigen::Index j = 0; j < kn; ++j) {
        if (st.Gram(j, j) <= 0.0) continue;
        // partial residual correlation: Cross(i,j) - sum_{l != j} S(i,l) Gram(l,j)
        double rho = st.Cross(i, j) - S.row(i).dot(st.Gram.col(j)) +
                     S(i, j) * st.Gram(j, j);
        double newv = soft_threshold(rho, lambda / 2.0) / st.Gram(j, j);
        max_delta = std::max(max_delta, std::abs(newv - S(i, j)));
        S(i, j) = newv;
      }
    }
    if (max_delta > tol) continue;
    // Coordinate movement can go quiet a couple of decades before the
    // solution is stationary (correlated coordinates share a slowly
    // draining residual), so accept only once the subgradient conditions
    // hold: |grad| <= lambda on the zero set, grad = -lambda sign(S) on
    // the active set, to within tol * max(lambda, 1).
    Mat grad = 2.0 * (S * st.Gram - st.Cross);
    double viol = 0.0;
    for (Eigen::Index i = 0; i < kn; ++i)
      for (Eigen::Index j = 0; j < kn; ++j) {
        if (st.Gram(j, j) <= 0.0) continue;
        if (S(i, j) == 0.0)
          viol = std::max(viol, std::abs(grad(i, j)) - lambda);
        else
          viol = std::max(viol,
                          std::abs(grad(i, j) + lambda * (S(i, j) > 0 ? 1.0 : -1.0)));
      }
    if (viol <= tol * std::max(lambda, 1.0)) break;
  }
}

inline double lambda_max(const LassoStats& st) {
  return 2.0 * st.Cross.cwiseAbs().maxCoeff();
}

inline std::vector<double> default_grid(double lmax) {
  std::vector<double> grid(20);
  for (int i = 0; i < 20; ++i) grid[i] = lmax * std::pow(10.0, -3.0 * i / 19.0);
  return grid;
}

inline double lasso_rss(const LassoStats& st, const Mat& S) {
  // ||y - S z||^2 summed over t, expanded through the sufficient statistics
  return st.yss - 2.0 * (st.Cross.array() * S.array()).sum() +
         (S * st.Gram).cwiseProduct(S).sum();
}

// Residual sum of squares of the least-squares refit restricted to the
// support of S (row by row).  Depends on the support only, not on the
// shrunken values, which makes the information criterion insensitive to the
// Lasso's magnitude bias.
inline double support_refit_rss(const LassoStats& st, const Mat& S,
                                Mat* refit = nullptr) {
  double rss = st.yss;
  if (refit) refit->setZero(S.rows(), S.cols());
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    idx.clear();
    for (Eigen::Index j = 0; j < S.cols(); ++j)
      if (S(i, j) != 0.0) idx.push_back(j);
    if (idx.empty()) continue;
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    Mat G(m, m);
    Vec c(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      c[a] = st.Cross(i, idx[a]);
      for (Eigen::Index b = 0; b < m; ++b) G(a, b) = st.Gram(idx[a], idx[b]);
    }
    Vec sol = G.ldlt().solve(c);
    // row RSS = yss_i - c^T G^{-1} c; clamp tiny negative round-off
    rss -= c.dot(sol);
    if (refit)
      for (Eigen::Index a = 0; a < m; ++a) (*refit)(i, idx[a]) = sol[a];
  }
  return std::max(rss, 0.0);
}

}  // namespace detail

inline Mat update_s_lasso(const PanelSeries& data, const WeightMatrix& w, const Mat& C,
                          const Mat& A, const Mat& B, double lambda,
                          const AmaConfig& cfg = {}) {
  if (lambda < 0) throw std::invalid_argument("update_s_lasso: lambda must be >= 0");
  detail::LassoStats st = detail::lasso_stats(data, w, C, A, B);
  Mat S = Mat::Zero(data.k * data.n, data.k * data.n);
  detail::lasso_cd(st, lambda, cfg.lasso_tol, cfg.lasso_max_iter, S);
  return S;
}

// BIC(lambda) = N ln(RSS/N) + df ln N over a warm-started descending path;
// N = kn (T-1), df = support size.  RSS is evaluated at the least-squares
// refit on the selected support so that shrinkage of strong entries does not
// drag the criterion toward smaller penalties; ties (identical supports)
// resolve to the smaller lambda.  S_best, when requested, is the refit on
// the winning support (Lasso for selection, least squares for magnitude).
inline double bic_select_lambda(const PanelSeries& data, const WeightMatrix& w,
                                const Mat& C, const Mat& A, const Mat& B,
                                std::vector<double> grid, const AmaConfig& cfg = {},
                                Mat* S_best = nullptr) {
  detail::LassoStats st = detail::lasso_stats(data, w, C, A, B);
  if (grid.empty()) grid = detail::default_grid(detail::lambda_max(st));
  const double N = static_cast<double>(data.k * data.n) * (data.T() - 1);
  Mat S = Mat::Zero(data.k * data.n, data.k * data.n);
  double best_bic = std::numeric_limits<double>::infinity();
  double best_lambda = grid.front();
  for (double lambda : grid) {
    detail::lasso_cd(st, lambda, cfg.lasso_tol, cfg.lasso_max_iter, S);
    Mat refit;
    double rss = std::max(detail::support_refit_rss(st, S, S_best ? &refit : nullptr),
                          1e-300);
    double df = static_cast<double>((S.array() != 0.0).count());
    double bic = N * std::log(rss / N) + df * std::log(N);
    if (bic <= best_bic) {
      best_bic = bic;
      best_lambda = lambda;
      if (S_best) *S_best = refit;
    }
  }
  return best_lambda;
}

// Random starting point: A, B standard normal, jointly rescaled to a stable
// spectral product, S = 0, C = 0.
inline SigmarParams ama_default_init(Eigen::Index k, Eigen::Index n, std::uint64_t seed) {
  auto g = make_rng(seed, 0x414d4131 /* "AMA1" */);
  SigmarParams p;
  p.A = detail::randn_mat(k, k, g);
  p.B = detail::randn_mat(n, n, g);
  double s = std::sqrt(0.5 / (spectral_radius(p.A) * spectral_radius(p.B)));
  p.A *= s;
  p.B *= s;
  std::tie(p.A, p.B) = normalize_ab(p.A, p.B);
  p.C = Mat::Zero(k, k);
  p.S = Mat::Zero(k * n, k * n);
  p.sigma2 = 1.0;
  return p;
}

inline AmaFit fit_amabc(const PanelSeries& data, const WeightMatrix& w,
                        const SigmarParams& init, const AmaConfig& cfg = {}) {
  if (data.T() < 3) throw std::invalid_argument("fit_amabc: need T >= 3");
  const Eigen::Index k = data.k, n = data.n, kn = k * n;
  AmaFit fit;
  fit.params = init;
  Mat Phi = phi_of(init);
  // Data-only moments, shared by every outer iteration.
  ResidualMoments moments;
  if (cfg.bias_correction) moments = residual_moments(data, w);

  for (int j = 0; j < cfg.J; ++j) {
    // C step: least squares given Phi, then moment-based correction
    Mat C = update_c_lse(data, w, Phi);
    if (cfg.bias_correction) C = bias_correct_c(C, moments);
    fit.params.C = C;

    // A, B closed forms, then the scale/sign normalization
    fit.params.A = update_a(data, w, C, fit.params.B, fit.params.S);
    fit.params.B = update_b(data, w, C, fit.params.A, fit.params.S);
    std::tie(fit.params.A, fit.params.B) = normalize_ab(fit.params.A, fit.params.B);

    // S step with BIC-selected penalty.  The shrunken Lasso solution (not
    // the refit) is carried through the iterations: its smaller magnitudes
    // keep the A/B/C substeps stable while the support settles.
    fit.lambda = bic_select_lambda(data, w, C, fit.params.A, fit.params.B,
                                   cfg.lambda_grid, cfg);
    Mat S = update_s_lasso(data, w, C, fit.params.A, fit.params.B, fit.lambda, cfg);
    fit.params.S = S;

    Mat PhiNew = phi_of(fit.params);
    double rel = (PhiNew - Phi).norm() / std::max(1.0, Phi.norm());
    Phi = PhiNew;

    double rss = 0.0;
    for (Eigen::Index t = 1; t < data.T(); ++t) {
      const Mat& Xt = data.frames[t];
      rss += (Xt - C * Xt * w.W.transpose() -
              unvec(Phi * vec(data.frames[t - 1]), k, n))
                 .squaredNorm();
    }
    fit.trace.push_back({j, rss + fit.lambda * vec(S).cwiseAbs().sum(), rel});
    fit.iterations = j + 1;
    if (rel < cfg.phi_tol) {
      fit.converged = true;
      break;
    }
  }

  // Final S: least-squares refit on the selected support, undoing the
  // Lasso's magnitude shrinkage at the converged coefficients.
  if (fit.params.S.cwiseAbs().maxCoeff() > 0.0) {
    detail::LassoStats st =
        detail::lasso_stats(data, w, fit.params.C, fit.params.A, fit.params.B);
    Mat refit;
    detail::support_refit_rss(st, fit.params.S, &refit);
    fit.params.S = refit;
    Phi = phi_of(fit.params);
  }

  // sigma^2: mean squared structural residual at the final parameters
  double rss = 0.0;
  for (Eigen::Index t = 1; t < data.T(); ++t) {
    const Mat& Xt = data.frames[t];
    rss += (Xt - fit.params.C * Xt * w.W.transpose() -
            unvec(Phi * vec(data.frames[t - 1]), k, n))
               .squaredNorm();
  }
  fit.params.sigma2 = rss / (static_cast<double>(kn) * (data.T() - 1));
  return fit;
}

}  // namespace sigmar
