// Gaussian log-quasi-likelihood of the network matrix autoregression, its
// analytic gradient, and a limited-memory quasi-Newton maximizer over
// theta = (vec(C), vec(Phi), sigma^2) with sigma^2 profiled out.  Standard
// errors come from the inverse numerical Hessian of the gradient.
#pragma once

#include <sigmar/core.hpp>
#include <sigmar/model.hpp>

#include <deque>
#include <optional>

namespace sigmar {

struct QmleOptions {
  double tol = 1e-6;   // sup-norm of the (profiled) gradient
  int max_iter = 500;
  int memory = 10;     // L-BFGS history length
  bool compute_se = false;
};

struct QmleReport {
  ThetaFlat theta_hat;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
  std::optional<Vec> se;   // per theta coordinate, if requested and Hessian is PD
  bool se_warning = false; // Hessian not positive definite
};

namespace detail {

// Lagged/current vectorized design shared by every likelihood evaluation:
// column t of X0 is vec(X_t), of X1 is vec(X_{t+1}), t = 0..T-2.
struct LoglikWorkspace {
  Eigen::Index k, n, Tt;  // Tt = T - 1 summands
  Mat X0, X1;
  const WeightMatrix* w;

  LoglikWorkspace(const PanelSeries& data, const WeightMatrix& wm) : w(&wm) {
    if (data.T() < 2) throw std::invalid_argument("loglik: need T >= 2");
    k = data.k;
    n = data.n;
    Tt = data.T() - 1;
    X0.resize(k * n, Tt);
    X1.resize(k * n, Tt);
    for (Eigen::Index t = 0; t < Tt; ++t) {
      X0.col(t) = vec(data.frames[t]);
      X1.col(t) = vec(data.frames[t + 1]);
    }
  }

  // Structural residuals v_t = G vec(X_t) - Phi vec(X_{t-1}) as columns.
  Mat residuals(const Mat& C, const Mat& Phi) const {
    return X1 - kron(w->W, C) * X1 - Phi * X0;
  }
};

}  // namespace detail

inline double loglik(const ThetaFlat& th, const PanelSeries& data, const WeightMatrix& w) {
  if (th.sigma2 <= 0) throw std::domain_error("loglik: sigma2 must be positive");
  detail::LoglikWorkspace ws(data, w);
  const Mat C = unvec(th.vecC, ws.k, ws.k);
  const Mat Phi = unvec(th.vecPhi, ws.k * ws.n, ws.k * ws.n);
  const double ld = logdet_I_minus_kron(w.eigvals, C);
  const double rss = ws.residuals(C, Phi).squaredNorm();
  const double kn = static_cast<double>(ws.k * ws.n);
  return -0.5 * kn * ws.Tt * (std::log(2.0 * M_PI) + std::log(th.sigma2)) + ws.Tt * ld -
         rss / (2.0 * th.sigma2);
}

// Gradient blocks:
//   d/dvec(C):   (1/s2) sum_t vec(V_t W X_t^T) - T R1(G^-T)^T vec(W)
//   d/dvec(Phi): (1/s2) sum_t vec(v_t vec(X_{t-1})^T)
//   d/ds2:       (1/(2 s2^2)) (sum_t v_t^T v_t - kn T s2)
// where V_t = unvec(v_t) and R1(G^-T)^T vec(W) contracts the k x k blocks of
// G^-T against the entries of W.
inline Vec grad_loglik(const ThetaFlat& th, const PanelSeries& data, const WeightMatrix& w) {
  if (th.sigma2 <= 0) throw std::domain_error("grad_loglik: sigma2 must be positive");
  detail::LoglikWorkspace ws(data, w);
  const Eigen::Index k = ws.k, n = ws.n, kn = k * n;
  const Mat C = unvec(th.vecC, k, k);
  const Mat Phi = unvec(th.vecPhi, kn, kn);

  Mat G = Mat::Identity(kn, kn) - kron(w.W, C);
  logdet_I_minus_kron(w.eigvals, C);  // admissibility guard (throws)
  Mat GinvT = G.partialPivLu().inverse().transpose();

  const Mat V = ws.X1 - kron(w.W, C) * ws.X1 - Phi * ws.X0;
  const double s2 = th.sigma2;

  // C block
  Mat accC = Mat::Zero(k, k);
  for (Eigen::Index t = 0; t < ws.Tt; ++t) {
    Mat Vt = unvec(V.col(t), k, n);
    Mat Xt = unvec(ws.X1.col(t), k, n);
    accC += Vt * w.W * Xt.transpose();
  }
  Mat Dlog = Mat::Zero(k, k);
  for (Eigen::Index l = 0; l < n; ++l)
    for (Eigen::Index j = 0; j < n; ++j)
      if (w.W(j, l) != 0.0) Dlog += w.W(j, l) * GinvT.block(j * k, l * k, k, k);

  Vec g(k * k + kn * kn + 1);
  g.head(k * k) = vec(accC) / s2 - static_cast<double>(ws.Tt) * vec(Dlog);
  g.segment(k * k, kn * kn) = vec(Mat(V * ws.X0.transpose())) / s2;
  g[k * k + kn * kn] =
      (V.squaredNorm() - static_cast<double>(kn) * ws.Tt * s2) / (2.0 * s2 * s2);
  return g;
}

namespace detail {

// Profiled objective: maximize over (vec(C), vec(Phi)) with
// sigma2(C, Phi) = RSS / (kn (T-1)) substituted in.  Returns the profiled
// log-likelihood and its gradient; throws std::domain_error outside the
// admissible region.
struct ProfiledObjective {
  const LoglikWorkspace& ws;

  double eval(const Vec& u, Vec* grad, double* sigma2_out) const {
    const Eigen::Index k = ws.k, n = ws.n, kn = k * n;
    const Mat C = unvec(u.head(k * k), k, k);
    const Mat Phi = unvec(u.tail(kn * kn), kn, kn);
    const double ld = logdet_I_minus_kron(ws.w->eigvals, C);
    const Mat V = ws.residuals(C, Phi);
    const double rss = V.squaredNorm();
    const double N = static_cast<double>(kn) * ws.Tt;
    const double s2 = rss / N;
    if (!(s2 > 0)) throw std::domain_error("profiled sigma2 is zero");
    if (sigma2_out) *sigma2_out = s2;
    const double f =
        -0.5 * N * (std::log(2.0 * M_PI) + std::log(s2) + 1.0) + ws.Tt * ld;
    if (grad) {
      // Envelope: gradient of the profiled objective equals the partial
      // gradient at sigma2 = s2.
      Mat G = Mat::Identity(kn, kn) - kron(ws.w->W, C);
      Mat GinvT = G.partialPivLu().inverse().transpose();
      Mat accC = Mat::Zero(k, k);
      for (Eigen::Index t = 0; t < ws.Tt; ++t)
        accC += unvec(V.col(t), k, n) * ws.w->W * unvec(ws.X1.col(t), k, n).transpose();
      Mat Dlog = Mat::Zero(k, k);
      for (Eigen::Index l = 0; l < n; ++l)
        for (Eigen::Index j = 0; j < n; ++j)
          if (ws.w->W(j, l) != 0.0) Dlog += ws.w->W(j, l) * GinvT.block(j * k, l * k, k, k);
      grad->resize(u.size());
      grad->head(k * k) = vec(accC) / s2 - static_cast<double>(ws.Tt) * vec(Dlog);
      grad->tail(kn * kn) = vec(Mat(V * ws.X0.transpose())) / s2;
    }
    return f;
  }
};

}  // namespace detail

inline Vec numeric_se_impl(const ThetaFlat& th, const PanelSeries& data,
                           const WeightMatrix& w, bool* warning) {
  const Eigen::Index dim = th.vecC.size() + th.vecPhi.size() + 1;
  auto pack = [&](const ThetaFlat& t) {
    Vec v(dim);
    v << t.vecC, t.vecPhi, t.sigma2;
    return v;
  };
  auto unpack = [&](const Vec& v) {
    ThetaFlat t;
    t.vecC = v.head(th.vecC.size());
    t.vecPhi = v.segment(th.vecC.size(), th.vecPhi.size());
    t.sigma2 = v[dim - 1];
    return t;
  };
  Vec x = pack(th);
  Mat H(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    H.col(i) = -(grad_loglik(unpack(xp), data, w) - grad_loglik(unpack(xm), data, w)) /
               (2.0 * h);
  }
  H = ((H + H.transpose()) / 2.0).eval();
  Eigen::LDLT<Mat> ldlt(H);
  *warning = ldlt.info() != Eigen::Success || !ldlt.isPositive();
  if (*warning) return Vec();
  Mat Hinv = ldlt.solve(Mat::Identity(dim, dim));
  Vec d = Hinv.diagonal();
  if ((d.array() <= 0).any()) {
    *warning = true;
    return Vec();
  }
  return d.cwiseSqrt();
}

inline Vec numeric_se(const ThetaFlat& th, const PanelSeries& data, const WeightMatrix& w,
                      bool* warning = nullptr) {
  bool warn = false;
  Vec se = numeric_se_impl(th, data, w, &warn);
  if (warning) *warning = warn;
  return se;
}

// Quasi-Newton ascent (L-BFGS two-loop recursion, Armijo backtracking).
// Steps that leave the admissible region (det(G) <= 0) are rejected by the
// line search via the domain error thrown by the log-determinant.
inline QmleReport fit_qmle(const PanelSeries& data, const WeightMatrix& w,
                           const SigmarParams& init, const QmleOptions& opts = {}) {
  detail::LoglikWorkspace ws(data, w);
  const Eigen::Index k = ws.k, n = ws.n, kn = k * n;
  if (init.k() != k || init.n() != n)
    throw std::invalid_argument("fit_qmle: init dimension mismatch");

  if (!check_admissible(init, w).ok())
    throw std::domain_error("fit_qmle: inadmissible initial parameters");

  detail::ProfiledObjective obj{ws};
  Vec x(k * k + kn * kn);
  x << vec(init.C), vec(phi_of(init));

  Vec g;
  double s2 = 0.0;
  double f = obj.eval(x, &g, &s2);

  std::deque<Vec> S, Y;  // L-BFGS history
  QmleReport rep;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    rep.grad_norm = g.cwiseAbs().maxCoeff();
    if (rep.grad_norm < opts.tol) {
      rep.converged = true;
      break;
    }
    // two-loop recursion on the negative gradient (we maximize)
    Vec q = g;
    std::vector<double> alpha(S.size());
    for (Eigen::Index i = static_cast<Eigen::Index>(S.size()) - 1; i >= 0; --i) {
      double rho = 1.0 / Y[i].dot(S[i]);
      alpha[i] = rho * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    if (!S.empty()) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (size_t i = 0; i < S.size(); ++i) {
      double rho = 1.0 / Y[i].dot(S[i]);
      double beta = rho * Y[i].dot(q);
      q += (alpha[i] - beta) * S[i];
    }
    Vec p = q;  // ascent direction candidate
    double slope = g.dot(p);
    if (!(slope > 0)) {
      p = g;
      slope = g.squaredNorm();
    }

    double step = 1.0;
    Vec xn, gn;
    double fn = -std::numeric_limits<double>::infinity(), s2n = s2;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * p;
      try {
        fn = obj.eval(xn, &gn, &s2n);
        if (fn >= f + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
      } catch (const std::domain_error&) {
        // outside admissible region; shrink
      }
      step *= 0.5;
    }
    if (!accepted) break;  // line search stalled

    Vec sdiff = xn - x, ydiff = gn - g;
    if (sdiff.dot(ydiff) < 0) {  // curvature of -loglik positive -> keep
      S.push_back(sdiff);
      Y.push_back(-ydiff);  // store for the minimization convention
      // For ascent with two-loop on g directly, use (s, -y) so that
      // s^T(-y) > 0 mirrors the standard curvature condition.
      if (static_cast<int>(S.size()) > opts.memory) {
        S.pop_front();
        Y.pop_front();
      }
    }
    x = xn;
    g = gn;
    f = fn;
    s2 = s2n;
  }
  rep.iterations = it;
  rep.grad_norm = g.cwiseAbs().maxCoeff();
  if (rep.grad_norm < opts.tol) rep.converged = true;

  rep.theta_hat.vecC = x.head(k * k);
  rep.theta_hat.vecPhi = x.tail(kn * kn);
  rep.theta_hat.sigma2 = s2;
  rep.loglik = f;
  if (opts.compute_se) {
    bool warn = false;
    Vec se = numeric_se(rep.theta_hat, data, w, &warn);
    rep.se_warning = warn;
    if (!warn) rep.se = se;
  }
  return rep;
}

}  // namespace sigmar
