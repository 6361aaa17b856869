#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sigmar/qmle.hpp>
#include <sigmar/simulate.hpp>

#include "test_util.hpp"

using namespace sigmar;

namespace {

ThetaFlat theta_of(const SigmarParams& p) {
  ThetaFlat t;
  t.vecC = vec(p.C);
  t.vecPhi = vec(phi_of(p));
  t.sigma2 = p.sigma2;
  return t;
}

PanelSeries zero_series(Eigen::Index k, Eigen::Index n, Eigen::Index T) {
  PanelSeries s;
  s.k = k;
  s.n = n;
  s.frames.assign(T, Mat::Zero(k, n));
  return s;
}

}  // namespace

TEST_CASE("loglik plug-in value") {
  // k = n = 1, all-zero data, C = 0, Phi = 0, sigma2 = 1, T - 1 = 10
  WeightMatrix w(Mat::Zero(1, 1));
  ThetaFlat t;
  t.vecC = Vec::Zero(1);
  t.vecPhi = Vec::Zero(1);
  t.sigma2 = 1.0;
  CHECK(loglik(t, zero_series(1, 1, 11), w) ==
        doctest::Approx(-5.0 * std::log(2.0 * M_PI)).epsilon(1e-14));
  t.sigma2 = -1.0;
  CHECK_THROWS_AS(loglik(t, zero_series(1, 1, 11), w), std::domain_error);
}

TEST_CASE("loglik dominates large perturbations at the truth") {
  WeightMatrix w = gen_weight(4, 2);
  DgpSpec spec;
  spec.seed = 2;
  SigmarParams p0 = gen_coefficients(spec, w);
  PanelSeries data = simulate_series(p0, w, 2000, 200, 5);
  ThetaFlat t0 = theta_of(p0);
  double f0 = loglik(t0, data, w);

  std::mt19937_64 g(99);
  std::normal_distribution<double> d;
  int dominated = 0;
  for (int rep = 0; rep < 100; ++rep) {
    ThetaFlat t = t0;
    for (Eigen::Index i = 0; i < t.vecC.size(); ++i) t.vecC[i] += 0.4 * d(g);
    for (Eigen::Index i = 0; i < t.vecPhi.size(); ++i) t.vecPhi[i] += 0.4 * d(g);
    t.sigma2 = t0.sigma2 * (1.0 + 0.8 * std::abs(d(g)));
    try {
      if (loglik(t, data, w) <= f0) ++dominated;
    } catch (const std::domain_error&) {
      ++dominated;  // left the admissible set entirely
    }
  }
  CHECK(dominated >= 95);
}

TEST_CASE("profiled sigma2 is a stationary point") {
  WeightMatrix w = gen_weight(3, 4);
  std::mt19937_64 g(7);
  SigmarParams p = testutil::random_params(2, 3, g);
  PanelSeries data = simulate_series(p, w, 200, 100, 8);
  ThetaFlat t = theta_of(p);
  // concentrate sigma2 out
  detail::LoglikWorkspace ws(data, w);
  double rss = ws.residuals(p.C, phi_of(p)).squaredNorm();
  t.sigma2 = rss / (2.0 * 3.0 * (data.T() - 1));
  Vec grad = grad_loglik(t, data, w);
  CHECK(std::abs(grad[grad.size() - 1]) < 1e-8 * rss);

  // finite-difference confirmation
  double h = 1e-6 * t.sigma2;
  ThetaFlat tp = t, tm = t;
  tp.sigma2 += h;
  tm.sigma2 -= h;
  CHECK(std::abs(loglik(tp, data, w) - loglik(tm, data, w)) / (2 * h) < 1e-4);
}

TEST_CASE("analytic gradient matches central finite differences") {
  WeightMatrix w = gen_weight(3, 31);
  std::mt19937_64 g(13);
  int checked = 0;
  for (int rep = 0; rep < 20; ++rep) {
    SigmarParams p = testutil::random_params(2, 3, g, 0.45, 0.45);
    p.S = 0.05 * testutil::randn(6, 6, g);
    if (!check_admissible(p, w).ok()) continue;
    PanelSeries data = simulate_series(p, w, 50, 100, 100 + rep);
    ThetaFlat t = theta_of(p);
    t.sigma2 = 0.9;  // off the profile on purpose
    Vec grad = grad_loglik(t, data, w);

    auto f = [&](const ThetaFlat& th) { return loglik(th, data, w); };
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      ThetaFlat tp = t, tm = t;
      double* coord_p;
      double* coord_m;
      if (i < 4) {
        coord_p = &tp.vecC[i];
        coord_m = &tm.vecC[i];
      } else if (i < 4 + 36) {
        coord_p = &tp.vecPhi[i - 4];
        coord_m = &tm.vecPhi[i - 4];
      } else {
        coord_p = &tp.sigma2;
        coord_m = &tm.sigma2;
      }
      double h = 1e-5 * std::max(1.0, std::abs(*coord_p));
      *coord_p += h;
      *coord_m -= h;
      double fd = (f(tp) - f(tm)) / (2 * h);
      CHECK(std::abs(grad[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
    ++checked;
  }
  CHECK(checked >= 15);
}

TEST_CASE("gradient closed forms in degenerate cases") {
  // all-zero data: C block reduces to the log-det term
  WeightMatrix w = gen_weight(3, 17);
  std::mt19937_64 g(21);
  SigmarParams p = testutil::random_params(2, 3, g);
  ThetaFlat t = theta_of(p);
  Vec grad = grad_loglik(t, zero_series(2, 3, 11), w);

  Mat G = Mat::Identity(6, 6) - kron(w.W, p.C);
  Mat GinvT = G.inverse().transpose();
  Vec want = -10.0 * rearrange(GinvT, {3, 3, 2, 2}).transpose() * vec(w.W);
  CHECK((grad.head(4) - want).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(grad.segment(4, 36).cwiseAbs().maxCoeff() == 0.0);
  CHECK(grad[40] == doctest::Approx(-6.0 * 10.0 / 2.0));  // -kn*T/(2 s2), s2=1

  // W = 0 (test-only degenerate): log-det term vanishes
  WeightMatrix w0(Mat::Zero(3, 3));
  Vec grad0 = grad_loglik(t, zero_series(2, 3, 11), w0);
  CHECK(grad0.head(4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loglik is a function of Phi only (gauge invariance)") {
  WeightMatrix w = gen_weight(3, 5);
  std::mt19937_64 g(31);
  SigmarParams p = testutil::random_params(2, 3, g);
  p.S = 0.03 * testutil::randn(6, 6, g);
  PanelSeries data = simulate_series(p, w, 100, 100, 6);

  SigmarParams q = p;
  auto [An, Bn] = normalize_ab(3.7 * p.A, p.B / 3.7);
  q.A = An;
  q.B = Bn;
  q.S = phi_of(p) - kron(q.B, q.A);
  CHECK(std::abs(loglik(theta_of(p), data, w) - loglik(theta_of(q), data, w)) < 1e-8);
}

TEST_CASE("fit_qmle from the truth stays at the truth") {
  WeightMatrix w = gen_weight(4, 41);
  DgpSpec spec;
  spec.seed = 41;
  SigmarParams p0 = gen_coefficients(spec, w);
  PanelSeries data = simulate_series(p0, w, 2000, 200, 42);

  QmleOptions opts;
  opts.tol = 1e-4;
  QmleReport rep = fit_qmle(data, w, p0, opts);
  CHECK(rep.converged);
  ThetaFlat t0 = theta_of(p0);
  CHECK(rep.loglik >= loglik(t0, data, w));
  Mat Chat = unvec(rep.theta_hat.vecC, 3, 3);
  CHECK((Chat - p0.C).norm() / p0.C.norm() < 0.5);
  // loglik strictly improved and sigma2 satisfies the profile identity
  detail::LoglikWorkspace ws(data, w);
  double rss = ws.residuals(Chat, unvec(rep.theta_hat.vecPhi, 12, 12)).squaredNorm();
  CHECK(rep.theta_hat.sigma2 ==
        doctest::Approx(rss / (12.0 * (data.T() - 1))).epsilon(1e-10));

  // inadmissible init is rejected
  SigmarParams bad = p0;
  bad.C *= 10.0;
  CHECK_THROWS_AS(fit_qmle(data, w, bad, opts), std::domain_error);
}

TEST_CASE("fit_qmle recovers C on a midsize instance") {
  WeightMatrix w = gen_weight(4, 51);
  DgpSpec spec;
  spec.seed = 51;
  SigmarParams p0 = gen_coefficients(spec, w);
  PanelSeries data = simulate_series(p0, w, 800, 200, 52);

  // crude but admissible starting point away from the truth
  SigmarParams init = p0;
  init.C *= 0.5;
  init.A *= 0.8;
  init.S.setZero();
  QmleOptions opts;
  opts.tol = 1e-4;
  QmleReport rep = fit_qmle(data, w, init, opts);
  Mat Chat = unvec(rep.theta_hat.vecC, 3, 3);
  CHECK((Chat - p0.C).norm() / p0.C.norm() < 0.45);
  CHECK(rep.loglik >= loglik(theta_of(init), data, w));
}

TEST_CASE("numeric_se on a small instance") {
  // k = 1, n = 3: 11 parameters, fast Hessians
  WeightMatrix w = gen_weight(3, 61);
  DgpSpec spec;
  spec.k = 1;
  spec.n = 3;
  spec.s = 2;
  spec.seed = 61;
  SigmarParams p0 = gen_coefficients(spec, w);

  auto se_at_T = [&](Eigen::Index T, std::uint64_t seed) {
    PanelSeries data = simulate_series(p0, w, T, 200, seed);
    QmleOptions opts;
    opts.tol = 1e-5;
    QmleReport rep = fit_qmle(data, w, p0, opts);
    bool warn = false;
    Vec se = numeric_se(rep.theta_hat, data, w, &warn);
    REQUIRE(!warn);
    CHECK((se.array() > 0).all());
    CHECK(se.allFinite());
    return se;
  };
  Vec se500 = se_at_T(500, 62);
  Vec se2000 = se_at_T(2000, 63);
  // sqrt(T) scaling: ratio near 2 on average
  double ratio = (se500.array() / se2000.array()).mean();
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);

  // flat direction: all-zero data makes the Phi block of the Hessian singular
  ThetaFlat t;
  t.vecC = Vec::Zero(1);
  t.vecPhi = Vec::Zero(9);
  t.sigma2 = 1.0;
  bool warn = false;
  Vec se = numeric_se(t, zero_series(1, 3, 20), w, &warn);
  CHECK(warn);
  CHECK(se.size() == 0);
}
