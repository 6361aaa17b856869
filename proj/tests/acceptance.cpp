// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Tolerances are pinned here, next to each check.
//
// argv[1] (optional) is the path to the command-line binary, used by the
// determinism criterion.
#include <sigmar/amabc.hpp>
#include <sigmar/baselines.hpp>
#include <sigmar/evalx.hpp>
#include <sigmar/io.hpp>
#include <sigmar/model.hpp>
#include <sigmar/projection.hpp>
#include <sigmar/qmle.hpp>
#include <sigmar/simulate.hpp>

#include "test_util.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace sigmar;

namespace {

int g_failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
  std::printf("%s criterion %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

ThetaFlat theta_of(const SigmarParams& p) {
  ThetaFlat t;
  t.vecC = vec(p.C);
  t.vecPhi = vec(phi_of(p));
  t.sigma2 = p.sigma2;
  return t;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- criteria 1 and 2: desk-scale replication of the simulation study ----

void criterion_1_and_2() {
  Table1Config cfg;
  cfg.cells = {{3, 4, 2000, 50, 861}};
  cfg.methods = {"mar", "qmle", "bc"};
  cfg.seed = 7;
  Table1Report rep = replicate_table1(cfg);
  auto row = [&](const Table1Report& r, const std::string& m,
                 Eigen::Index T) -> const Table1Row& {
    for (const auto& x : r.rows)
      if (x.method == m && x.cell.T == T) return x;
    throw std::logic_error("row not found");
  };
  double bc_pi = *row(rep, "bc", 2000).rel_pi.mean;
  double mar_pi = *row(rep, "mar", 2000).rel_pi.mean;
  double qmle_c = *row(rep, "qmle", 2000).rel_c.mean;
  double bc_tpr = row(rep, "bc", 2000).tpr.mean.value();
  double bc_fpr = row(rep, "bc", 2000).fpr.mean.value();

  bool ok_bc_pi = bc_pi >= 0.047 && bc_pi <= 0.071;
  bool ok_mar_pi = mar_pi >= 0.185 && mar_pi <= 0.205;
  bool ok_qmle_c = qmle_c >= 0.09 && qmle_c <= 0.23;
  bool ok_support = bc_tpr >= 0.70 && bc_fpr <= 0.12;
  report("1", ok_bc_pi && ok_mar_pi && ok_qmle_c && ok_support,
         "(3,4) T=2000, 50 reps: BC Pi " + fmt(bc_pi) + " in [0.047,0.071] " +
             (ok_bc_pi ? "ok" : "VIOLATED") + "; MAR Pi " + fmt(mar_pi) +
             " in [0.185,0.205] " + (ok_mar_pi ? "ok" : "VIOLATED") + "; QMLE C " +
             fmt(qmle_c) + " in [0.09,0.23] " + (ok_qmle_c ? "ok" : "VIOLATED") +
             "; BC TPR " + fmt(bc_tpr) + " >= 0.70 and FPR " + fmt(bc_fpr) +
             " <= 0.12 " + (ok_support ? "ok" : "VIOLATED"));

  Table1Config cfg2;
  cfg2.cells = {{3, 4, 100, 8, 861}, {3, 4, 500, 8, 861}};
  cfg2.methods = {"mar", "bc"};
  cfg2.seed = 11;
  Table1Report rep2 = replicate_table1(cfg2);
  double mar500 = *row(rep2, "mar", 500).rel_pi.mean;
  double bc100 = *row(rep2, "bc", 100).rel_pi.mean;
  bool ok_mar = std::abs(mar500 - mar_pi) < 0.02;
  bool ok_bc = bc_pi < 0.5 * bc100;
  report("2", ok_mar && ok_bc,
         "MAR Pi plateau |" + fmt(mar500) + " - " + fmt(mar_pi) + "| < 0.02 " +
             (ok_mar ? "ok" : "VIOLATED") + "; BC Pi " + fmt(bc_pi) + " < 0.5 * " +
             fmt(bc100) + " (T=100) " + (ok_bc ? "ok" : "VIOLATED"));
}

// ---- criterion 3: analytic gradient vs central finite differences ----

void criterion_3() {
  WeightMatrix w = gen_weight(3, 31);
  std::mt19937_64 g(13);
  int checked = 0, bad = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 40 && checked < 20; ++rep) {
    SigmarParams p = testutil::random_params(2, 3, g, 0.45, 0.45);
    p.S = 0.05 * testutil::randn(6, 6, g);
    if (!check_admissible(p, w).ok()) continue;
    PanelSeries data = simulate_series(p, w, 50, 100, 100 + rep);
    ThetaFlat t = theta_of(p);
    t.sigma2 = 0.9;
    Vec grad = grad_loglik(t, data, w);
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      ThetaFlat tp = t, tm = t;
      double* cp = i < 4 ? &tp.vecC[i] : i < 40 ? &tp.vecPhi[i - 4] : &tp.sigma2;
      double* cm = i < 4 ? &tm.vecC[i] : i < 40 ? &tm.vecPhi[i - 4] : &tm.sigma2;
      double h = 1e-5 * std::max(1.0, std::abs(*cp));
      *cp += h;
      *cm -= h;
      double fd = (loglik(tp, data, w) - loglik(tm, data, w)) / (2 * h);
      double rel = std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, rel);
      if (rel > 1e-5) ++bad;  // pinned: rel tol 1e-5
    }
    ++checked;
  }
  report("3", checked >= 20 && bad == 0,
         std::to_string(checked) + " admissible points (k=2,n=3,T=50), worst rel dev " +
             fmt(worst) + " (tol 1e-5), " + std::to_string(bad) + " coordinates over");
}

// ---- criterion 4: structured log-determinant vs dense determinant ----

void criterion_4() {
  std::mt19937_64 g(41);
  std::uniform_int_distribution<int> kd(2, 6), nd(2, 10);
  std::uniform_real_distribution<double> u(0.2, 0.95);
  int bad = 0, done = 0;
  double worst = 0.0;
  while (done < 100) {
    int k = kd(g), n = nd(g);
    if (k * n > 60) continue;
    WeightMatrix w = testutil::random_weight(n, g);
    Mat C = testutil::randn(k, k, g);
    C *= u(g) / spectral_radius(C);  // rho(W) = 1, rho(C) < 1
    double structured = logdet_I_minus_kron(w.eigvals, C);
    Mat G = Mat::Identity(k * n, k * n) - kron(w.W, C);
    double dense = std::log(G.fullPivLu().determinant());
    double rel = std::abs(structured - dense) / std::max(1.0, std::abs(dense));
    worst = std::max(worst, rel);
    if (rel > 1e-8) ++bad;  // pinned: rel tol 1e-8
    ++done;
  }
  report("4", bad == 0,
         "100 random (W,C) with kn <= 60, worst rel dev " + fmt(worst) + " (tol 1e-8)");
}

// ---- criterion 5: rearrangement algebra ----

void criterion_5() {
  std::mt19937_64 g(51);
  bool ok = true;
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::Index n = 2 + rep % 4, k = 2 + rep % 3;
    BlockShape s{n, n, k, k};
    Mat W = testutil::randn(n, n, g), C = testutil::randn(k, k, g);
    // Kronecker products become rank one, exactly
    ok = ok && (rearrange(kron(W, C), s) - vec(W) * vec(C).transpose())
                       .cwiseAbs()
                       .maxCoeff() == 0.0;
    // round-trips are exact
    Mat M = testutil::randn(n * k, n * k, g);
    ok = ok && rearrange_inv(rearrange(M, s), s) == M;
    Mat N = testutil::randn(n * n, k * k, g);
    ok = ok && rearrange(rearrange_inv(N, s), s) == N;
    // companion-operator inverse identity
    BlockShape sw{s.p2, s.p1, s.d2, s.d1};
    ok = ok && rearrange2(rearrange(M.transpose(), sw).transpose(), s) == M;
  }
  report("5", ok, "50 instances: rank-one image, exact round-trips, companion identity");
}

// ---- criterion 6: alternating-directions splitting ----

void criterion_6() {
  std::mt19937_64 g(4);
  Mat u = testutil::randn(16, 1, g), v = testutil::randn(9, 1, g);
  u *= 4.0 / u.norm();
  v *= 3.0 / v.norm();
  Mat L0 = u * v.transpose();
  Mat S0 = Mat::Zero(16, 9);
  std::uniform_real_distribution<double> unif(0, 1);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int planted = 0; planted < 7;) {  // ~5% of 144
    int i = (int)(unif(g) * 16), j = (int)(unif(g) * 9);
    if (S0(i, j) == 0.0) {
      S0(i, j) = coin(g) ? 0.15 : -0.15;
      ++planted;
    }
  }
  Mat PhiTilde = L0 + S0;

  // every iterate satisfies the proximal fixed-point characterizations
  const double lambda = 1.0 / std::sqrt(12.0);  // 1/sqrt(kn), kn = 12
  const double mu = 144.0 / (4.0 * vec(PhiTilde).cwiseAbs().sum());
  Mat L = Mat::Zero(16, 9), St = L, Y = L;
  bool iterates_ok = true;
  for (int m = 0; m < 60; ++m) {
    Mat Ml = PhiTilde - St + Y / mu;
    L = svt(Ml, 1.0 / mu);
    // SVT: singular values of the output are the shrunk singular values
    Eigen::JacobiSVD<Mat> si(Ml), so(L);
    for (Eigen::Index i = 0; i < 9; ++i) {
      double want = std::max(si.singularValues()[i] - 1.0 / mu, 0.0);
      if (std::abs(so.singularValues()[i] - want) > 1e-10 * std::max(1.0, want))
        iterates_ok = false;
    }
    Mat Ms = PhiTilde - L + Y / mu;
    St = soft_threshold(Ms, lambda / mu);
    // shrinkage: exact zeros below the threshold, exact shifts above
    for (Eigen::Index j = 0; j < 9; ++j)
      for (Eigen::Index i = 0; i < 16; ++i) {
        if (St(i, j) == 0.0) {
          if (std::abs(Ms(i, j)) > lambda / mu + 1e-14) iterates_ok = false;
        } else if (std::abs(St(i, j) -
                            (Ms(i, j) - (Ms(i, j) > 0 ? 1 : -1) * lambda / mu)) > 1e-14) {
          iterates_ok = false;
        }
      }
    Y += mu * (PhiTilde - L - St);
  }

  // planted recovery at the default (lambda, mu)
  AdmmDiagnostics d;
  auto [Lr, Sr] = admm_lowrank_sparse(PhiTilde, {}, &d);
  double lerr = (Lr - L0).norm() / L0.norm();
  int fp = 0, fn = 0;
  for (Eigen::Index j = 0; j < 9; ++j)
    for (Eigen::Index i = 0; i < 16; ++i) {
      bool est = std::abs(Sr(i, j)) > 1e-8, truth = S0(i, j) != 0.0;
      if (est && !truth) ++fp;
      if (!est && truth) ++fn;
    }
  bool recovery_ok = d.converged && lerr < 1e-2 && fn == 0 && fp <= (int)(0.1 * 137);
  report("6", iterates_ok && recovery_ok,
         "prox characterizations on 60 iterates " +
             std::string(iterates_ok ? "ok" : "VIOLATED") + "; planted recovery L err " +
             fmt(lerr) + " (tol 1e-2), " + std::to_string(fp) +
             " spurious support entries (cap 13)");
}

// ---- criterion 7: bias-correction efficacy with the true transition ----

void criterion_7() {
  // zero second moments -> the correction is the identity
  ResidualMoments zero;
  zero.GammaW = Mat::Identity(3, 3) * 2.0;
  zero.SigW = Mat::Zero(3, 3);
  zero.SigW2 = Mat::Zero(3, 3);
  std::mt19937_64 g(71);
  Mat C = testutil::randn(3, 3, g);
  bool identity_ok = (bias_correct_c(C, zero) - C).cwiseAbs().maxCoeff() < 1e-14;

  WeightMatrix w = gen_weight(4, 861);
  DgpSpec spec;
  spec.seed = 861;
  SigmarParams p = gen_coefficients(spec, w);
  int wins = 0;
  for (int rep = 0; rep < 50; ++rep) {
    PanelSeries data = simulate_series(p, w, 2000, 200, 700 + rep);
    Mat C_lse = update_c_lse(data, w, phi_of(p));
    Mat C_bc = bias_correct_c(C_lse, residual_moments(data, w));
    if ((C_bc - p.C).norm() < (C_lse - p.C).norm()) ++wins;
  }
  report("7", identity_ok && wins >= 40,
         "correction wins " + std::to_string(wins) + "/50 (need >= 40); zero-moment " +
             std::string(identity_ok ? "identity ok" : "identity VIOLATED"));
}

// ---- criterion 8: Lasso optimality ----

void criterion_8() {
  WeightMatrix w = gen_weight(4, 19);
  DgpSpec spec;
  spec.seed = 19;
  SigmarParams p = gen_coefficients(spec, w);
  bool ok = true;
  int nnz_total = 0;
  for (int inst = 0; inst < 3; ++inst) {
    PanelSeries data = simulate_series(p, w, 200, 200, 20 + inst);
    detail::LassoStats st = detail::lasso_stats(data, w, p.C, p.A, p.B);
    double lmax = detail::lambda_max(st);
    // lambda >= lambda_max returns S = 0 exactly
    ok = ok && update_s_lasso(data, w, p.C, p.A, p.B, lmax * 1.0001)
                       .cwiseAbs()
                       .maxCoeff() == 0.0;
    for (double lambda : {lmax / 10.0, lmax / 50.0, lmax / 200.0}) {
      Mat S = update_s_lasso(data, w, p.C, p.A, p.B, lambda);
      Mat grad = 2.0 * (S * st.Gram - st.Cross);
      for (Eigen::Index i = 0; i < 12; ++i)
        for (Eigen::Index j = 0; j < 12; ++j) {
          if (S(i, j) == 0.0) {
            if (std::abs(grad(i, j)) > lambda + 1e-6) ok = false;  // pinned tol 1e-6
          } else {
            ++nnz_total;
            if (std::abs(grad(i, j) + lambda * (S(i, j) > 0 ? 1 : -1)) > 1e-6 * lambda)
              ok = false;
          }
        }
    }
  }
  report("8", ok && nnz_total > 0,
         "elementwise KKT at tol 1e-6 over 3 instances x 3 penalties (" +
             std::to_string(nnz_total) + " active coordinates); null threshold exact");
}

// ---- criterion 9: forecast oracle hits the reduced-noise variance ----

void criterion_9() {
  WeightMatrix w = gen_weight(4, 4);
  DgpSpec spec;
  spec.seed = 4;
  SigmarParams p = gen_coefficients(spec, w);
  ReducedForm rf = reduced_form(p, w);
  PanelSeries data = simulate_series(p, w, 3000, 200, 5);
  auto wp = [&](Eigen::Index) { return w; };
  auto oracle = [&](const PanelSeries&, const WeightMatrix&) { return rf.Pi; };
  ForecastEval ev = rolling_forecast(data, wp, oracle, 120, "oracle");

  double target = p.sigma2 * (rf.Ginv * rf.Ginv.transpose()).trace() / 12.0;
  // MC standard error from the per-period squared errors on the scored range
  std::vector<double> per_period;
  for (Eigen::Index t = 119; t + 1 < data.T(); ++t)
    per_period.push_back(
        (data.frames[t + 1] - unvec(rf.Pi * vec(data.frames[t]), 3, 4)).squaredNorm() /
        12.0);
  double mean = 0.0;
  for (double v : per_period) mean += v / per_period.size();
  double var = 0.0;
  for (double v : per_period) var += (v - mean) * (v - mean) / (per_period.size() - 1);
  double se = std::sqrt(var / per_period.size());
  double got = ev.msfe_per_variable.mean();
  bool ok = std::abs(got - target) < 3.0 * se;
  report("9", ok, "oracle rolling MSFE " + fmt(got) + " vs sigma^2 tr(Ginv Ginv^T)/(kn) = " +
                      fmt(target) + " (3 se = " + fmt(3.0 * se) + ")");
}

// ---- criterion 10: CLI determinism ----

void criterion_10(const char* cli) {
  if (!cli) {
    report("10", false, "no CLI path supplied");
    return;
  }
  std::string base = std::string(cli) +
                     " replicate-table1 --seed 7 --cells 3,4,300,3 --methods svar,mar,bc"
                     " --out /tmp/sigmar_accept_";
  int rc1 = std::system((base + "a > /dev/null 2>&1").c_str());
  int rc2 = std::system((base + "b > /dev/null 2>&1").c_str());
  bool ran = rc1 == 0 && rc2 == 0;
  bool same = ran &&
              slurp("/tmp/sigmar_accept_a/table1.csv") ==
                  slurp("/tmp/sigmar_accept_b/table1.csv") &&
              !slurp("/tmp/sigmar_accept_a/table1.csv").empty() &&
              slurp("/tmp/sigmar_accept_a/table1_bands.csv") ==
                  slurp("/tmp/sigmar_accept_b/table1_bands.csv");
  report("10", same, ran ? (same ? "two replicate-table1 --seed 7 runs are byte-identical"
                                 : "reruns differ")
                         : "CLI run failed");
}

// ---- real-data table replacement: misspecification direction ----

void criterion_t2() {
  int wins = 0;
  const int kSeeds = 20;
  for (int s = 0; s < kSeeds; ++s) {
    WeightMatrix w = gen_weight(4, 200 + s);
    DgpSpec spec;
    spec.seed = 200 + s;
    SigmarParams truth;
    for (;;) {  // some draws admit no sparse pattern for this weight; bump the seed
      try {
        truth = gen_coefficients(spec, w);
        break;
      } catch (const std::runtime_error&) {
        spec.seed += 1000;
      }
    }
    PanelSeries data = simulate_series(truth, w, 620, 200, 300 + s);
    auto wp = [&](Eigen::Index) { return w; };

    SigmarParams warm = ama_default_init(3, 4, 400 + s);
    bool have = false;
    auto bc = [&](const PanelSeries& sub, const WeightMatrix& ww) -> Mat {
      AmaConfig cfg;
      if (have) cfg.J = 30;  // warm-started refit
      AmaFit f = fit_amabc(sub, ww, warm, cfg);
      warm = f.params;
      have = true;
      return reduced_form(f.params, ww).Pi;
    };
    auto mar = [&](const PanelSeries& sub, const WeightMatrix&) -> Mat {
      return fit_mar(sub).transition;
    };
    ForecastEval eb = rolling_forecast(data, wp, bc, 120, "bc");
    ForecastEval em = rolling_forecast(data, wp, mar, 120, "mar");
    if (eb.t_test > 0 && em.t_test > 0 &&
        eb.msfe_per_variable.sum() <= em.msfe_per_variable.sum())
      ++wins;
  }
  report("T2", wins >= 14, "rolling BC beats rolling MAR on " + std::to_string(wins) +
                               "/20 network-coupled instances (need >= 14)");
}

}  // namespace

int main(int argc, char** argv) {
  const char* cli = argc > 1 ? argv[1] : nullptr;
  criterion_1_and_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10(cli);
  criterion_t2();
  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
