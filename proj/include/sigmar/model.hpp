// Domain types for the network matrix-autoregression
//   X_t = A X_{t-1} B^T + C X_t W^T + unvec(S vec(X_{t-1})) + E_t,
// plus validity checks, the identifiability normalization of (A, B), the
// reduced-form VAR transition Pi = (I - W (x) C)^{-1} (B (x) A + S), and
// one-step forecasting.
#pragma once

#include <sigmar/core.hpp>

#include <json.hpp>

#include <utility>
#include <vector>

namespace sigmar {

using json = nlohmann::json;

// Ordered sequence of T observation matrices, each k variables x n countries.
struct PanelSeries {
  Eigen::Index k = 0, n = 0;
  std::vector<Mat> frames;  // frames[t] = X_t
  std::vector<std::string> variables;  // optional labels, size k or empty
  std::vector<std::string> countries;  // optional labels, size n or empty

  Eigen::Index T() const { return static_cast<Eigen::Index>(frames.size()); }

  void validate() const {
    for (const Mat& X : frames) {
      if (X.rows() != k || X.cols() != n)
        throw std::invalid_argument("PanelSeries: frame is not k x n");
      if (!X.allFinite()) throw std::invalid_argument("PanelSeries: non-finite entry");
    }
  }
};

// Fixed n x n network matrix with cached eigenvalues.
struct WeightMatrix {
  Eigen::Index n = 0;
  Mat W;
  CVec eigvals;

  WeightMatrix() = default;
  explicit WeightMatrix(Mat w) : n(w.rows()), W(std::move(w)), eigvals(eigenvalues(W)) {
    if (W.rows() != W.cols()) throw std::invalid_argument("WeightMatrix: not square");
  }

  // Network-matrix conditions: zero diagonal, diag(W^T W) not all equal
  // (no uniform column energy), and W not antisymmetric-degenerate
  // (W + W^T != 0).  Diagnostic, not enforced at construction, because
  // degenerate W (zero, identity) are deliberately exercised in tests.
  bool assumption1_ok() const {
    if (W.diagonal().cwiseAbs().maxCoeff() > 0) return false;
    Vec d = (W.transpose() * W).diagonal();
    if ((d.array() - d[0]).abs().maxCoeff() < 1e-12) return false;
    if ((W + W.transpose()).cwiseAbs().maxCoeff() == 0) return false;
    return true;
  }
};

// Parameter bundle (A, B, C, S, sigma^2).  S is stored dense; its support is
// sparse in the intended regime but dimensions stay desk-scale.
struct SigmarParams {
  Mat A;  // k x k
  Mat B;  // n x n
  Mat C;  // k x k
  Mat S;  // kn x kn
  double sigma2 = 1.0;

  Eigen::Index k() const { return A.rows(); }
  Eigen::Index n() const { return B.rows(); }
};

// Flattened parameter theta = (vec(C), vec(Phi), sigma^2) used by the
// likelihood maximizer.
struct ThetaFlat {
  Vec vecC;    // k^2
  Vec vecPhi;  // k^2 n^2
  double sigma2 = 1.0;
};

struct ReducedForm {
  Mat Pi;    // kn x kn, (I - W (x) C)^{-1} (B (x) A + S)
  Mat Ginv;  // kn x kn
  double rho = 0.0;  // spectral radius of Pi
};

inline Mat phi_of(const SigmarParams& p) {
  const Eigen::Index kn = p.k() * p.n();
  if (p.S.rows() != kn || p.S.cols() != kn)
    throw std::invalid_argument("phi_of: S is not kn x kn");
  return kron(p.B, p.A) + p.S;
}

// Margin below 1 required of the spectral radius to count as admissible.
inline constexpr double kRadiusMargin = 1e-6;

namespace detail {
// LU factorization of G = I - W (x) C with a positivity check on det(G).
inline Eigen::PartialPivLU<Mat> factor_g(const SigmarParams& p, const WeightMatrix& w) {
  if (p.C.rows() != p.k() || w.W.rows() != p.n())
    throw std::invalid_argument("factor_g: dimension mismatch");
  const Eigen::Index kn = p.k() * p.n();
  Mat G = Mat::Identity(kn, kn) - kron(w.W, p.C);
  Eigen::PartialPivLU<Mat> lu(G);
  double sign = lu.permutationP().determinant();
  for (Eigen::Index i = 0; i < kn; ++i) {
    double u = lu.matrixLU()(i, i);
    if (std::abs(u) < 1e-300) throw std::domain_error("I - W (x) C is singular");
    if (u < 0) sign = -sign;
  }
  if (sign <= 0) throw std::domain_error("det(I - W (x) C) is not positive");
  return lu;
}
}  // namespace detail

inline ReducedForm reduced_form(const SigmarParams& p, const WeightMatrix& w) {
  auto lu = detail::factor_g(p, w);
  ReducedForm rf;
  rf.Pi = lu.solve(phi_of(p));
  rf.Ginv = lu.inverse();
  rf.rho = spectral_radius(rf.Pi);
  return rf;
}

struct AdmissibilityReport {
  bool det_positive = false;
  bool stationary = false;  // spectral_radius(Pi) < 1 - margin
  bool weight_ok = false;
  double rho = std::numeric_limits<double>::quiet_NaN();
  bool ok() const { return det_positive && stationary; }
};

inline AdmissibilityReport check_admissible(const SigmarParams& p, const WeightMatrix& w) {
  AdmissibilityReport r;
  r.weight_ok = w.assumption1_ok();
  try {
    ReducedForm rf = reduced_form(p, w);
    r.det_positive = true;
    r.rho = rf.rho;
    r.stationary = rf.rho < 1.0 - kRadiusMargin;
  } catch (const std::domain_error&) {
    r.det_positive = false;
  }
  return r;
}

// Scale gauge: ||A||_F = 1 with B absorbing the scale, sign fixed so that the
// majority of A's diagonal entries are positive (tie broken by the sign of
// trace(A), then +1).  Leaves kron(B, A) invariant.
inline std::pair<Mat, Mat> normalize_ab(const Mat& A, const Mat& B) {
  double nrm = A.norm();
  if (nrm == 0.0) throw std::invalid_argument("normalize_ab: A is zero");
  Mat An = A / nrm;
  int pos = 0, neg = 0;
  for (Eigen::Index i = 0; i < An.rows(); ++i) {
    if (An(i, i) > 0) ++pos;
    else if (An(i, i) < 0) ++neg;
  }
  double s = 1.0;
  if (neg > pos) s = -1.0;
  else if (neg == pos && An.trace() < 0) s = -1.0;
  return {s * An, s * nrm * B};
}

inline Mat one_step_forecast(const SigmarParams& p, const WeightMatrix& w, const Mat& Xt) {
  if (Xt.rows() != p.k() || Xt.cols() != p.n())
    throw std::invalid_argument("one_step_forecast: X_t dimension mismatch");
  AdmissibilityReport rep = check_admissible(p, w);
  if (!rep.ok()) throw std::domain_error("one_step_forecast: inadmissible parameters");
  auto lu = detail::factor_g(p, w);
  return unvec(lu.solve(phi_of(p) * vec(Xt)), p.k(), p.n());
}

// ---- JSON serialization ----

inline json mat_to_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const json& j) {
  const auto r = j.size();
  if (r == 0) return Mat(0, 0);
  const auto c = j.at(0).size();
  Mat M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (size_t i = 0; i < r; ++i) {
    if (j.at(i).size() != c) throw std::invalid_argument("mat_from_json: ragged rows");
    for (size_t jj = 0; jj < c; ++jj) M(i, jj) = j.at(i).at(jj).get<double>();
  }
  return M;
}

inline json to_json(const SigmarParams& p) {
  json s = json::array();
  for (Eigen::Index c = 0; c < p.S.cols(); ++c)
    for (Eigen::Index r = 0; r < p.S.rows(); ++r)
      if (p.S(r, c) != 0.0) s.push_back({r, c, p.S(r, c)});
  return json{{"k", p.k()},          {"n", p.n()},          {"A", mat_to_json(p.A)},
              {"B", mat_to_json(p.B)}, {"C", mat_to_json(p.C)}, {"S", std::move(s)},
              {"sigma2", p.sigma2}};
}

inline SigmarParams params_from_json(const json& j) {
  SigmarParams p;
  const auto k = j.at("k").get<Eigen::Index>();
  const auto n = j.at("n").get<Eigen::Index>();
  p.A = mat_from_json(j.at("A"));
  p.B = mat_from_json(j.at("B"));
  p.C = mat_from_json(j.at("C"));
  if (p.A.rows() != k || p.B.rows() != n || p.C.rows() != k)
    throw std::invalid_argument("params_from_json: dimension mismatch");
  p.S = Mat::Zero(k * n, k * n);
  for (const auto& t : j.at("S"))
    p.S(t.at(0).get<Eigen::Index>(), t.at(1).get<Eigen::Index>()) = t.at(2).get<double>();
  p.sigma2 = j.at("sigma2").get<double>();
  return p;
}

}  // namespace sigmar
