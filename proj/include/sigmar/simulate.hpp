// Data-generating process for the simulation study: random coefficients
// rescaled to spectral-radius targets, a planted sparse S, a random
// row-normalized weight matrix, and stationary series simulation.
#pragma once

#include <sigmar/core.hpp>
#include <sigmar/model.hpp>

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace sigmar {

// All randomness flows through mt19937_64 seeded by splitmix64 of
// (seed XOR replication-index), giving documented per-replication streams
// that are reproducible independent of scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(splitmix64(seed ^ stream));
}

struct DgpSpec {
  Eigen::Index k = 3, n = 4;
  Eigen::Index s = 10;       // nonzero count of S
  double rho_ar = 0.6;       // target rho(A) * rho(B)
  double rho_sp = 0.6;       // target rho(C)
  double s_mag = 0.15;       // magnitude of planted S entries
  double sigma = 1.0;        // noise sd
  Eigen::Index T = 500;
  Eigen::Index burn_in = 200;
  std::uint64_t seed = 0;
};

namespace detail {
inline Mat randn_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& g) {
  std::normal_distribution<double> d;
  Mat M(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) M(i, j) = d(g);
  return M;
}
}  // namespace detail

// Random uniform weight matrix: zero diagonal, each row normalized to sum 1.
// Resamples (with incremented seed) in the measure-zero event the network
// conditions fail.
inline WeightMatrix gen_weight(Eigen::Index n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_weight: n must be >= 2");
  for (int attempt = 0; attempt < 10; ++attempt) {
    auto g = make_rng(seed + attempt, 0x57454947 /* "WEIG" */);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat W(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) W(i, j) = i == j ? 0.0 : u(g);
    for (Eigen::Index i = 0; i < n; ++i) W.row(i) /= W.row(i).sum();
    WeightMatrix w(W);
    if (n == 2 || w.assumption1_ok()) return w;
  }
  throw std::runtime_error("gen_weight: failed network conditions after 10 tries");
}

// A, B, C with standard-normal entries rescaled so rho(A)rho(B) = rho_ar
// (scale split evenly between the two factors) and rho(C) = rho_sp; S has
// exactly spec.s nonzeros of magnitude +/- s_mag at distinct random
// positions.  The S pattern is resampled (and, every 100 failures, its
// magnitude halved) until the parameters are admissible for the given W.
inline SigmarParams gen_coefficients(const DgpSpec& spec, const WeightMatrix& w) {
  if (spec.s > spec.k * spec.k * spec.n * spec.n)
    throw std::invalid_argument("gen_coefficients: s exceeds k^2 n^2");
  auto g = make_rng(spec.seed, 0x434f4546 /* "COEF" */);
  SigmarParams p;
  p.A = detail::randn_mat(spec.k, spec.k, g);
  p.B = detail::randn_mat(spec.n, spec.n, g);
  p.C = detail::randn_mat(spec.k, spec.k, g);
  const double scale = std::sqrt(spec.rho_ar / (spectral_radius(p.A) * spectral_radius(p.B)));
  p.A *= scale;
  p.B *= scale;
  p.C *= spec.rho_sp / spectral_radius(p.C);
  p.sigma2 = spec.sigma * spec.sigma;

  const Eigen::Index kn = spec.k * spec.n;
  std::vector<Eigen::Index> cells(kn * kn);
  for (Eigen::Index i = 0; i < kn * kn; ++i) cells[i] = i;
  double mag = spec.s_mag;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    if (attempt > 0 && attempt % 100 == 0) mag /= 2.0;
    std::shuffle(cells.begin(), cells.end(), g);
    std::uniform_int_distribution<int> coin(0, 1);
    p.S = Mat::Zero(kn, kn);
    for (Eigen::Index i = 0; i < spec.s; ++i)
      p.S(cells[i] % kn, cells[i] / kn) = coin(g) ? mag : -mag;
    if (check_admissible(p, w).ok()) return p;
  }
  throw std::runtime_error("gen_coefficients: no admissible S pattern found");
}

// Iterate vec(X_t) = Pi vec(X_{t-1}) + G^{-1} vec(E_t) from a zero start,
// discarding burn_in frames; E_t entries are iid N(0, params.sigma2).
inline PanelSeries simulate_series(const SigmarParams& p, const WeightMatrix& w,
                                   Eigen::Index T, Eigen::Index burn_in,
                                   std::uint64_t seed) {
  AdmissibilityReport rep = check_admissible(p, w);
  if (!rep.ok()) throw std::domain_error("simulate_series: inadmissible parameters");
  ReducedForm rf = reduced_form(p, w);
  const Eigen::Index k = p.k(), n = p.n();
  auto g = make_rng(seed, 0x53494d55 /* "SIMU" */);
  std::normal_distribution<double> nd(0.0, std::sqrt(p.sigma2));

  PanelSeries out;
  out.k = k;
  out.n = n;
  out.frames.reserve(T);
  Vec x = Vec::Zero(k * n), e(k * n);
  for (Eigen::Index t = 0; t < burn_in + T; ++t) {
    for (Eigen::Index i = 0; i < k * n; ++i) e[i] = nd(g);
    x = rf.Pi * x + rf.Ginv * e;
    if (t >= burn_in) out.frames.push_back(unvec(x, k, n));
  }
  return out;
}

}  // namespace sigmar
