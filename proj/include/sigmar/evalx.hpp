// Evaluation utilities: relative errors, sparse-support confusion metrics,
// per-variable mean squared forecast error, and a fixed-length rolling-window
// one-step-ahead forecast engine that refits the supplied method each step.
#pragma once

#include <sigmar/core.hpp>
#include <sigmar/model.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sigmar {

struct SupportMetrics {
  std::optional<double> fpr;  // absent when S0 has no zero entries
  std::optional<double> tpr;  // absent when S0 has no nonzero entries
};

struct ForecastEval {
  Vec msfe_per_variable;  // k entries
  Eigen::Index window = 0;
  Eigen::Index t_test = 0;  // forecasts actually scored
  std::string method;
  int failures = 0;  // windows whose fit failed (excluded from averages)
};

inline double relative_error(const Mat& est, const Mat& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols())
    throw std::invalid_argument("relative_error: shape mismatch");
  double denom = truth.norm();
  if (denom == 0.0) throw std::domain_error("relative_error: zero reference matrix");
  return (est - truth).norm() / denom;
}

inline SupportMetrics support_metrics(const Mat& s_hat, const Mat& s0,
                                      double zero_tol = 1e-8) {
  if (s_hat.rows() != s0.rows() || s_hat.cols() != s0.cols())
    throw std::invalid_argument("support_metrics: shape mismatch");
  Eigen::Index tp = 0, fp = 0, pos = 0, neg = 0;
  for (Eigen::Index j = 0; j < s0.cols(); ++j)
    for (Eigen::Index i = 0; i < s0.rows(); ++i) {
      bool est = std::abs(s_hat(i, j)) > zero_tol;
      if (std::abs(s0(i, j)) > zero_tol) {
        ++pos;
        if (est) ++tp;
      } else {
        ++neg;
        if (est) ++fp;
      }
    }
  SupportMetrics m;
  if (neg > 0) m.fpr = static_cast<double>(fp) / static_cast<double>(neg);
  if (pos > 0) m.tpr = static_cast<double>(tp) / static_cast<double>(pos);
  return m;
}

// Per-variable mean squared forecast error: for variable i,
// (1/T_test) sum_t (1/n) || row i of (actual - forecast) ||^2.
inline Vec msfe(const std::vector<Mat>& forecasts, const std::vector<Mat>& actuals) {
  if (forecasts.size() != actuals.size())
    throw std::invalid_argument("msfe: length mismatch");
  if (forecasts.empty()) throw std::invalid_argument("msfe: no forecasts");
  const Eigen::Index k = actuals.front().rows(), n = actuals.front().cols();
  Vec out = Vec::Zero(k);
  for (std::size_t t = 0; t < forecasts.size(); ++t) {
    if (forecasts[t].rows() != k || forecasts[t].cols() != n ||
        actuals[t].rows() != k || actuals[t].cols() != n)
      throw std::invalid_argument("msfe: shape mismatch at step " + std::to_string(t));
    Mat diff = actuals[t] - forecasts[t];
    for (Eigen::Index i = 0; i < k; ++i)
      out(i) += diff.row(i).squaredNorm() / static_cast<double>(n);
  }
  return out / static_cast<double>(forecasts.size());
}

// A method is anything that maps an in-sample window (plus the weight matrix
// valid at its end) to a kn x kn one-step transition. Stateful lambdas may
// warm-start themselves across windows.
using TransitionFitter = std::function<Mat(const PanelSeries&, const WeightMatrix&)>;
using WeightProvider = std::function<WeightMatrix(Eigen::Index t)>;

// Fixed-length rolling window: for each t in [window-1, T-2] fit on frames
// [t-window+1 .. t] and score the one-step forecast of frame t+1. Fit
// failures are counted and excluded from the averages.
inline ForecastEval rolling_forecast(const PanelSeries& series, const WeightProvider& wp,
                                     const TransitionFitter& fit_method,
                                     Eigen::Index window,
                                     const std::string& method_name = "") {
  series.validate();
  if (window < 2) throw std::invalid_argument("rolling_forecast: window < 2");
  if (series.T() <= window)
    throw std::invalid_argument("rolling_forecast: need T > window");
  const Eigen::Index k = series.k;
  std::vector<Mat> forecasts, actuals;
  ForecastEval ev;
  ev.window = window;
  ev.method = method_name;
  for (Eigen::Index t = window - 1; t + 1 < series.T(); ++t) {
    PanelSeries sub;
    sub.k = series.k;
    sub.n = series.n;
    sub.frames.assign(series.frames.begin() + (t - window + 1),
                      series.frames.begin() + (t + 1));
    WeightMatrix w = wp(t);
    try {
      Mat transition = fit_method(sub, w);
      forecasts.push_back(unvec(transition * vec(series.frames[t]), series.k, series.n));
      actuals.push_back(series.frames[t + 1]);
    } catch (const std::exception&) {
      ++ev.failures;
    }
  }
  ev.t_test = static_cast<Eigen::Index>(forecasts.size());
  ev.msfe_per_variable = forecasts.empty() ? Vec::Zero(k) : msfe(forecasts, actuals);
  return ev;
}

}  // namespace sigmar
