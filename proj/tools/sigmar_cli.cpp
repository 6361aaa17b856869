// Command-line front end: simulation, estimation, low-rank + sparse
// projection, rolling forecasting, method benchmarking, and the replication
// table driver. All outputs are deterministic given (config, seed); reruns
// produce byte-identical files.
//
// Exit codes: 0 success, 2 validation error (bad flags, malformed input,
// inadmissible parameters), 3 numerical failure.
#include <CLI11.hpp>

#include <sigmar/amabc.hpp>
#include <sigmar/baselines.hpp>
#include <sigmar/evalx.hpp>
#include <sigmar/io.hpp>
#include <sigmar/model.hpp>
#include <sigmar/projection.hpp>
#include <sigmar/qmle.hpp>
#include <sigmar/simulate.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sigmar;

namespace {

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << body;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path ensure_out(const std::string& out) {
  if (out.empty()) throw std::invalid_argument("--out is required");
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace((unsigned char)c)) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

json forecaster_to_json(const LinearForecaster& f) {
  json j{{"method", kind_name(f.kind)}, {"k", f.k}, {"n", f.n},
         {"warning", f.warning},        {"transition", mat_to_json(f.transition)}};
  if (!f.phi_blocks.empty()) {
    json blocks = json::array();
    for (const auto& b : f.phi_blocks) blocks.push_back(mat_to_json(b));
    j["phi_blocks"] = std::move(blocks);
  }
  if (!f.psi_blocks.empty()) {
    json blocks = json::array();
    for (const auto& b : f.psi_blocks) blocks.push_back(mat_to_json(b));
    j["psi_blocks"] = std::move(blocks);
  }
  if (f.kind == ForecasterKind::mar) {
    j["A"] = mat_to_json(f.A);
    j["B"] = mat_to_json(f.B);
  }
  return j;
}

std::string forecast_csv(const std::vector<ForecastEval>& evs,
                         const std::vector<std::string>& variables) {
  std::string body = "method,variable,msfe\n";
  for (const auto& ev : evs)
    for (Eigen::Index i = 0; i < ev.msfe_per_variable.size(); ++i) {
      std::string var = (Eigen::Index)variables.size() == ev.msfe_per_variable.size()
                            ? variables[i]
                            : "v" + std::to_string(i);
      body += ev.method + "," + var + "," + detail::fmt_stat(ev.msfe_per_variable(i)) +
              "\n";
    }
  return body;
}

json forecast_to_json(const ForecastEval& ev) {
  json msfe = json::array();
  for (Eigen::Index i = 0; i < ev.msfe_per_variable.size(); ++i)
    msfe.push_back(ev.msfe_per_variable(i));
  return json{{"method", ev.method}, {"window", ev.window},   {"t_test", ev.t_test},
              {"failures", ev.failures}, {"msfe_per_variable", std::move(msfe)}};
}

// One-step transition fitter per method name. The network estimators
// warm-start from the previous window after the first fit.
TransitionFitter make_fitter(const std::string& method, Eigen::Index k, Eigen::Index n,
                             std::uint64_t seed) {
  if (method == "iar")
    return [](const PanelSeries& s, const WeightMatrix&) { return fit_iar(s).transition; };
  if (method == "ivar")
    return [](const PanelSeries& s, const WeightMatrix&) { return fit_ivar(s).transition; };
  if (method == "ivarx")
    return [](const PanelSeries& s, const WeightMatrix& w) {
      return fit_ivarx(s, w).transition;
    };
  if (method == "svar")
    return [](const PanelSeries& s, const WeightMatrix&) { return fit_svar(s).transition; };
  if (method == "mar")
    return [](const PanelSeries& s, const WeightMatrix&) { return fit_mar(s).transition; };
  if (method == "bc" || method == "ama-naive") {
    auto state = std::make_shared<std::pair<SigmarParams, bool>>(
        ama_default_init(k, n, seed), false);
    bool bias = method == "bc";
    return [state, bias](const PanelSeries& s, const WeightMatrix& w) {
      AmaConfig cfg;
      cfg.bias_correction = bias;
      if (state->second) cfg.J = 30;  // warm-started refit
      AmaFit f = fit_amabc(s, w, state->first, cfg);
      *state = {f.params, true};
      return reduced_form(f.params, w).Pi;
    };
  }
  if (method == "qmle")
    return [seed, k, n](const PanelSeries& s, const WeightMatrix& w) {
      AmaConfig warm_cfg;
      warm_cfg.bias_correction = false;
      warm_cfg.J = 1;
      AmaFit warm = fit_amabc(s, w, ama_default_init(k, n, seed), warm_cfg);
      QmleReport q = fit_qmle(s, w, warm.params);
      Mat C = unvec(q.theta_hat.vecC, k, k);
      Mat Phi = unvec(q.theta_hat.vecPhi, k * n, k * n);
      Mat G = Mat::Identity(k * n, k * n) - kron(w.W, C);
      return Mat(G.fullPivLu().solve(Phi));
    };
  throw std::invalid_argument("unknown method " + method);
}

struct CommonOpts {
  std::string config, out;
  std::uint64_t seed = 1;
  int reps = 0;  // 0 = subcommand default
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config, "flat key-value config file");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--reps", c.reps, "replication count");
  cmd->add_option("--jobs", c.jobs, "concurrent replications");
}

// Flat key-value config grammar: one `key = value` per line, '#' comments,
// keys are the subcommand's long option names without dashes. Values given
// on the command line take precedence.
void apply_config(CLI::App* cmd, const CommonOpts& c) {
  if (c.config.empty()) return;
  std::ifstream in(c.config);
  if (!in) throw std::invalid_argument("cannot open config " + c.config);
  std::string line;
  long lineno = 0;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config " + c.config + " line " +
                                  std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (!opt || key == "config")
      throw std::invalid_argument("config key '" + key + "' is not an option of " +
                                  cmd->get_name());
    if (opt->count() == 0) {
      opt->add_result(value);
      opt->run_callback();
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matrix autoregression with network interactions"};
  app.require_subcommand(1);

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "draw coefficients and a sample path");
  CommonOpts sim_c;
  Eigen::Index sim_k = 3, sim_n = 4, sim_T = 500, sim_s = -1;
  add_common(sim, sim_c);
  sim->add_option("--k", sim_k, "variables per country");
  sim->add_option("--n", sim_n, "countries");
  sim->add_option("--T", sim_T, "sample length");
  sim->add_option("--s", sim_s, "planted nonzeros in S (-1 = shape default)");

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "estimate a model on a panel CSV");
  CommonOpts fit_c;
  std::string fit_method, fit_data, fit_weight;
  add_common(fit, fit_c);
  fit->add_option("--method", fit_method,
                  "qmle|bc|ama-naive|iar|ivar|ivarx|svar|mar");
  fit->add_option("--data", fit_data, "panel CSV");
  fit->add_option("--weight", fit_weight, "weight matrix CSV (network methods)");

  // ---- project ----
  auto* proj = app.add_subcommand("project", "low-rank + sparse transition split");
  CommonOpts proj_c;
  std::string proj_phi;
  Eigen::Index proj_k = 0, proj_n = 0;
  add_common(proj, proj_c);
  proj->add_option("--phi", proj_phi, "kn x kn transition CSV");
  proj->add_option("--k", proj_k, "variables per country");
  proj->add_option("--n", proj_n, "countries");

  // ---- forecast ----
  auto* fc = app.add_subcommand("forecast", "rolling one-step forecast evaluation");
  CommonOpts fc_c;
  std::string fc_method, fc_data, fc_weight;
  Eigen::Index fc_window = 120;
  add_common(fc, fc_c);
  fc->add_option("--method", fc_method, "fitting method");
  fc->add_option("--data", fc_data, "panel CSV");
  fc->add_option("--weight", fc_weight, "weight matrix CSV");
  fc->add_option("--window", fc_window, "rolling window length");

  // ---- benchmark ----
  auto* bm = app.add_subcommand("benchmark", "rolling comparison of several methods");
  CommonOpts bm_c;
  std::string bm_methods = "iar,ivar,svar,mar,bc", bm_data, bm_weight;
  Eigen::Index bm_window = 120;
  add_common(bm, bm_c);
  bm->add_option("--methods", bm_methods, "comma-separated method list");
  bm->add_option("--data", bm_data, "panel CSV");
  bm->add_option("--weight", bm_weight, "weight matrix CSV");
  bm->add_option("--window", bm_window, "rolling window length");

  // ---- replicate-table1 ----
  auto* rt = app.add_subcommand("replicate-table1", "simulation study replication");
  CommonOpts rt_c;
  rt_c.seed = 7;
  std::string rt_cells, rt_methods;
  add_common(rt, rt_c);
  rt->add_option("--cells", rt_cells,
                 "semicolon list of k,n,T[,reps[,dgp_seed]] (default (3,4) x four T)");
  rt->add_option("--methods", rt_methods, "comma-separated subset of svar,mar,qmle,bc");

  try {
    app.parse(argc, argv);

    if (sim->parsed()) {
      apply_config(sim, sim_c);
      fs::path dir = ensure_out(sim_c.out);
      WeightMatrix w = gen_weight(sim_n, sim_c.seed);
      DgpSpec spec;
      spec.k = sim_k;
      spec.n = sim_n;
      spec.seed = sim_c.seed;
      spec.s = sim_s >= 0 ? sim_s : (sim_k == 3 ? 10 : (sim_k == 4 ? 20 : 30));
      SigmarParams p = gen_coefficients(spec, w);
      PanelSeries series = simulate_series(p, w, sim_T, 200, sim_c.seed);
      write_panel_csv(series, (dir / "series.csv").string());
      write_mat_csv(w.W, (dir / "weight.csv").string());
      write_json(dir / "truth.json", to_json(p));
    } else if (fit->parsed()) {
      apply_config(fit, fit_c);
      if (fit_method.empty()) throw std::invalid_argument("--method is required");
      if (fit_data.empty()) throw std::invalid_argument("--data is required");
      fs::path dir = ensure_out(fit_c.out);
      PanelSeries data = load_panel_csv(fit_data);
      bool needs_w = fit_method == "qmle" || fit_method == "bc" ||
                     fit_method == "ama-naive" || fit_method == "ivarx";
      if (needs_w && fit_weight.empty())
        throw std::invalid_argument("--weight is required for method " + fit_method);
      WeightMatrix w = needs_w ? WeightMatrix(load_mat_csv(fit_weight))
                               : WeightMatrix(Mat::Zero(data.n, data.n));
      json report{{"method", fit_method}};
      Mat transition;
      if (fit_method == "qmle") {
        AmaConfig warm_cfg;
        warm_cfg.bias_correction = false;
        warm_cfg.J = 1;
        AmaFit warm =
            fit_amabc(data, w, ama_default_init(data.k, data.n, fit_c.seed), warm_cfg);
        QmleReport q = fit_qmle(data, w, warm.params);
        Mat C = unvec(q.theta_hat.vecC, data.k, data.k);
        Mat Phi = unvec(q.theta_hat.vecPhi, data.k * data.n, data.k * data.n);
        Mat G = Mat::Identity(data.k * data.n, data.k * data.n) - kron(w.W, C);
        transition = G.fullPivLu().solve(Phi);
        report["C"] = mat_to_json(C);
        report["Phi"] = mat_to_json(Phi);
        report["sigma2"] = q.theta_hat.sigma2;
        report["loglik"] = q.loglik;
        report["iterations"] = q.iterations;
        report["converged"] = q.converged;
        report["grad_norm"] = q.grad_norm;
      } else if (fit_method == "bc" || fit_method == "ama-naive") {
        AmaConfig cfg;
        cfg.bias_correction = fit_method == "bc";
        AmaFit f = fit_amabc(data, w, ama_default_init(data.k, data.n, fit_c.seed), cfg);
        transition = reduced_form(f.params, w).Pi;
        report["params"] = to_json(f.params);
        report["iterations"] = f.iterations;
        report["converged"] = f.converged;
        report["lambda"] = f.lambda;
      } else if (fit_method == "iar" || fit_method == "ivar" || fit_method == "ivarx" ||
                 fit_method == "svar" || fit_method == "mar") {
        LinearForecaster f = fit_method == "iar"     ? fit_iar(data)
                             : fit_method == "ivar"  ? fit_ivar(data)
                             : fit_method == "ivarx" ? fit_ivarx(data, w)
                             : fit_method == "svar"  ? fit_svar(data)
                                                     : fit_mar(data);
        transition = f.transition;
        report = forecaster_to_json(f);
      } else {
        throw std::invalid_argument("unknown method " + fit_method);
      }
      write_json(dir / "fit.json", report);
      write_mat_csv(transition, (dir / "transition.csv").string());
    } else if (proj->parsed()) {
      apply_config(proj, proj_c);
      if (proj_phi.empty()) throw std::invalid_argument("--phi is required");
      if (proj_k < 1 || proj_n < 1)
        throw std::invalid_argument("--k and --n are required");
      fs::path dir = ensure_out(proj_c.out);
      Mat Phi = load_mat_csv(proj_phi);
      ProjectionResult res = project_phi(Phi, proj_k, proj_n);
      write_json(dir / "projection.json",
                 json{{"k", proj_k},
                      {"n", proj_n},
                      {"A", mat_to_json(res.A)},
                      {"B", mat_to_json(res.B)},
                      {"S", mat_to_json(res.S)},
                      {"residual", res.residual},
                      {"primal_residual", res.primal_residual},
                      {"iterations", res.iterations}});
    } else if (fc->parsed()) {
      apply_config(fc, fc_c);
      if (fc_method.empty()) throw std::invalid_argument("--method is required");
      if (fc_data.empty()) throw std::invalid_argument("--data is required");
      fs::path dir = ensure_out(fc_c.out);
      PanelSeries data = load_panel_csv(fc_data);
      WeightMatrix w = fc_weight.empty() ? WeightMatrix(Mat::Zero(data.n, data.n))
                                         : WeightMatrix(load_mat_csv(fc_weight));
      auto wp = [&](Eigen::Index) { return w; };
      TransitionFitter fitter = make_fitter(fc_method, data.k, data.n, fc_c.seed);
      ForecastEval ev = rolling_forecast(data, wp, fitter, fc_window, fc_method);
      write_text(dir / "forecast.csv", forecast_csv({ev}, data.variables));
      write_json(dir / "forecast.json", forecast_to_json(ev));
    } else if (bm->parsed()) {
      apply_config(bm, bm_c);
      if (bm_data.empty()) throw std::invalid_argument("--data is required");
      fs::path dir = ensure_out(bm_c.out);
      PanelSeries data = load_panel_csv(bm_data);
      WeightMatrix w = bm_weight.empty() ? WeightMatrix(Mat::Zero(data.n, data.n))
                                         : WeightMatrix(load_mat_csv(bm_weight));
      auto wp = [&](Eigen::Index) { return w; };
      std::vector<ForecastEval> evs;
      json jall = json::array();
      for (const auto& m : split_list(bm_methods, ',')) {
        TransitionFitter fitter = make_fitter(m, data.k, data.n, bm_c.seed);
        evs.push_back(rolling_forecast(data, wp, fitter, bm_window, m));
        jall.push_back(forecast_to_json(evs.back()));
      }
      write_text(dir / "benchmark.csv", forecast_csv(evs, data.variables));
      write_json(dir / "benchmark.json", jall);
    } else if (rt->parsed()) {
      apply_config(rt, rt_c);
      fs::path dir = ensure_out(rt_c.out);
      Table1Config cfg;
      cfg.seed = rt_c.seed;
      cfg.jobs = rt_c.jobs;
      if (!rt_methods.empty()) cfg.methods = split_list(rt_methods, ',');
      for (const auto& cell_str : split_list(rt_cells, ';')) {
        auto f = split_list(cell_str, ',');
        if (f.size() < 3 || f.size() > 5)
          throw std::invalid_argument("--cells entry must be k,n,T[,reps[,dgp_seed]]");
        Table1Cell cell;
        cell.k = std::stol(f[0]);
        cell.n = std::stol(f[1]);
        cell.T = std::stol(f[2]);
        cell.reps = f.size() > 3 ? std::stoi(f[3]) : 50;
        cell.dgp_seed =
            f.size() > 4 ? std::stoull(f[4]) : default_dgp_seed(cell.k, cell.n);
        cfg.cells.push_back(cell);
      }
      if (rt_c.reps > 0)
        for (auto& cell : cfg.cells) cell.reps = rt_c.reps;
      if (cfg.cells.empty() && rt_c.reps > 0)
        for (Eigen::Index T : {100, 500, 1000, 2000})
          cfg.cells.push_back({3, 4, T, rt_c.reps, 861});
      Table1Report report = replicate_table1(cfg);
      write_table1_csv(report, (dir / "table1.csv").string());
      write_table1_bands_csv(report, (dir / "table1_bands.csv").string());
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help and friends are not errors
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
