#include "regen/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "regen/errors.hpp"
#include "regen/jump_process.hpp"
#include "regen/svg.hpp"

#ifndef REGEN_VERSION
#define REGEN_VERSION "0.0.0"
#endif

namespace regen {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    const fs::path target = dir_ / name;
    const fs::path tmp = dir_ / (name + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write " + tmp.string());
      out << content;
      out.flush();
      if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

json report_json(const TestReport& r) {
  json j;
  j["name"] = r.name;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["n_samples"] = r.n_samples;
  j["alpha"] = r.alpha;
  j["pass"] = r.pass;
  j["degenerate"] = r.degenerate;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

SimulationSetup make_setup(const Experiment& ex, const DriverConfig& driver, std::span<const Functional> xis) {
  return SimulationSetup{ex.sg.get(), &driver, ex.cfg.policy, ex.cfg.quad, xis};
}

std::size_t scalar_target(const Experiment& ex) {
  for (std::size_t f = 0; f < ex.functionals.size(); ++f) {
    if (ex.functionals[f].scalar_valued()) return f;
  }
  throw ConfigError("this command needs at least one scalar-valued functional");
}

std::vector<double> default_checkpoints(double t_end) {
  std::vector<double> cps;
  for (double decade = 1.0; decade < t_end; decade *= 10.0) {
    for (double m : {1.0, 2.0, 5.0}) {
      if (m * decade < t_end) cps.push_back(m * decade);
    }
  }
  cps.push_back(t_end);
  return cps;
}

bool degenerate_sigma(double sigma2, double mean_s, double mean_tau) {
  const double scale = std::max(1.0, mean_s * mean_s / std::max(mean_tau, 1e-300));
  return !(sigma2 > 1e-20 * scale);
}

struct DriftGate {
  DriftEstimate estimate;
  KappaInfo kappa;
  json j;
};

json kappa_json(const KappaInfo& k) {
  json j;
  j["value"] = k.kappa;
  j["rho"] = k.rho;
  j["source"] = k.source;
  if (k.fit) {
    j["fit_residual"] = k.fit->fit_residual;
    j["samples_used"] = k.fit->samples_used;
  }
  return j;
}

DriftGate evaluate_drift(const Experiment& ex) {
  DriftGate g;
  g.kappa = resolve_kappa(ex);
  g.estimate = check_drift_condition(ex.cfg.driver, g.kappa.kappa, g.kappa.rho, ex.sg->norms(), ex.shape,
                                     ex.cfg.run.drift_mc);
  g.j["lhs_estimate"] = g.estimate.lhs_estimate;
  g.j["ci_halfwidth"] = g.estimate.ci_halfwidth;
  g.j["exact"] = g.estimate.exact;
  g.j["ok"] = g.estimate.ok;
  g.j["mean_beta"] = g.estimate.mean_beta;
  g.j["mean_eta_rho"] = g.estimate.mean_eta_rho;
  g.j["kappa"] = kappa_json(g.kappa);
  return g;
}

/// Runs the drift check before a simulation; violations are fatal unless
/// forced.
json require_drift(const Experiment& ex, bool force, std::ostream& log) {
  DriftGate g = evaluate_drift(ex);
  log << "drift: " << g.estimate.lhs_estimate << " +- " << g.estimate.ci_halfwidth
      << (g.estimate.ok ? " (ok)" : " (VIOLATED)") << "\n";
  if (!g.estimate.ok) {
    if (!force) {
      throw DriftViolated("drift condition violated: -kappa E[beta] + E||eta||^rho = " +
                          std::to_string(g.estimate.lhs_estimate) + " (+- " +
                          std::to_string(g.estimate.ci_halfwidth) + ") is not < 0; rerun with --force to override");
    }
    g.j["forced"] = true;
  }
  return g.j;
}

json base_summary(const std::string& command, const Experiment& ex) {
  json j;
  j["command"] = command;
  j["backend"] = ex.cfg.backend == Backend::Scalar ? "scalar" : "plaplace";
  j["config_hash"] = ex.cfg.hash;
  j["beta_law"] = ex.cfg.driver.beta.describe();
  j["eta_law"] = ex.cfg.driver.eta.describe();
  j["functionals"] = ex.functional_names;
  return j;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const Experiment& ex, Outputs& out, std::ostream& log) {
  json s = base_summary("validate", ex);
  DriftGate g = evaluate_drift(ex);
  s["kappa"] = kappa_json(g.kappa);
  s["drift"] = g.j;
  log << "kappa = " << g.kappa.kappa << " (" << g.kappa.source << "), rho = " << g.kappa.rho << "\n";
  log << "drift lhs = " << g.estimate.lhs_estimate << " +- " << g.estimate.ci_halfwidth
      << (g.estimate.exact ? " (exact)" : " (99% CI)") << (g.estimate.ok ? ": ok" : ": VIOLATED") << "\n";

  const auto moments = check_moments(ex.cfg.driver, ex.sg->norms(), ex.shape, ex.cfg.run.moment_draws);
  bool moments_ok = true;
  json mj = json::array();
  for (const auto& m : moments) {
    json e;
    e["name"] = m.name;
    e["order"] = m.order;
    e["empirical"] = m.empirical;
    e["analytic"] = m.analytic ? json(*m.analytic) : json(nullptr);
    e["standard_error"] = m.standard_error;
    e["finite"] = m.finite;
    e["ok"] = m.ok;
    mj.push_back(e);
    moments_ok = moments_ok && m.ok;
    log << "moment " << m.name << ": empirical " << m.empirical;
    if (m.analytic) log << ", analytic " << *m.analytic << ", se " << m.standard_error;
    log << (m.ok ? " ok" : " FAIL") << "\n";
  }
  s["moments"] = mj;
  s["pass"] = g.estimate.ok && moments_ok;
  out.write_json("summary.json", s);
  if (!g.estimate.ok) return kExitDrift;
  return moments_ok ? kExitOk : kExitSuite;
}

// ------------------------------------------------------- semigroup-check

struct CheckRow {
  std::string kind;
  double t = 0.0, s = 0.0;
  double semigroup = 0.0, contraction = 0.0, identity = 0.0, extinction = 0.0, mass = 0.0;
  double contraction_l1 = 0.0, contraction_l2 = 0.0, contraction_linf = 0.0;
  std::string status = "ok";
};

int cmd_semigroup_check(const Experiment& ex, Outputs& out, std::ostream& log) {
  json s = base_summary("semigroup-check", ex);
  const Semigroup& sg = *ex.sg;
  Philox rng = derive_stream(ex.cfg.driver.master_seed, 0, Stream::Aux);
  const std::uint64_t n = ex.cfg.run.axiom_samples;
  std::vector<CheckRow> rows;
  bool runtime_error = false;

  struct Tol {
    const char* name;
    double tol;
    double worst = 0.0;
  };
  std::vector<Tol> checks;

  if (sg.is_scalar()) {
    const ExtinctionParams prm = sg.scalar_params();
    checks = {{"semigroup", 1e-12}, {"contraction", 1e-12}, {"identity", 1e-12}, {"extinction_equality", 1e-12}};
    for (std::uint64_t i = 0; i < n; ++i) {
      AxiomSample a;
      a.v = StateVector::scalar(6.0 * rng.uniform() - 3.0);
      a.u = StateVector::scalar(6.0 * rng.uniform() - 3.0);
      a.t = 3.0 * rng.uniform();
      a.s = 3.0 * rng.uniform();
      const AxiomReport rep = check_semigroup_axioms(sg, std::span<const AxiomSample>(&a, 1));
      CheckRow r;
      r.kind = "scalar";
      r.t = a.t;
      r.s = a.s;
      r.semigroup = rep.residuals[0].semigroup;
      r.contraction = rep.residuals[0].contraction;
      r.identity = rep.residuals[0].identity;
      const double lhs = std::pow(std::abs(sg.evolve(a.v, a.t).value()), prm.rho);
      const double rhs = std::max(0.0, std::pow(std::abs(a.v.value()), prm.rho) - prm.kappa * a.t);
      r.extinction = std::abs(lhs - rhs);
      checks[0].worst = std::max(checks[0].worst, r.semigroup);
      checks[1].worst = std::max(checks[1].worst, r.contraction);
      checks[2].worst = std::max(checks[2].worst, r.identity);
      checks[3].worst = std::max(checks[3].worst, r.extinction);
      rows.push_back(r);
    }
  } else {
    const PLaplaceProblem& pr = *ex.problem;
    const double dt = pr.config().dt;
    const std::size_t cells = ex.shape.size();
    const double h = ex.shape.h();
    checks = {{"semigroup", 1e-12},      {"contraction_V", 1e-9},    {"identity", 0.0},
              {"mass", 1e-10},           {"contraction_L1", 1e-9},   {"contraction_L2", 1e-9},
              {"contraction_Linf", 1e-9}};
    for (std::uint64_t i = 0; i < n; ++i) {
      std::vector<double> a(cells), b(cells);
      const double shift = rng.uniform() - 0.5;
      for (std::size_t k = 0; k < cells; ++k) {
        a[k] = shift + (2.0 * rng.uniform() - 1.0);
        b[k] = 2.0 * rng.uniform() - 1.0;
      }
      AxiomSample smp;
      smp.v = StateVector::grid(a, h);
      smp.u = StateVector::grid(b, h);
      smp.t = dt * static_cast<double>(1 + static_cast<int>(20.0 * rng.uniform()));
      smp.s = dt * static_cast<double>(1 + static_cast<int>(20.0 * rng.uniform()));
      CheckRow r;
      r.kind = "plaplace";
      r.t = smp.t;
      r.s = smp.s;
      try {
        const AxiomReport rep = check_semigroup_axioms(sg, std::span<const AxiomSample>(&smp, 1));
        r.semigroup = rep.residuals[0].semigroup;
        r.contraction = rep.residuals[0].contraction;
        r.identity = rep.residuals[0].identity;
        const StateVector tv = sg.evolve(smp.v, smp.t);
        const StateVector tu = sg.evolve(*smp.u, smp.t);
        r.mass = std::abs(mass(tv) - mass(smp.v));
        const StateVector d0 = smp.v - *smp.u;
        const StateVector d1 = tv - tu;
        r.contraction_l1 = norm_l1(d1) - norm_l1(d0);
        r.contraction_l2 = norm_l2(d1) - norm_l2(d0);
        r.contraction_linf = norm_inf(d1) - norm_inf(d0);
        checks[0].worst = std::max(checks[0].worst, r.semigroup);
        checks[1].worst = std::max(checks[1].worst, r.contraction);
        checks[2].worst = std::max(checks[2].worst, r.identity);
        checks[3].worst = std::max(checks[3].worst, r.mass);
        checks[4].worst = std::max(checks[4].worst, r.contraction_l1);
        checks[5].worst = std::max(checks[5].worst, r.contraction_l2);
        checks[6].worst = std::max(checks[6].worst, r.contraction_linf);
      } catch (const NonConvergence& e) {
        r.status = std::string("NonConvergence: ") + e.what();
        runtime_error = true;
        log << "case " << i << ": " << r.status << "\n";
      }
      rows.push_back(r);
    }
  }

  std::ostringstream csv;
  csv << "case,kind,t,s,semigroup,contraction,identity,extinction,mass,contraction_l1,contraction_l2,"
         "contraction_linf,status\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv << i << "," << r.kind << "," << num(r.t) << "," << num(r.s) << "," << num(r.semigroup) << ","
        << num(r.contraction) << "," << num(r.identity) << "," << num(r.extinction) << "," << num(r.mass) << ","
        << num(r.contraction_l1) << "," << num(r.contraction_l2) << "," << num(r.contraction_linf) << ",\""
        << r.status << "\"\n";
  }
  out.write("residuals.csv", csv.str());

  bool pass = !runtime_error;
  json cj = json::array();
  for (const auto& c : checks) {
    const bool ok = c.worst <= c.tol;
    pass = pass && ok;
    json e;
    e["check"] = c.name;
    e["max_residual"] = c.worst;
    e["tolerance"] = c.tol;
    e["pass"] = ok;
    cj.push_back(e);
    log << c.name << ": max residual " << c.worst << " (tol " << c.tol << ")" << (ok ? "" : " FAIL") << "\n";
  }
  s["cases"] = rows.size();
  s["checks"] = cj;

  // extinction fit on zero-mean jumps
  try {
    const KappaInfo k = resolve_kappa(ex);
    if (k.fit) {
      const bool ok = k.fit->kappa_emp > 0.0 && k.fit->fit_residual <= 1e-9;
      json e;
      e["kappa_emp"] = k.fit->kappa_emp;
      e["fit_residual"] = k.fit->fit_residual;
      e["samples_used"] = k.fit->samples_used;
      e["pass"] = ok;
      s["extinction_fit"] = e;
      pass = pass && ok;
      log << "extinction fit: kappa_emp " << k.fit->kappa_emp << ", residual " << k.fit->fit_residual
          << (ok ? "" : " FAIL") << "\n";
    }
  } catch (const NonConvergence& e) {
    s["extinction_fit"] = json{{"error", std::string("NonConvergence: ") + e.what()}};
    runtime_error = true;
    pass = false;
  } catch (const NoExtinction& e) {
    s["extinction_fit"] = json{{"error", std::string("NoExtinction: ") + e.what()}};
    pass = false;
  }
  s["nonconvergence"] = runtime_error;
  s["pass"] = pass;
  out.write_json("summary.json", s);
  if (runtime_error) return kExitRuntime;
  return pass ? kExitOk : kExitSuite;
}

// ------------------------------------------------------------- kappa-fit

int cmd_kappa_fit(const Experiment& ex, Outputs& out, std::ostream& log) {
  json s = base_summary("kappa-fit", ex);
  KappaInfo k;
  KappaFit fit;
  if (ex.sg->is_scalar()) {
    const ExtinctionParams prm = ex.sg->scalar_params();
    Philox rng = derive_stream(ex.cfg.driver.master_seed, 0, Stream::Aux);
    std::vector<DecayCurve> curves;
    for (std::uint64_t i = 0; i < ex.cfg.run.kappa_corpus; ++i) {
      const StateVector v = sample_eta(ex.cfg.driver.eta, rng, ex.shape);
      const double te = scalar_extinction_time(prm, v);
      DecayCurve c;
      for (int j = 0; j <= 50; ++j) {
        const double t = 1.1 * te * j / 50.0;
        c.times.push_back(t);
        c.norm_rho.push_back(std::pow(std::abs(ex.sg->evolve(v, t).value()), prm.rho));
      }
      curves.push_back(std::move(c));
    }
    fit = fit_extinction_rate(curves, prm.rho);
    k.kappa = prm.kappa;
    k.rho = prm.rho;
    k.source = "exact";
  } else {
    k = resolve_kappa(ex);
    if (!k.fit) {
      KappaInfo emp;
      ExperimentConfig cfg = ex.cfg;
      cfg.pde_kappa.reset();
      Experiment e2 = ex;
      e2.cfg = cfg;
      emp = resolve_kappa(e2);
      fit = *emp.fit;
    } else {
      fit = *k.fit;
    }
  }
  std::ostringstream csv;
  csv << "sample,t,norm_rho,bound\n";
  std::vector<svg::Series> series;
  for (std::size_t i = 0; i < fit.curves.size(); ++i) {
    const auto& c = fit.curves[i];
    if (c.norm_rho.empty() || c.norm_rho.front() == 0.0) continue;
    svg::Series sr;
    sr.label = i < 5 ? "sample " + std::to_string(i) : "";
    for (std::size_t j = 0; j < c.times.size(); ++j) {
      const double bound = std::max(0.0, c.norm_rho.front() - fit.kappa_emp * c.times[j]);
      csv << i << "," << num(c.times[j]) << "," << num(c.norm_rho[j]) << "," << num(bound) << "\n";
      sr.x.push_back(c.times[j]);
      sr.y.push_back(c.norm_rho[j]);
    }
    if (series.size() < 6) series.push_back(std::move(sr));
  }
  if (!fit.curves.empty()) {
    const auto& c = fit.curves.front();
    if (!c.norm_rho.empty()) {
      svg::Series b;
      b.label = "fitted bound (sample 0)";
      b.dashed = true;
      for (double t : c.times) {
        b.x.push_back(t);
        b.y.push_back(std::max(0.0, c.norm_rho.front() - fit.kappa_emp * t));
      }
      series.push_back(std::move(b));
    }
  }
  out.write("kappa_fit.csv", csv.str());
  out.write("kappa_fit.svg", svg::line_plot({"Decay of ||u(t)||^rho", "t", "||u(t)||^rho", false}, series));

  const bool ok = fit.kappa_emp > 0.0 && fit.fit_residual <= 1e-9;
  s["kappa"] = kappa_json(k);
  s["kappa_emp"] = fit.kappa_emp;
  s["rho"] = fit.rho_used;
  s["fit_residual"] = fit.fit_residual;
  s["samples_used"] = fit.samples_used;
  s["pass"] = ok;
  out.write_json("summary.json", s);
  log << "kappa_emp = " << fit.kappa_emp << ", residual " << fit.fit_residual << "\n";
  return ok ? kExitOk : kExitSuite;
}

// ------------------------------------------------------------------ slln

std::vector<std::string> component_names(const Experiment& ex, std::size_t f) {
  const std::size_t d = ex.functionals[f].dim(ex.shape);
  if (d == 1) return {ex.functional_names[f]};
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back(ex.functional_names[f] + "[" + std::to_string(j) + "]");
  return names;
}

void write_cycles_csv(const Experiment& ex, const PilotResult& pilot, Outputs& out) {
  std::ostringstream csv;
  csv << "n,m_start,m_end,t_start,t_end,tau";
  for (std::size_t f = 0; f < ex.functionals.size(); ++f) {
    for (const auto& nm : component_names(ex, f)) csv << ",\"S_" << nm << "\"";
  }
  csv << "\n";
  for (const auto& c : pilot.cycles) {
    csv << c.n << "," << c.m_start << "," << c.m_end << "," << num(c.t_start) << "," << num(c.t_end) << ","
        << num(c.tau);
    for (const auto& w : c.integrals) {
      for (double v : w) csv << "," << num(v);
    }
    csv << "\n";
  }
  out.write("cycles.csv", csv.str());
}

int cmd_slln(const Experiment& ex, bool force, Outputs& out, std::ostream& log) {
  json s = base_summary("slln", ex);
  s["drift"] = require_drift(ex, force, log);
  const std::uint64_t seed = ex.cfg.driver.master_seed;
  const PilotResult pilot = run_pilot(ex, seed, ex.cfg.run.n_cycles, ex.cfg.run.write_cycles);
  if (ex.cfg.run.write_cycles) write_cycles_csv(ex, pilot, out);

  const std::vector<double> cps =
      ex.cfg.run.checkpoints.empty() ? default_checkpoints(ex.cfg.run.t_end) : ex.cfg.run.checkpoints;
  DriverConfig driver = ex.cfg.driver;
  driver.master_seed = seed;
  const SimulationSetup setup = make_setup(ex, driver, ex.functionals);
  ReplicateRng rng = derive_replicate_rng(seed, kLongRunReplicate);
  HorizonOptions opt;
  opt.keep_cycles = false;
  const HorizonResult long_run =
      simulate_until_time(initial_state(ex, seed, kLongRunReplicate), setup, rng, cps, opt);
  const double t_end = cps.back();

  std::ostringstream csv;
  csv << "t";
  for (std::size_t f = 0; f < ex.functionals.size(); ++f) {
    for (const auto& nm : component_names(ex, f)) csv << ",\"A_" << nm << "\",\"err_" << nm << "\"";
  }
  csv << "\n";
  for (std::size_t c = 0; c < cps.size(); ++c) {
    csv << num(cps[c]);
    for (std::size_t f = 0; f < ex.functionals.size(); ++f) {
      const auto& integral = long_run.integrals[c][f];
      for (std::size_t j = 0; j < integral.size(); ++j) {
        const double a = integral[j] / cps[c];
        csv << "," << num(a) << "," << num(std::abs(a - pilot.stats[f].nu_hat[j]));
      }
    }
    csv << "\n";
  }
  out.write("slln_curve.csv", csv.str());

  bool pass = true;
  json fj = json::array();
  std::vector<svg::Series> plot;
  std::optional<svg::Band> band;
  for (std::size_t f = 0; f < ex.functionals.size(); ++f) {
    const CycleStats& st = pilot.stats[f];
    const auto names = component_names(ex, f);
    const std::size_t d = names.size();
    json e;
    e["functional"] = ex.functional_names[f];
    json comps = json::array();
    double worst_ratio = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double var = d == 1 ? st.sigma2_hat : (*st.Q_hat)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
      const double a = long_run.integrals.back()[f][j] / t_end;
      const double se = std::sqrt(st.se_nu[j] * st.se_nu[j] + var / t_end);
      double allowance = 0.0;
      const bool degenerate = degenerate_sigma(var, st.mean_S[j], st.mean_tau);
      if (degenerate) {
        // zero-variance cycles: the only gap is the O(1/t) boundary term
        double worst = 0.0;
        for (std::size_t k = 0; k < pilot.series[f].size(); ++k) {
          worst = std::max(worst, std::abs(pilot.series[f].integrals[k][j]) +
                                      std::abs(st.nu_hat[j]) * pilot.series[f].tau[k]);
        }
        const double warm = std::abs(long_run.warm_up.integrals.empty() ? 0.0 : long_run.warm_up.integrals[f][j]) +
                            std::abs(st.nu_hat[j]) * long_run.warm_up.t_end;
        allowance = (worst + warm) / t_end + 1e-12;
      }
      const double gap = std::abs(a - st.nu_hat[j]);
      const bool ok = gap <= 3.0 * se + allowance;
      pass = pass && ok;
      worst_ratio = std::max(worst_ratio, se > 0.0 ? gap / se : 0.0);
      if (d <= 4) {
        json cj;
        cj["component"] = names[j];
        cj["nu_hat"] = st.nu_hat[j];
        cj["se_nu"] = st.se_nu[j];
        cj["time_average"] = a;
        cj["combined_se"] = se;
        cj["gap"] = gap;
        if (degenerate) cj["degenerate_allowance"] = allowance;
        cj["pass"] = ok;
        comps.push_back(cj);
      } else if (!ok) {
        comps.push_back(json{{"component", names[j]}, {"gap", gap}, {"combined_se", se}, {"pass", false}});
      }
    }
    e["components"] = comps;
    e["max_gap_over_se"] = worst_ratio;
    e["n_cycles"] = st.n_cycles;
    e["mean_tau"] = st.mean_tau;
    if (d == 1) e["sigma2_hat"] = st.sigma2_hat;
    fj.push_back(e);
    log << ex.functional_names[f] << ": nu_hat " << st.nu_hat[0] << " +- " << st.se_nu[0] << ", A_t "
        << long_run.integrals.back()[f][0] / t_end << "\n";

    if (d == 1) {
      svg::Series sr;
      sr.label = "A_t " + ex.functional_names[f];
      for (std::size_t c = 0; c < cps.size(); ++c) {
        sr.x.push_back(cps[c]);
        sr.y.push_back(long_run.integrals[c][f][0] / cps[c]);
      }
      if (!band) {
        band = svg::Band{st.nu_hat[0] - 3.0 * st.se_nu[0], st.nu_hat[0] + 3.0 * st.se_nu[0], "nu_hat +- 3 se"};
        plot.insert(plot.begin(), svg::Series{"nu_hat", {cps.front(), cps.back()}, {st.nu_hat[0], st.nu_hat[0]}, true});
      }
      plot.push_back(std::move(sr));
    }
  }
  out.write("slln.svg", svg::line_plot({"Running time average", "t", "A_t", true}, plot, band));
  s["t_end"] = t_end;
  s["renewals_by_t_end"] = long_run.renewal_counts.back();
  s["functional_results"] = fj;
  s["pass"] = pass;
  out.write_json("summary.json", s);
  return pass ? kExitOk : kExitSuite;
}

// -------------------------------------------------------- clt / anscombe

void write_clt_samples(const CltResult& r, Outputs& out) {
  std::ostringstream csv;
  csv << "master_seed,replicate,integral,statistic,renewal_count,anscombe_sum,anscombe_count\n";
  for (const auto& sd : r.seeds) {
    for (std::size_t i = 0; i < sd.integral.size(); ++i) {
      csv << sd.master_seed << "," << i << "," << num(sd.integral[i]) << "," << num(sd.statistic[i]) << ","
          << sd.renewal_count[i] << "," << num(sd.anscombe[i].sum) << "," << sd.anscombe[i].count << "\n";
    }
  }
  out.write("clt_samples.csv", csv.str());
}

json seed_json(const CltSeedResult& sd, bool anscombe) {
  json e;
  e["master_seed"] = sd.master_seed;
  if (anscombe) {
    e["theta"] = sd.theta;
    if (sd.anscombe_ks) e["ks"] = report_json(*sd.anscombe_ks);
  } else {
    e["statistic_variance"] = sd.statistic_variance;
    e["variance_rel_error"] = sd.variance_rel_error;
    if (sd.ks) e["ks"] = report_json(*sd.ks);
  }
  e["degenerate"] = sd.degenerate;
  return e;
}

int cmd_clt(const Experiment& ex, const CommandOptions& opts, bool anscombe, Outputs& out, std::ostream& log) {
  json s = base_summary(anscombe ? "anscombe" : "clt", ex);
  s["drift"] = require_drift(ex, opts.force, log);
  const CltResult r = run_clt_experiment(ex, opts.threads);
  write_clt_samples(r, out);
  s["functional"] = ex.functional_names[r.functional];
  s["t"] = r.t;
  s["n_replicates"] = ex.cfg.run.n_replicates;
  s["alpha"] = ex.cfg.run.alpha;
  json pj;
  pj["master_seed"] = ex.cfg.driver.master_seed;
  pj["cycles"] = r.pilot.n_cycles;
  pj["nu_hat"] = r.pilot.nu_hat[0];
  pj["se_nu"] = r.pilot.se_nu[0];
  pj["sigma2_hat"] = r.pilot.sigma2_hat;
  pj["mean_tau"] = r.pilot.mean_tau;
  s["pilot"] = pj;
  json sj = json::array();
  for (const auto& sd : r.seeds) sj.push_back(seed_json(sd, anscombe));
  s["seeds"] = sj;

  if (r.degenerate) {
    s["note"] = "CLT limit is a point mass (sigma2_hat = 0); normality tests skipped";
    s["degenerate"] = true;
    s["pass"] = true;
    log << "degenerate configuration: CLT limit is a point mass\n";
    out.write_json("summary.json", s);
    return kExitOk;
  }

  bool pass;
  if (anscombe) {
    s["pass_fraction"] = r.anscombe_pass_fraction;
    s["required_fraction"] = ex.cfg.run.pass_fraction;
    pass = r.anscombe_pass;
    std::vector<std::vector<std::string>> rows;
    std::ostringstream csv;
    csv << "master_seed,theta,statistic,p_value,pass,note\n";
    for (const auto& sd : r.seeds) {
      const TestReport& k = *sd.anscombe_ks;
      csv << sd.master_seed << "," << num(sd.theta) << "," << num(k.statistic) << "," << num(k.p_value) << ","
          << (k.pass ? "true" : "false") << ",\"" << k.note << "\"\n";
      rows.push_back({std::to_string(sd.master_seed), short_num(sd.theta), short_num(k.statistic),
                      short_num(k.p_value), k.pass ? "pass" : "FAIL"});
    }
    out.write("anscombe.csv", csv.str());
    out.write("anscombe.svg", svg::table("Anscombe random-index CLT: KS p-values",
                                         {"master seed", "theta", "KS D", "p-value", "result"}, rows));
    log << "anscombe: pass fraction " << r.anscombe_pass_fraction << "\n";
  } else {
    s["pass_fraction"] = r.ks_pass_fraction;
    s["required_fraction"] = ex.cfg.run.pass_fraction;
    s["variance_tolerance"] = ex.cfg.run.var_tolerance;
    s["variance_ok"] = r.variance_ok;
    pass = r.clt_pass;
    std::vector<double> z;
    const CltSeedResult& first = r.seeds.front();
    const double sd = std::sqrt(first.sigma2_hat);
    for (double v : first.statistic) z.push_back(v / sd);
    out.write("clt_hist.svg",
              svg::histogram({"Standardized CLT statistic (seed " + std::to_string(first.master_seed) + ")",
                              "(I_t - t nu) / (sigma sqrt t)", "density", false},
                             z, 40, [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }));
    log << "clt: KS pass fraction " << r.ks_pass_fraction << ", variance " << (r.variance_ok ? "ok" : "FAIL")
        << "\n";
  }
  s["pass"] = pass;
  out.write_json("summary.json", s);
  return pass ? kExitOk : kExitSuite;
}

json manifest_json(const std::string& command, const Experiment* ex, const std::vector<std::string>& files,
                   int code, double wall) {
  json m;
  m["artifact"] = "regen";
  m["version"] = REGEN_VERSION;
  m["command"] = command;
  m["config_hash"] = ex ? ex->cfg.hash : "";
  json seeds = json::array();
  if (ex) {
    const bool multi = command == "clt" || command == "anscombe";
    const std::uint64_t n = multi ? ex->cfg.run.n_seeds : 1;
    for (std::uint64_t k = 0; k < n; ++k) seeds.push_back(ex->cfg.driver.master_seed + k);
  }
  m["seeds"] = seeds;
  m["exit_code"] = code;
  m["outputs"] = files;
  m["wall_time_s"] = wall;
  return m;
}

}  // namespace

KappaInfo resolve_kappa(const Experiment& ex) {
  KappaInfo k;
  if (ex.sg->is_scalar()) {
    k.kappa = ex.sg->scalar_params().kappa;
    k.rho = ex.sg->scalar_params().rho;
    k.source = "exact";
    return k;
  }
  k.rho = 2.0 - ex.problem->config().p;
  if (ex.cfg.pde_kappa) {
    k.kappa = *ex.cfg.pde_kappa;
    k.source = "given";
    return k;
  }
  Philox rng = derive_stream(ex.cfg.driver.master_seed, 1, Stream::Aux);
  std::vector<StateVector> corpus;
  for (std::uint64_t i = 0; i < ex.cfg.run.kappa_corpus; ++i) corpus.push_back(sample_eta(ex.cfg.driver.eta, rng, ex.shape));
  k.fit = estimate_kappa(corpus, *ex.problem, ex.cfg.run.kappa_time_cap);
  k.kappa = k.fit->kappa_emp;
  k.source = "empirical";
  return k;
}

PilotResult run_pilot(const Experiment& ex, std::uint64_t master_seed, std::uint64_t n_cycles, bool keep_records) {
  PilotResult p;
  p.master_seed = master_seed;
  DriverConfig driver = ex.cfg.driver;
  driver.master_seed = master_seed;
  const SimulationSetup setup = make_setup(ex, driver, ex.functionals);
  ReplicateRng rng = derive_replicate_rng(master_seed, kPilotReplicate);
  p.series.resize(ex.functionals.size());
  for (auto& s : p.series) {
    s.integrals.reserve(n_cycles);
    s.tau.reserve(n_cycles);
  }
  p.warm_up = simulate_cycles(initial_state(ex, master_seed, kPilotReplicate), setup, rng, n_cycles,
                              [&](const CycleRecord& c) {
                                for (std::size_t f = 0; f < c.integrals.size(); ++f) p.series[f].push(c.integrals[f], c.tau);
                                if (keep_records) p.cycles.push_back(c);
                              });
  for (const auto& s : p.series) p.stats.push_back(summarize_cycles(s));
  return p;
}

CltResult run_clt_experiment(const Experiment& ex, unsigned threads) {
  CltResult r;
  r.functional = scalar_target(ex);
  r.t = ex.cfg.run.clt_t;
  const std::size_t n_rep = ex.cfg.run.n_replicates;
  const double alpha = ex.cfg.run.alpha;
  const std::vector<Functional> target{ex.functionals[r.functional]};
  std::size_t ks_passes = 0, ans_passes = 0;
  r.variance_ok = true;

  // One long pilot on its own stream centres every seed; its error then
  // stays far below the KS resolution of n_replicates samples.
  {
    DriverConfig driver = ex.cfg.driver;
    const SimulationSetup setup = make_setup(ex, driver, target);
    ReplicateRng rng = derive_replicate_rng(driver.master_seed, kPilotReplicate);
    ScalarCycleAccumulator acc;
    simulate_cycles(initial_state(ex, driver.master_seed, kPilotReplicate), setup, rng, ex.cfg.run.pilot_cycles,
                    [&](const CycleRecord& c) { acc.push(c.integrals[0][0], c.tau); });
    r.pilot = acc.finish();
  }
  const CycleStats& st = r.pilot;

  for (std::uint64_t k = 0; k < ex.cfg.run.n_seeds; ++k) {
    CltSeedResult sd;
    sd.master_seed = ex.cfg.driver.master_seed + k;
    sd.nu_hat = st.nu_hat[0];
    sd.se_nu = st.se_nu[0];
    sd.sigma2_hat = st.sigma2_hat;
    sd.mean_tau = st.mean_tau;
    sd.pilot_cycles = st.n_cycles;
    sd.theta = r.t / st.mean_tau;

    DriverConfig driver = ex.cfg.driver;
    driver.master_seed = sd.master_seed;
    const SimulationSetup setup = make_setup(ex, driver, target);
    sd.integral.assign(n_rep, 0.0);
    sd.statistic.assign(n_rep, 0.0);
    sd.renewal_count.assign(n_rep, 0);
    sd.anscombe.assign(n_rep, RandomIndexSum{});
    const std::vector<double> cps{r.t};
    const std::vector<double> nu{sd.nu_hat};
    parallel_for(n_rep, threads, [&](std::size_t i) {
      ReplicateRng rng = derive_replicate_rng(sd.master_seed, i);
      HorizonOptions opt;
      opt.extinctions_after_horizon = 2;
      opt.keep_cycles = true;
      const HorizonResult h = simulate_until_time(initial_state(ex, sd.master_seed, i), setup, rng, cps, opt);
      const double integral = h.integrals[0][0][0];
      sd.integral[i] = integral;
      sd.statistic[i] = clt_statistic({integral}, r.t, nu)[0];
      const std::uint64_t L = h.renewal_counts[0];
      sd.renewal_count[i] = L;
      if (h.cycles.size() < L + 1) throw Error("horizon run ended before cycle L(t)+1 completed");
      RandomIndexSum ras;
      for (std::uint64_t c = 0; c < L + 1; ++c) {
        ras.sum += h.cycles[c].integrals[0][0] - sd.nu_hat * h.cycles[c].tau;
      }
      ras.count = L + 1;
      sd.anscombe[i] = ras;
    });

    double mean = 0.0;
    for (double v : sd.statistic) mean += v;
    mean /= static_cast<double>(n_rep);
    double var = 0.0;
    for (double v : sd.statistic) var += (v - mean) * (v - mean);
    sd.statistic_variance = n_rep > 1 ? var / static_cast<double>(n_rep - 1) : 0.0;

    sd.degenerate = degenerate_sigma(sd.sigma2_hat, st.mean_S[0], st.mean_tau);
    if (!sd.degenerate) {
      sd.variance_rel_error = std::abs(sd.statistic_variance / sd.sigma2_hat - 1.0);
      r.variance_ok = r.variance_ok && sd.variance_rel_error <= ex.cfg.run.var_tolerance;
      sd.ks = ks_test_normal(sd.statistic, std::sqrt(sd.sigma2_hat), alpha);
      sd.anscombe_ks = anscombe_check(sd.anscombe, sd.theta, sd.sigma2_hat, sd.mean_tau, alpha);
      ks_passes += sd.ks->pass ? 1 : 0;
      ans_passes += sd.anscombe_ks->pass ? 1 : 0;
    }
    r.seeds.push_back(std::move(sd));
  }
  r.degenerate = std::all_of(r.seeds.begin(), r.seeds.end(), [](const CltSeedResult& s) { return s.degenerate; });
  const double n_seeds = static_cast<double>(r.seeds.size());
  r.ks_pass_fraction = static_cast<double>(ks_passes) / n_seeds;
  r.anscombe_pass_fraction = static_cast<double>(ans_passes) / n_seeds;
  r.clt_pass = r.degenerate || (r.ks_pass_fraction >= ex.cfg.run.pass_fraction && r.variance_ok);
  r.anscombe_pass = r.degenerate || r.anscombe_pass_fraction >= ex.cfg.run.pass_fraction;
  return r;
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  static const std::vector<std::string> known{"validate", "semigroup-check", "kappa-fit", "slln", "clt", "anscombe"};
  if (std::find(known.begin(), known.end(), command) == known.end()) {
    log << "error: unknown command '" << command << "'\n";
    return kExitParse;
  }

  std::optional<Experiment> ex;
  try {
    ex = build_experiment(load_experiment(options.config_path));
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) {
    log << "error: cannot create output directory " << options.out_dir << ": " << ec.message() << "\n";
    return kExitRuntime;
  }
  Outputs out(options.out_dir);

  int code = kExitOk;
  try {
    if (command == "validate") {
      code = cmd_validate(*ex, out, log);
    } else if (command == "semigroup-check") {
      code = cmd_semigroup_check(*ex, out, log);
    } else if (command == "kappa-fit") {
      code = cmd_kappa_fit(*ex, out, log);
    } else if (command == "slln") {
      code = cmd_slln(*ex, options.force, out, log);
    } else if (command == "clt") {
      code = cmd_clt(*ex, options, false, out, log);
    } else {
      code = cmd_clt(*ex, options, true, out, log);
    }
  } catch (const DriftViolated& e) {
    log << "error: " << e.what() << "\n";
    code = kExitDrift;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    code = kExitParse;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    code = kExitRuntime;
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    Outputs manifest(options.out_dir);
    manifest.write_json("manifest.json", manifest_json(command, &*ex, out.files(), code, wall));
  } catch (const std::exception& e) {
    log << "error: cannot write manifest: " << e.what() << "\n";
    return kExitRuntime;
  }
  return code;
}

}  // namespace regen
