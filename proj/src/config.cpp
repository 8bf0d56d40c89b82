#include "regen/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

namespace regen {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

ParseError::ParseError(const std::string& source, int line, int column, const std::string& what)
    : ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

IniDocument IniDocument::parse(const std::string& text, const std::string& source) {
  IniDocument doc;
  doc.source_ = source;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  Section* current = nullptr;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const auto first = raw.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const int col0 = static_cast<int>(first) + 1;
    const char lead = raw[first];
    if (lead == '#' || lead == ';') continue;
    if (lead == '[') {
      const auto close = raw.find(']', first);
      if (close == std::string::npos) throw ParseError(source, line_no, col0, "unterminated section header");
      if (!trim(raw.substr(close + 1)).empty()) {
        throw ParseError(source, line_no, static_cast<int>(close) + 2, "unexpected text after section header");
      }
      const std::string name = trim(raw.substr(first + 1, close - first - 1));
      if (!valid_name(name)) throw ParseError(source, line_no, col0 + 1, "invalid section name");
      if (doc.sections_.count(name)) {
        throw ParseError(source, line_no, col0, "duplicate section [" + name + "]");
      }
      current = &doc.sections_[name];
      current->line = line_no;
      continue;
    }
    const auto eq = raw.find('=', first);
    if (eq == std::string::npos) throw ParseError(source, line_no, col0, "expected 'key = value'");
    if (current == nullptr) throw ParseError(source, line_no, col0, "key outside of any section");
    const std::string key = trim(raw.substr(first, eq - first));
    if (!valid_name(key)) throw ParseError(source, line_no, col0, "invalid key name '" + key + "'");
    std::string rest = raw.substr(eq + 1);
    // inline comment: whitespace followed by '#'
    for (std::size_t i = 1; i < rest.size(); ++i) {
      if (rest[i] == '#' && (rest[i - 1] == ' ' || rest[i - 1] == '\t')) {
        rest = rest.substr(0, i);
        break;
      }
    }
    const auto vfirst = rest.find_first_not_of(" \t");
    const int vcol = static_cast<int>(eq) + 2 + (vfirst == std::string::npos ? 0 : static_cast<int>(vfirst));
    const std::string value = trim(rest);
    if (value.empty()) throw ParseError(source, line_no, vcol, "missing value for key '" + key + "'");
    if (current->entries.count(key)) throw ParseError(source, line_no, col0, "duplicate key '" + key + "'");
    current->entries[key] = Entry{value, line_no, vcol, col0, false};
  }
  return doc;
}

IniDocument IniDocument::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, 0, "cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const IniDocument::Entry* IniDocument::find(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  s->second.used = true;
  const auto e = s->second.entries.find(key);
  if (e == s->second.entries.end()) return nullptr;
  e->second.used = true;
  return &e->second;
}

void IniDocument::fail(const Entry& e, const std::string& what) const {
  throw ParseError(source_, e.line, e.column, what);
}

std::string IniDocument::get_string(const std::string& section, const std::string& key,
                                    const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

double IniDocument::get_double(const std::string& section, const std::string& key, double fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const auto v = to_double(e->value);
  if (!v) fail(*e, "expected a finite number for '" + key + "', got '" + e->value + "'");
  return *v;
}

std::int64_t IniDocument::get_int(const std::string& section, const std::string& key,
                                  std::int64_t fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
  if (ec != std::errc() || ptr != e->value.data() + e->value.size()) {
    // accept integral values written in floating notation, e.g. 1e6
    const auto d = to_double(e->value);
    if (!d || *d != std::floor(*d) || std::abs(*d) > 9e18) {
      fail(*e, "expected an integer for '" + key + "', got '" + e->value + "'");
    }
    return static_cast<std::int64_t>(*d);
  }
  return v;
}

std::uint64_t IniDocument::get_uint(const std::string& section, const std::string& key,
                                    std::uint64_t fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
  if (ec != std::errc() || ptr != e->value.data() + e->value.size()) {
    const auto d = to_double(e->value);
    if (!d || *d < 0.0 || *d != std::floor(*d) || *d > 1.8e19) {
      fail(*e, "expected a non-negative integer for '" + key + "', got '" + e->value + "'");
    }
    return static_cast<std::uint64_t>(*d);
  }
  return v;
}

bool IniDocument::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "yes" || e->value == "1") return true;
  if (e->value == "false" || e->value == "no" || e->value == "0") return false;
  fail(*e, "expected true or false for '" + key + "'");
}

std::vector<double> IniDocument::get_doubles(const std::string& section, const std::string& key,
                                             const std::vector<double>& fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const auto& item : split(e->value, ',')) {
    const auto v = to_double(item);
    if (!v) fail(*e, "expected a comma-separated list of numbers for '" + key + "'");
    out.push_back(*v);
  }
  return out;
}

void IniDocument::reject_unused() const {
  for (const auto& [name, sec] : sections_) {
    if (!sec.used) throw ParseError(source_, sec.line, 1, "unknown section [" + name + "]");
    for (const auto& [key, e] : sec.entries) {
      if (!e.used) throw ParseError(source_, e.line, e.key_column, "unknown key '" + key + "' in [" + name + "]");
    }
  }
}

std::string IniDocument::canonical() const {
  std::string out;
  for (const auto& [name, sec] : sections_) {
    out += "[" + name + "]\n";
    for (const auto& [key, e] : sec.entries) out += key + "=" + e.value + "\n";
  }
  return out;
}

std::string config_hash(const IniDocument& doc) {
  const std::string text = doc.canonical();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {

BetaLaw parse_beta(const IniDocument& doc) {
  const IniDocument::Entry* e = doc.find("driver", "beta");
  const std::string law = e ? e->value : "exponential";
  try {
    if (law == "deterministic") return BetaLaw(beta_law::Deterministic{doc.get_double("driver", "beta_value", 1.0)});
    if (law == "uniform") {
      return BetaLaw(beta_law::Uniform{doc.get_double("driver", "beta_lo", 0.5), doc.get_double("driver", "beta_hi", 1.5)});
    }
    if (law == "exponential") return BetaLaw(beta_law::Exponential{doc.get_double("driver", "beta_rate", 1.0)});
    if (law == "gamma") {
      return BetaLaw(beta_law::Gamma{doc.get_double("driver", "beta_shape", 2.0), doc.get_double("driver", "beta_scale", 0.5)});
    }
  } catch (const ParseError&) {
    throw;
  } catch (const ConfigError& err) {
    if (e) doc.fail(*e, err.what());
    throw;
  }
  doc.fail(*e, "unknown beta law '" + law + "' (deterministic, uniform, exponential, gamma)");
}

EtaLaw parse_eta(const IniDocument& doc, Backend backend) {
  const IniDocument::Entry* e = doc.find("driver", "eta");
  const std::string law = e ? e->value : (backend == Backend::Scalar ? "scalar_uniform" : "grid_bumps");
  try {
    if (law == "scalar_uniform") return EtaLaw(eta_law::ScalarUniform{doc.get_double("driver", "eta_amp", 1.0)});
    if (law == "scalar_constant") return EtaLaw(eta_law::ScalarConstant{doc.get_double("driver", "eta_value", 1.0)});
    if (law == "grid_bumps") {
      return EtaLaw(eta_law::GridBumps{static_cast<int>(doc.get_int("driver", "eta_bumps", 3)),
                                       doc.get_double("driver", "eta_amp", 0.5),
                                       doc.get_double("driver", "eta_width_min", 0.05),
                                       doc.get_double("driver", "eta_width_max", 0.15)});
    }
  } catch (const ParseError&) {
    throw;
  } catch (const ConfigError& err) {
    if (e) doc.fail(*e, err.what());
    throw;
  }
  doc.fail(*e, "unknown eta law '" + law + "' (scalar_uniform, scalar_constant, grid_bumps)");
}

}  // namespace

ExperimentConfig parse_experiment(const IniDocument& doc) {
  ExperimentConfig cfg;
  cfg.hash = config_hash(doc);

  const IniDocument::Entry* be = doc.find("semigroup", "backend");
  const std::string backend = be ? be->value : "scalar";
  if (backend == "scalar") {
    cfg.backend = Backend::Scalar;
  } else if (backend == "plaplace") {
    cfg.backend = Backend::PLaplace;
  } else {
    doc.fail(*be, "unknown backend '" + backend + "' (scalar, plaplace)");
  }

  auto checked = [&](const char* section, const char* key, auto&& fn) {
    try {
      fn();
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& err) {
      const IniDocument::Entry* e = doc.find(section, key);
      if (e) doc.fail(*e, err.what());
      throw;
    }
  };

  cfg.scalar.kappa = doc.get_double("semigroup", "kappa", 1.0);
  cfg.scalar.rho = doc.get_double("semigroup", "rho", 0.5);
  cfg.q_v2 = doc.get_double("semigroup", "q_v2", 2.0);
  cfg.grid.n_cells = static_cast<int>(doc.get_int("semigroup", "n_cells", 64));
  cfg.grid.length = doc.get_double("semigroup", "length", 1.0);
  cfg.pde.p = doc.get_double("semigroup", "p", 1.5);
  cfg.pde.dt = doc.get_double("semigroup", "dt", 1e-2);
  cfg.pde.eps_reg = doc.get_double("semigroup", "eps_reg", 1e-8);
  cfg.pde.newton_tol = doc.get_double("semigroup", "newton_tol", cfg.pde.newton_tol);
  cfg.pde.newton_max_iter = static_cast<int>(doc.get_int("semigroup", "newton_max_iter", cfg.pde.newton_max_iter));
  cfg.pde.eps_ext = doc.get_double("semigroup", "eps_ext", 0.0);
  cfg.gamma_min = doc.get_double("semigroup", "gamma_min", 1.0);
  cfg.gamma_max = doc.get_double("semigroup", "gamma_max", cfg.gamma_min);
  cfg.gamma_seed = doc.get_uint("semigroup", "gamma_seed", 0);
  if (const auto* k = doc.find("semigroup", "pde_kappa")) {
    if (k->value != "empirical") cfg.pde_kappa = doc.get_double("semigroup", "pde_kappa", 0.0);
  }

  if (cfg.backend == Backend::Scalar) {
    checked("semigroup", "kappa", [&] { cfg.scalar.validate(); });
  } else {
    checked("semigroup", "n_cells", [&] { cfg.grid.validate(); });
    checked("semigroup", "p", [&] { cfg.pde.validate(); });
    if (!(cfg.gamma_min > 0.0) || cfg.gamma_max < cfg.gamma_min) {
      const auto* e = doc.find("semigroup", "gamma_min");
      if (e) doc.fail(*e, "need 0 < gamma_min <= gamma_max");
      throw ConfigError("need 0 < gamma_min <= gamma_max");
    }
    if (cfg.pde_kappa && !(*cfg.pde_kappa > 0.0)) doc.fail(*doc.find("semigroup", "pde_kappa"), "pde_kappa must be > 0");
  }
  if (!(cfg.q_v2 >= 1.0)) doc.fail(*doc.find("semigroup", "q_v2"), "q_v2 must be >= 1");

  cfg.driver = DriverConfig{parse_beta(doc), parse_eta(doc, cfg.backend), doc.get_uint("driver", "master_seed", 0)};
  const SpaceTag want = cfg.backend == Backend::Scalar ? SpaceTag::Scalar : SpaceTag::Grid;
  if (cfg.driver.eta.space() != want) {
    const auto* e = doc.find("driver", "eta");
    const std::string msg = "eta law does not match the backend's state space";
    if (e) doc.fail(*e, msg);
    throw ConfigError(msg);
  }

  const IniDocument::Entry* ie = doc.find("initial", "kind");
  const std::string ik = ie ? ie->value : "zero";
  if (ik == "zero") {
    cfg.initial.kind = InitialSpec::Kind::Zero;
  } else if (ik == "profile") {
    cfg.initial.kind = InitialSpec::Kind::Profile;
  } else if (ik == "random") {
    cfg.initial.kind = InitialSpec::Kind::Random;
  } else {
    doc.fail(*ie, "unknown initial kind '" + ik + "' (zero, profile, random)");
  }
  cfg.initial.profile = doc.get_doubles("initial", "profile", {});
  cfg.initial.amp = doc.get_double("initial", "amp", 0.5);
  if (cfg.initial.kind == InitialSpec::Kind::Profile) {
    const std::size_t need = cfg.backend == Backend::Scalar ? 1 : static_cast<std::size_t>(cfg.grid.n_cells);
    if (cfg.initial.profile.size() != need) {
      const auto* e = doc.find("initial", "profile");
      const std::string msg = "initial profile needs " + std::to_string(need) + " values";
      if (e) doc.fail(*e, msg);
      doc.fail(*ie, msg);
    }
  }

  if (const auto* fe = doc.find("functionals", "list")) {
    cfg.functional_specs = split(fe->value, ',');
    // syntax check against a representative shape
    const StateVector shape = cfg.backend == Backend::Scalar
                                  ? StateVector::scalar(0.0)
                                  : StateVector::grid(std::vector<double>(cfg.grid.n_cells, 0.0), cfg.grid.h());
    for (const auto& s : cfg.functional_specs) {
      try {
        parse_functional(s, shape);
      } catch (const ConfigError& err) {
        doc.fail(*fe, err.what());
      }
    }
  }

  RunPlan& r = cfg.run;
  r.n_cycles = doc.get_uint("run", "n_cycles", r.n_cycles);
  r.pilot_cycles = doc.get_uint("run", "pilot_cycles", r.pilot_cycles);
  r.t_end = doc.get_double("run", "t_end", r.t_end);
  r.checkpoints = doc.get_doubles("run", "checkpoints", r.checkpoints);
  r.n_replicates = doc.get_uint("run", "n_replicates", r.n_replicates);
  r.clt_t = doc.get_double("run", "clt_t", r.clt_t);
  r.n_seeds = doc.get_uint("run", "n_seeds", r.n_seeds);
  r.alpha = doc.get_double("run", "alpha", r.alpha);
  r.pass_fraction = doc.get_double("run", "pass_fraction", r.pass_fraction);
  r.var_tolerance = doc.get_double("run", "var_tolerance", r.var_tolerance);
  r.drift_mc = doc.get_uint("run", "drift_mc", r.drift_mc);
  r.moment_draws = doc.get_uint("run", "moment_draws", r.moment_draws);
  r.axiom_samples = doc.get_uint("run", "axiom_samples", r.axiom_samples);
  r.kappa_corpus = doc.get_uint("run", "kappa_corpus", r.kappa_corpus);
  r.kappa_time_cap = doc.get_double("run", "kappa_time_cap", r.kappa_time_cap);
  r.write_cycles = doc.get_bool("run", "write_cycles", r.write_cycles);
  auto require = [&](bool ok, const char* key, const std::string& msg) {
    if (ok) return;
    const auto* e = doc.find("run", key);
    if (e) doc.fail(*e, msg);
    throw ConfigError(msg);
  };
  require(r.n_cycles >= 2, "n_cycles", "n_cycles must be >= 2");
  require(r.pilot_cycles >= 2, "pilot_cycles", "pilot_cycles must be >= 2");
  require(r.t_end > 0.0, "t_end", "t_end must be > 0");
  require(r.clt_t > 0.0, "clt_t", "clt_t must be > 0");
  require(r.n_seeds >= 1, "n_seeds", "n_seeds must be >= 1");
  require(r.alpha > 0.0 && r.alpha < 1.0, "alpha", "alpha must be in (0, 1)");
  require(r.pass_fraction > 0.0 && r.pass_fraction <= 1.0, "pass_fraction", "pass_fraction must be in (0, 1]");
  require(r.var_tolerance > 0.0, "var_tolerance", "var_tolerance must be > 0");
  require(r.drift_mc >= 10000, "drift_mc", "drift_mc must be >= 10000");
  require(r.moment_draws >= 2, "moment_draws", "moment_draws must be >= 2");
  require(r.axiom_samples >= 1, "axiom_samples", "axiom_samples must be >= 1");
  require(r.kappa_corpus >= 1, "kappa_corpus", "kappa_corpus must be >= 1");
  require(r.kappa_time_cap > 0.0, "kappa_time_cap", "kappa_time_cap must be > 0");
  require(std::is_sorted(r.checkpoints.begin(), r.checkpoints.end()) &&
              std::adjacent_find(r.checkpoints.begin(), r.checkpoints.end()) == r.checkpoints.end() &&
              (r.checkpoints.empty() || r.checkpoints.front() > 0.0),
          "checkpoints", "checkpoints must be positive and strictly increasing");

  cfg.policy.eps_ext = doc.get_double("policy", "eps_ext", cfg.policy.eps_ext);
  cfg.policy.m_cap = doc.get_uint("policy", "m_cap", cfg.policy.m_cap);
  checked("policy", "eps_ext", [&] { cfg.policy.validate(); });

  cfg.quad.tol = doc.get_double("quadrature", "tol", cfg.quad.tol);
  cfg.quad.max_evals = doc.get_uint("quadrature", "max_evals", cfg.quad.max_evals);
  cfg.quad.force_numeric = doc.get_bool("quadrature", "force_numeric", cfg.quad.force_numeric);
  if (!(cfg.quad.tol > 0.0)) doc.fail(*doc.find("quadrature", "tol"), "quadrature tol must be > 0");

  doc.reject_unused();
  return cfg;
}

ExperimentConfig load_experiment(const std::string& path) { return parse_experiment(IniDocument::load(path)); }

Functional parse_functional(const std::string& spec, const StateVector& shape) {
  const auto parts = split(spec, ':');
  auto number = [&](const std::string& s) {
    const auto v = to_double(s);
    if (!v) throw ConfigError("bad number '" + s + "' in functional '" + spec + "'");
    return *v;
  };
  const std::string& head = parts.front();
  if (parts.size() == 1) {
    if (head == "identity") return Functional::identity();
    if (head == "norm_v2") return Functional::norm_v2();
    if (head == "mass") {
      if (shape.is_scalar()) throw ConfigError("mass functional needs a grid backend");
      return Functional::mass(shape);
    }
  }
  if (head == "constant" && parts.size() == 2) return Functional::constant(number(parts[1]), shape);
  if (head == "shift" && parts.size() == 3) {
    return Functional::shifted(parse_functional(parts[1], shape), number(parts[2]));
  }
  if (head == "linear" && parts.size() == 2) {
    std::vector<double> psi;
    for (const auto& item : split(parts[1], ';')) psi.push_back(number(item));
    if (psi.size() != shape.size()) {
      throw ConfigError("linear functional needs " + std::to_string(shape.size()) + " weights");
    }
    return Functional::linear(std::move(psi));
  }
  throw ConfigError("unknown functional '" + spec +
                    "' (identity, norm_v2, mass, constant:w, shift:base:w, linear:a;b;...)");
}

Experiment build_experiment(const ExperimentConfig& cfg) {
  Experiment ex;
  ex.cfg = cfg;
  if (cfg.backend == Backend::Scalar) {
    ex.sg = std::make_shared<Semigroup>(Semigroup::scalar_power_law(cfg.scalar));
    ex.shape = StateVector::scalar(0.0);
  } else {
    WeightField w;
    w.gamma.resize(static_cast<std::size_t>(cfg.grid.n_cells - 1));
    Philox rng = derive_stream(cfg.gamma_seed, 0, Stream::Aux);
    for (auto& g : w.gamma) g = cfg.gamma_min + (cfg.gamma_max - cfg.gamma_min) * rng.uniform();
    ex.problem = std::make_shared<PLaplaceProblem>(cfg.grid, std::move(w), cfg.pde);
    ex.sg = std::make_shared<Semigroup>(Semigroup::plaplace(ex.problem, cfg.q_v2));
    ex.shape = StateVector::grid(std::vector<double>(static_cast<std::size_t>(cfg.grid.n_cells), 0.0), cfg.grid.h());
  }
  for (const auto& s : cfg.functional_specs) {
    ex.functionals.push_back(parse_functional(s, ex.shape));
    ex.functional_names.push_back(s);
  }
  return ex;
}

StateVector initial_state(const Experiment& ex, std::uint64_t master_seed, std::uint64_t replicate) {
  const InitialSpec& init = ex.cfg.initial;
  switch (init.kind) {
    case InitialSpec::Kind::Zero:
      return StateVector::zeros_like(ex.shape);
    case InitialSpec::Kind::Profile:
      if (ex.shape.is_scalar()) return StateVector::scalar(init.profile.front());
      return StateVector::grid(init.profile, ex.shape.h());
    case InitialSpec::Kind::Random: {
      Philox rng = derive_stream(master_seed, replicate, Stream::Initial);
      if (ex.shape.is_scalar()) return StateVector::scalar(init.amp * (2.0 * rng.uniform() - 1.0));
      std::vector<double> v(ex.shape.size());
      for (auto& x : v) x = init.amp * (2.0 * rng.uniform() - 1.0);
      return project_zero_mean(StateVector::grid(v, ex.shape.h()));
    }
  }
  return StateVector::zeros_like(ex.shape);
}

}  // namespace regen
