#include "dlap/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace dlap {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& s, double& out) {
  std::istringstream is(s);
  is >> out;
  return !is.fail() && (is >> std::ws).eof();
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& source) {
  KeyValueFile kv;
  kv.source_ = source;
  std::istringstream is(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw Error(ErrorKind::Config,
                    source + ":" + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config, source + ":" + std::to_string(line_no) +
                                         ": expected 'key = value' in '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw Error(ErrorKind::Config, source + ":" + std::to_string(line_no) + ": empty key");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (kv.entries_.count(full)) {
      throw Error(ErrorKind::Config,
                  source + ":" + std::to_string(line_no) + ": duplicate key '" + full + "'");
    }
    kv.entries_[full] = Entry{trim(line.substr(eq + 1)), line_no};
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void KeyValueFile::fail(const std::string& key, const std::string& what) const {
  auto it = entries_.find(key);
  std::string where = source_;
  if (it != entries_.end()) where += ":" + std::to_string(it->second.line);
  throw Error(ErrorKind::Config, where + ": key '" + key + "': " + what);
}

std::string KeyValueFile::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(key, "missing");
  return it->second.value;
}

std::string KeyValueFile::get(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double KeyValueFile::get_double(const std::string& key) const {
  double v = 0.0;
  if (!parse_number(get(key), v) || !std::isfinite(v)) fail(key, "not a number");
  return v;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long KeyValueFile::get_int(const std::string& key) const {
  const double v = get_double(key);
  if (v != std::floor(v)) fail(key, "not an integer");
  return static_cast<long>(v);
}

long KeyValueFile::get_int(const std::string& key, long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::vector<double> KeyValueFile::get_doubles(const std::string& key) const {
  std::string s = get(key);
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    double v = 0.0;
    if (!parse_number(tok, v)) fail(key, "bad number '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) fail(key, "empty list");
  return out;
}

void KeyValueFile::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, entry] : entries_) {
    bool ok = false;
    for (const auto& a : allowed) {
      if (a.size() >= 2 && a.compare(a.size() - 2, 2, ".*") == 0) {
        ok = key.compare(0, a.size() - 1, a, 0, a.size() - 1) == 0;
      } else {
        ok = key == a;
      }
      if (ok) break;
    }
    if (!ok) {
      throw Error(ErrorKind::Config,
                  source_ + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
    }
  }
}

std::vector<double> RunConfig::mu_grid() const {
  std::vector<double> out;
  if (mu_count == 1) return {mu_max};
  const double r = std::pow(mu_min / mu_max, 1.0 / (mu_count - 1));
  for (int k = 0; k < mu_count; ++k) out.push_back(mu_max * std::pow(r, k));
  out.back() = mu_min;
  return out;
}

std::vector<double> RunConfig::tau_grid() const {
  std::vector<double> out;
  if (tau_count == 1) return {0.5 * (lap_I.lo + lap_I.hi)};
  for (int k = 0; k < tau_count; ++k)
    out.push_back(lap_I.lo + (lap_I.hi - lap_I.lo) * k / (tau_count - 1));
  return out;
}

namespace {

Interval parse_interval(const KeyValueFile& kv, const std::string& key, const std::string& text) {
  std::string s = text;
  for (char& c : s)
    if (c == ',' || c == '[' || c == ']') c = ' ';
  std::istringstream is(s);
  Interval iv;
  if (!(is >> iv.lo >> iv.hi) || !(iv.lo < iv.hi)) {
    throw Error(ErrorKind::Config, kv.source() + ": key '" + key + "': bad interval '" + text + "'");
  }
  return iv;
}

}  // namespace

RunConfig RunConfig::from_file(const KeyValueFile& kv) {
  kv.require_known({"model.*", "conjugate.deltas", "conjugate.order", "mourre.J", "mourre.beta",
                    "mourre.alpha_factor", "lap.I", "lap.delta", "lap.mu_max", "lap.mu_min",
                    "lap.mu_count", "lap.tau_count", "lap.plateau_bound", "evolution.dt",
                    "evolution.T", "evolution.T_cap", "evolution.zeta_probes",
                    "evolution.psi_probes", "evolution.form_probes", "run.seed", "run.out",
                    "run.threads"});
  RunConfig c;
  for (const auto& [key, entry] : kv.entries())
    if (key.rfind("model.", 0) == 0) c.model[key.substr(6)] = entry.value;
  if (c.model.empty()) throw Error(ErrorKind::Config, kv.source() + ": missing [model] section");

  if (kv.has("conjugate.deltas")) c.deltas = kv.get_doubles("conjugate.deltas");
  for (double d : c.deltas)
    if (!(d > 0.0)) throw Error(ErrorKind::Config, kv.source() + ": key 'conjugate.deltas': δ must be > 0");
  c.chain_order = static_cast<int>(kv.get_int("conjugate.order", c.chain_order));

  if (kv.has("mourre.J")) {
    c.mourre_J.clear();
    std::string s = kv.get("mourre.J");
    std::istringstream is(s);
    std::string part;
    while (std::getline(is, part, ';'))
      if (!part.empty()) c.mourre_J.push_back(parse_interval(kv, "mourre.J", part));
    if (c.mourre_J.empty()) throw Error(ErrorKind::Config, kv.source() + ": key 'mourre.J': empty");
  }
  c.beta = kv.get_double("mourre.beta", c.beta);
  if (c.beta < 0.0) throw Error(ErrorKind::Config, kv.source() + ": key 'mourre.beta': must be >= 0");
  c.alpha_factor = kv.get_double("mourre.alpha_factor", c.alpha_factor);

  if (kv.has("lap.I")) c.lap_I = parse_interval(kv, "lap.I", kv.get("lap.I"));
  c.lap_delta = kv.get_double("lap.delta", c.lap_delta);
  if (!(c.lap_delta > 0.5)) {
    throw Error(ErrorKind::Config,
                kv.source() + ": key 'lap.delta': LAP claims need delta > 1/2");
  }
  c.mu_max = kv.get_double("lap.mu_max", c.mu_max);
  c.mu_min = kv.get_double("lap.mu_min", c.mu_min);
  c.mu_count = static_cast<int>(kv.get_int("lap.mu_count", c.mu_count));
  c.tau_count = static_cast<int>(kv.get_int("lap.tau_count", c.tau_count));
  c.plateau_bound = kv.get_double("lap.plateau_bound", c.plateau_bound);
  if (!(c.mu_max > 0.0 && c.mu_min > 0.0 && c.mu_min <= c.mu_max) || c.mu_count < 1 ||
      c.tau_count < 1) {
    throw Error(ErrorKind::Config, kv.source() + ": key 'lap.mu_*'/'lap.tau_count': empty or invalid grid");
  }

  c.dt = kv.get_double("evolution.dt", c.dt);
  c.T = kv.get_double("evolution.T", c.T);
  c.T_cap = kv.get_double("evolution.T_cap", c.T_cap);
  c.zeta_probes = static_cast<int>(kv.get_int("evolution.zeta_probes", c.zeta_probes));
  c.psi_probes = static_cast<int>(kv.get_int("evolution.psi_probes", c.psi_probes));
  c.form_probes = static_cast<int>(kv.get_int("evolution.form_probes", c.form_probes));
  if (!(c.dt > 0.0 && c.T > 0.0 && c.T_cap >= c.T) || c.zeta_probes < 1 || c.psi_probes < 1) {
    throw Error(ErrorKind::Config, kv.source() + ": key 'evolution.*': invalid time grid or probe count");
  }

  if (kv.has("run.seed")) {
    const std::string s = kv.get("run.seed");
    try {
      c.seed = std::stoull(s, nullptr, 0);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, kv.source() + ": key 'run.seed': bad seed '" + s + "'");
    }
  }
  c.out_dir = kv.get("run.out", c.out_dir);
  c.threads = static_cast<int>(kv.get_int("run.threads", c.threads));
  return c;
}

RunConfig RunConfig::load(const std::string& path) { return from_file(KeyValueFile::load(path)); }

}  // namespace dlap
