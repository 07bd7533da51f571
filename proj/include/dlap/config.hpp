// Flat key = value text files with optional [section] headers, and the run
// configuration consumed by the command-line driver.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dlap/linalg.hpp"

namespace dlap {

class KeyValueFile {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  // Keys inside a section are stored as "section.key". '#' starts a comment.
  static KeyValueFile parse(const std::string& text, const std::string& source = "<input>");
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

  std::string get(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;

  // Throws Config naming the first key outside `allowed` (exact keys or "prefix.*").
  void require_known(const std::vector<std::string>& allowed) const;

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct RunConfig {
  // Model section, in the model-description keys.
  std::map<std::string, std::string> model;

  std::vector<double> deltas{1.0};
  int chain_order = 3;

  std::vector<Interval> mourre_J{{2.0, 6.0}};
  double beta = 0.0;
  double alpha_factor = 0.9;

  Interval lap_I{3.0, 5.0};
  double lap_delta = 1.0;
  double mu_max = 1e-1;
  double mu_min = 1e-4;
  int mu_count = 7;
  int tau_count = 9;
  double plateau_bound = 1.5;

  double dt = 0.01;
  double T = 50.0;
  double T_cap = 800.0;
  int zeta_probes = 2;
  int psi_probes = 4;
  int form_probes = 20;

  std::uint64_t seed = kDefaultSeed;
  std::string out_dir = "out";
  int threads = 1;

  std::vector<double> mu_grid() const;
  std::vector<double> tau_grid() const;

  static RunConfig from_file(const KeyValueFile& kv);
  static RunConfig load(const std::string& path);
};

}  // namespace dlap
