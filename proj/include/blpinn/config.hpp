#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "blpinn/network.hpp"
#include "blpinn/oracle.hpp"
#include "blpinn/physics.hpp"
#include "blpinn/pigan.hpp"
#include "blpinn/training.hpp"

namespace blpinn {

// Minimal INI-style config: [section] headers, key = value lines,
// '#' or ';' comments, blank lines ignored.
class Ini {
public:
  static Ini parse_file(const std::string& path);
  static Ini parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  std::vector<double> get_doubles(const std::string& section,
                                  const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& section,
                            const std::string& key,
                            const std::vector<int>& fallback) const;

private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Riemann scenario the run is built around: step data, horizon, and the
// snapshot grid every evaluation uses.
struct Scenario {
  double s_left = 1.0, s_right = 0.0;
  double x0 = 0.0;
  double t_max = 1.0;
  std::vector<double> snapshot_times = {0.05, 0.15, 0.4, 0.6, 0.9};
  int eval_nx = 256;
};

// Full run description. Every default matches the module-level default, so
// an empty config file reproduces the baseline setup.
struct RunConfig {
  std::uint64_t seed = 0;

  PdeParams physics;      // ground truth: data generation and grading
  PdeParams physics_init; // training start; init_* keys perturb learnables
  FluxKind flux = FluxKind::Corey;
  Scenario scenario;
  SamplingConfig sampling;

  NetSpec network; // saturation net; widths default 8x20 + output 1
  TrainConfig training;

  GanConfig gan;
  std::vector<int> gen_widths, disc_widths, post_widths;

  int uq_members = 1000;
  UqGrid uq_grid;

  std::string data_path;       // [training] data = ...
  std::string checkpoint_path; // transfer init / evaluate / uq input

  // Fixed stream tags for Rng::derive(seed, tag), one per consumer.
  enum Stream : std::uint64_t {
    StreamSampling = 0,
    StreamNetInit = 1,
    StreamTraining = 2,
    StreamDiscInit = 3,
    StreamPostInit = 4,
    StreamUq = 5,
    StreamEval = 6,
  };

  static RunConfig load(const std::string& path); // throws ConfigError
  static RunConfig from_ini(const Ini& ini);

  // Re-derives every per-consumer stream seed from a new root seed.
  void reseed(std::uint64_t new_seed);

  SolutionProfile make_profile() const;
  NetSpec gan_spec(const std::vector<int>& widths, int input_dim,
                   int output_dim, std::uint64_t stream) const;
};

} // namespace blpinn
