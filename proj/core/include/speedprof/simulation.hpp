#pragma once

// Monte-Carlo study of the two-step estimator on three test curves, and a
// generator of synthetic multi-stop vehicle passes.

#include "speedprof/kernel_spline.hpp"
#include "speedprof/profile.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace speedprof::simulation {

// F1 = t^2 on [0,1]; F2 = (2t-1)^3/2 + 1/2 on [0,1]; F3 = F2 stretched with
// a plateau at 1 on [1,2], on [0,3].
enum class TestFunction { F1, F2, F3 };

std::string to_string(TestFunction f);
TestFunction test_function_from_string(const std::string& name);

std::pair<double, double> domain(TestFunction f);
int default_sample_size(TestFunction f);
/// Positions over which F' o F^-1 is compared: [0.1,0.9] or [0.1,1.9].
std::pair<double, double> composite_range(TestFunction f);
/// Monotone-step penalty shipped for each function (pilot search).
double default_lambda_mono(TestFunction f);

/// Throw DomainError outside the function's domain.
double true_function(TestFunction f, double t);
double true_derivative(TestFunction f, double t);
double true_composite(TestFunction f, double x);

/// Deterministic 64-bit seed for (seed, stream), by splitmix64 mixing.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

struct SimulationConfig {
  TestFunction function = TestFunction::F1;
  int n = 0;  // 0: 50 for F1/F2, 150 for F3
  double sigma_x = 0.2;
  double sigma_v = 0.01;
  int runs = 100;
  std::uint64_t seed = 42;
  double lambda_mono = 0.0;  // 0: default_lambda_mono(function)
  std::size_t threads = 0;   // 0: hardware, capped by SPEEDPROF_THREADS
  profile::EstimatorConfig estimator;

  /// Throws DomainError for non-positive n, runs or sigmas below zero.
  void validate() const;
  int sample_size() const { return n > 0 ? n : default_sample_size(function); }
  double monotone_lambda() const { return lambda_mono > 0.0 ? lambda_mono : default_lambda_mono(function); }
};

/// Evenly spaced times including both ends; y = F + N(0, sigma_x^2),
/// v = F' + N(0, sigma_v^2), from stream (seed, run_index).
kernel_spline::ObservationSet simulate_dataset(const SimulationConfig& config, std::uint64_t run_index);

struct PointwiseCurve {
  std::vector<double> grid;
  std::vector<double> mse;
};

struct MiseReport {
  TestFunction function = TestFunction::F1;
  int runs = 0;
  int failures = 0;
  int nonconverged = 0;
  std::uint64_t seed = 0;
  double lambda_mono = 0.0;
  double mise_value = 0.0;       // F_mc
  double mise_derivative = 0.0;  // F'_mc
  double mise_composite = 0.0;   // F'_mc o F_mc^-1
  PointwiseCurve value;
  PointwiseCurve derivative;
  PointwiseCurve composite;

  std::string to_json() const;
  /// Table-1 style rows: function,estimator,mise.
  std::string to_csv() const;
};

/// Runs are independent and reduced in index order, so the report does not
/// depend on the thread count. Failed runs are counted and skipped.
MiseReport run_study(const SimulationConfig& config);

struct PilotPoint {
  double lambda_mono = 0.0;
  double mise_derivative = 0.0;
};

/// MISE of F'_mc for each candidate on `pilot_runs` runs of `config`.
std::vector<PilotPoint> pilot_lambda_mono(SimulationConfig config, const std::vector<double>& candidates,
                                          int pilot_runs);

// ---------------------------------------------------------------------------
// Multi-stop passes

struct StopSite {
  double position = 0.0;   // nominal, m
  double dwell_min = 0.0;  // s
  double dwell_max = 0.0;  // s
  double probability = 1.0;
};

// Defaults: a stop sign at 240 m and a red light at 730 m on an 1100 m road.
struct PassScenario {
  double length = 1100.0;  // m
  std::vector<StopSite> stops{{240.0, 2.0, 6.0, 1.0}, {730.0, 20.0, 40.0, 1.0}};
  double stop_jitter = 15.0;  // sd of each pass's stop position, m
  double cruise_speed = 12.0;   // m/s
  double cruise_jitter = 1.5;   // sd, m/s
  double acceleration = 1.2;    // m/s^2
  double deceleration = 1.5;    // m/s^2
  double sample_period = 1.0;   // s
  double sigma_x = 2.0;         // m
  double sigma_v = 0.2;         // m/s
};

/// Piecewise constant-acceleration motion, exact in closed form.
class PassKinematics {
 public:
  struct Phase {
    double t0 = 0.0;
    double x0 = 0.0;
    double v0 = 0.0;
    double acceleration = 0.0;
    double duration = 0.0;
  };

  explicit PassKinematics(std::vector<Phase> phases);
  double duration() const noexcept;
  double position(double t) const;
  double speed(double t) const;
  const std::vector<Phase>& phases() const noexcept { return phases_; }

 private:
  const Phase& phase_at(double t) const;
  std::vector<Phase> phases_;
};

struct SyntheticPass {
  kernel_spline::ObservationSet data;
  PassKinematics truth;
  std::vector<double> stop_positions;  // where this pass actually stopped
};

SyntheticPass generate_pass(const PassScenario& scenario, std::uint64_t seed, std::uint64_t pass_index);

}  // namespace speedprof::simulation
