#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fylab/data.hpp"
#include "fylab/fenchel.hpp"

namespace fylab {

// Fixed-stepsize run description.  For SGD the dataset is replaced by the
// synthetic generator spec (sgd_dim, sgd_gamma, seed) plus a held-out panel
// used to estimate the population risk at recorded steps.
struct RunConfig {
  double eta = 1.0;
  long long steps = 1;
  std::vector<double> w0;         // empty -> zero init
  long long record_every = 0;     // 0 -> 1 if steps <= 1e4, else ceil(T/1e4)
  long long sharpness_every = 0;  // 0 -> 10*record_every; -1 -> never sample
  std::vector<double> hitting_eps = {1e-1, 1e-2, 1e-3, 1e-4};
  // SGD generator spec
  std::uint64_t seed = 0;
  std::size_t sgd_dim = 0;
  double sgd_gamma = 0.0;
  std::size_t panel_size = 10000;
};

// Columnar trace; NaN marks an empty CSV cell (alignment without a
// certificate, sharpness at unsampled steps).  cum_g and cum_risk hold the
// exclusive prefix sums over all executed steps k < t.  For SGD, risk-family
// columns are measured on the held-out panel at recorded steps while cum_g
// sums the per-sample gradient potentials seen by the iteration itself.
struct Trace {
  std::vector<long long> t;
  std::vector<double> risk, min_risk, grad_norm, w_norm, alignment,
      g_potential, cum_g, sharpness, min_margin;
  std::vector<double> cum_risk;  // in-memory only, not a CSV column
  bool has_alignment = false;
  bool diverged = false;
  long long steps_completed = 0;
  std::vector<double> w_final;
  std::vector<std::pair<double, long long>> hits;  // (eps, first t), -1 never
  double gamma = 0.0;  // certificate margin backing the diagnostics (0 = none)
  double eta = 0.0;
  long long record_every = 1;
  std::string mode;  // "gd" or "sgd"
};

// Phase-transition summary of a trace (self-bounding losses only).
struct PhaseReport {
  bool applicable = false;
  double threshold = 0.0;  // min{ 1/(4 c_beta^2 eta), loss(0)/n }
  std::optional<long long> s;
  bool monotone_after_s = false;
  bool all_correct_at_s = false;
  bool stable_rate_ok = false;
  bool insufficient_horizon = false;
  std::string note;
  std::vector<std::pair<double, double>> psi;  // (lambda, lambda / rho(lambda))
};

double risk(const FyLoss& f, const Dataset& ds, const std::vector<double>& w);
std::vector<double> risk_grad(const FyLoss& f, const Dataset& ds,
                              const std::vector<double>& w);

// Largest eigenvalue of (1/n) sum loss''(<w,z_i>) z_i z_i^T by power
// iteration (200 rounds or relative change below 1e-10).
double sharpness(const FyLoss& f, const Dataset& ds,
                 const std::vector<double>& w);

Trace gd_run(const FyLoss& f, const Dataset& ds, const RunConfig& cfg,
             const MarginCertificate* cert = nullptr);
Trace sgd_run(const FyLoss& f, const RunConfig& cfg);

PhaseReport phase_detect(const Trace& tr, const FyLoss& f,
                         const LossAnalysis& a, double eta, std::size_t n);

// CSV columns (exact order):
// t,risk,min_risk,grad_norm,w_norm,alignment,g_potential,cum_g,sharpness,min_margin
void write_trace_csv(const Trace& tr, const std::string& path);

}  // namespace fylab
