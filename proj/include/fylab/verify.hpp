// Verification suite: replays the theory's checkable claims (constant
// tables, conjugate parity, trace inequalities, hitting-time bounds, the
// self-bounding dichotomy, rho envelope properties) against fresh runs and
// reports pass/fail rows with the measured values.
#pragma once

#include <string>
#include <vector>

#include "fylab/descent.hpp"

namespace fylab {

struct CheckResult {
  std::string name;
  std::string status;  // "pass" | "fail" | "skip"
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct VerificationReport {
  std::string title;
  std::vector<CheckResult> checks;

  bool ok() const;  // true when no non-skipped check failed
  void add(const std::string& name, bool pass, double measured,
           double expected, double tolerance, const std::string& note = "");
  void add_skip(const std::string& name, double measured,
                const std::string& note);
};

// Hitting times of one run against the theoretical bound curve.
struct RateFit {
  std::vector<double> eps_grid;          // strictly decreasing
  std::vector<long long> hitting_times;  // -1 = not hit within the horizon
  std::vector<double> bound_curve;       // theoretical step bounds
  double fitted_slope = 0.0;  // LS slope of log t against log(1/eps)
  bool slope_valid = false;   // >= 2 usable hits with spread
  double theory_alpha = 0.0;
  long long steps_run = 0;
};

// Constant-table checks (margins, smoothness, exponents, prefactors).
VerificationReport check_table1();
VerificationReport check_rate_constants();
// Numeric conjugate against every registered closed form + Crouzeix identity.
VerificationReport check_conjugate_parity();
// Envelope properties of rho on lambda = 1, 10, ..., 1e6.
VerificationReport check_rho_properties();
// Bounded/diverging/not-self-bounding classification per loss family.
VerificationReport check_self_bounding();
// Reference pilot runs: min-risk convergence and the hard norm cap.
VerificationReport check_pilot_convergence();
// Threshold crossing, monotone tail, classification, stable-phase rate.
VerificationReport check_phase_transition();

// Appends the four per-trace checks (norm bound, average-risk bound,
// perceptron alignment, hitting times vs the iteration bound) for one run.
// `n` is the training-set size entering the iteration bound (1 for
// single-sample streams).
void check_trace(VerificationReport& rep, const std::string& label,
                 const FyLoss& f, const LossAnalysis& a, const Trace& tr,
                 std::size_t n);

// Deliberately corrupted traces must make their targeted check fail.
VerificationReport check_negative_controls();

// Runs GD with the given hitting grid, compares against the bound curve,
// and fits the empirical rate slope. eps_grid must be nonempty; entries
// the run never hits are marked -1 and excluded from the fit.
RateFit rate_fit(const FyLoss& f, const LossAnalysis& a, const Dataset& ds,
                 const MarginCertificate& cert, double eta,
                 std::vector<double> eps_grid, long long max_steps = 100000);
void check_rate_fit(VerificationReport& rep, const std::string& label,
                    const RateFit& fit, bool assert_slope);

// The >= 12-combination GD sweep with every trace checked; `full` adds the
// 1e6-step reference traces. Independent runs fan out over `threads`
// workers; the report order is fixed regardless.
VerificationReport check_trace_suite(bool full, unsigned threads);
VerificationReport check_rate_fits(bool full);
// 20-seed SGD ensemble: held-out convergence count, per-trace norm bounds,
// and the probabilistic constants (logged, not asserted).
VerificationReport check_sgd_ensemble();

// Fixed-order aggregation of everything above; `full` adds the SGD
// ensemble, the long traces, and the finer rate grid.
std::vector<VerificationReport> run_suite(bool full, unsigned threads = 1);
bool suite_ok(const std::vector<VerificationReport>& reports);

// Rendering: a stable JSON document and a fixed-width text table. Both are
// deterministic for identical inputs.
std::string reports_json(const std::vector<VerificationReport>& reports);
std::string render_reports(const std::vector<VerificationReport>& reports);

}  // namespace fylab
