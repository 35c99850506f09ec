// Fenchel-Young losses built from entropy potentials: pointwise loss ops,
// margin detection, rate constants, and the scalarized envelope rho.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fylab/potentials.hpp"

namespace fylab {

// Outcome of the self-bounding probe: does the slope magnitude stay
// controlled by the loss value itself?
struct SelfBounding {
  std::string classification;  // "bounded" | "diverging" | "not-self-bounding"
  std::optional<double> c_beta_hat;  // sup g/loss when bounded
  std::optional<double> c_e_hat;     // sup loss/g over the probe window
};

struct RhoSample {
  double lambda = 0.0;
  double value = 0.0;
  double argmin = 0.0;
};

// Everything the rate theory needs about one loss, with extrapolated limit
// constants where a ladder is available.
struct LossAnalysis {
  Potential potential;
  std::optional<double> margin;  // separation margin, absent for tail losses
  std::optional<double> alpha;   // rate exponent (absent for the hinge)
  bool alpha_converged = false;  // plateau test at the base scale
  std::optional<double> c_phi;   // rate prefactor constant
  double c_g = 1.0;              // global slope bound of the loss
  double beta_hat = 0.0;         // smoothness estimate, kInf sentinel allowed
  double eps_bar = 0.0;          // base scale the constants were probed at
  double loss_at_zero = 0.0;     // loss(0) = -phi(1/2)
  SelfBounding self_bounding;
  std::vector<RhoSample> rho_samples;  // lambda = 1, 10, ..., 1e6
};

class FyLoss {
 public:
  explicit FyLoss(Potential p);

  const Potential& potential() const { return pot_; }

  // loss(z) = phi*(-z); nonnegative, convex, nonincreasing.
  double loss(double z) const;
  // g(z) = -loss'(z) = argmax of the conjugate problem; lives in [0,1].
  double g(double z) const;
  // loss''(z) = 1/phi''(g(z)) on the interior branch, 0 on saturated tails.
  double loss_curvature(double z) const;
  // The unique z with loss(z) = eps; |loss(z) - eps| <= 1e-12 * max(1, eps).
  double loss_inverse(double eps) const;
  // Margin detected by probing phi' toward 0 (absent when phi' diverges).
  std::optional<double> separation_margin() const { return margin_; }

 private:
  double argmax_mu(double z) const;  // solves phi'(mu) = -z on (0,1)

  Potential pot_;
  std::optional<double> margin_;
  double loss_at_zero_ = 0.0;
  bool closed_form_ = false;
};

// The bisection-based conjugate engine, bypassing any registered closed
// form. Exposed so the verification suite can compare the two evaluation
// routes on the same potential.
double numeric_conjugate_loss(const Potential& pot, double z);
double numeric_conjugate_g(const Potential& pot, double z);

// rho(lambda) = min_z lambda * loss(z) + z^2, the envelope driving the
// stable-phase rates. Optional out-param receives the minimizer.
double rho(const FyLoss& f, double lambda, double* argmin = nullptr);

// Rate exponent: sup of A(mu) = (mu phi' - phi) / (mu^2 phi'') over the
// dyadic grid eps_bar * 2^-j, j = 0..40 (floored at 1e-9). `converged`
// reports whether the last eight grid values plateaued within 1e-3.
double alpha_exponent(const FyLoss& f, double eps_bar,
                      bool* converged = nullptr);

// Ladder extrapolation of alpha_exponent over eps_bar, eps_bar/10,
// eps_bar/100 (Aitken).
double alpha_limit(const FyLoss& f, double eps_bar);

// Rate prefactor at scale eps_bar, computed over two algebraically
// equivalent routes that must agree to 1e-8 relative (consistency check of
// loss_inverse, g, and the stable bracket form).
double c_phi(const FyLoss& f, double eps_bar);

// Ladder extrapolation of c_phi over eps_bar * 8^-j (double Aitken). Rungs
// where the conjugate argmax would fall below the solver's bracket floor are
// dropped; with fewer than three usable rungs the base value is returned.
double c_phi_limit(const FyLoss& f, double eps_bar);

// Global slope bound of the loss (the conjugate argmax lives in [0,1]).
double lipschitz_cg(const FyLoss& f);

// Smoothness estimate: 1 / inf phi'' over [1e-9, 1-1e-9] (scan + golden
// refinement). Returns kInf for the hinge, for kinds classified as having a
// kinked conjugate, and when the infimum collapses below 1e-6.
double smoothness_estimate(const FyLoss& f);

// Classifies the g/loss ratio on a fixed grid; see SelfBounding.
SelfBounding self_bounding_probe(const FyLoss& f);

// Steps sufficient for min-risk <= eps at the analysis' constants, on n
// points with margin gamma and step size eta. eps must be below
// analysis.eps_bar. Throws unsupported_error when no exponent is available.
double iteration_bound(const LossAnalysis& a, double n, double gamma,
                       double eta, double eps);

// Runs the full battery above at base scale eps_bar.
LossAnalysis analyze(const FyLoss& f, double eps_bar = 1e-2);

}  // namespace fylab
