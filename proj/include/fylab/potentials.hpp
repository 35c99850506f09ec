#pragma once
// Catalog of binary entropy potentials phi on [0,1]: convex, symmetric about
// 1/2, zero at both endpoints, nonpositive, with exact first and second
// derivatives. These generate margin-based losses via convex conjugation.

#include <optional>
#include <string>

#include "fylab/numeric.hpp"

namespace fylab {

enum class Kind {
  Shannon,
  Gini,
  Tsallis,
  Renyi,
  SemiCircle,
  Hinge,
  Probit,
  PseudoSpherical,
};

std::string kind_name(Kind k);               // lowercase config name
Kind kind_from_name(const std::string& s);   // throws config_error

struct Potential {
  Kind kind = Kind::Shannon;
  // Parameter: Tsallis q>0, q!=1; Renyi q in (0,2], q!=1; PseudoSpherical
  // q in (1,64]. Other kinds take no parameter.
  std::optional<double> q;
  bool smooth = true;  // false only for Hinge

  static Potential make(Kind k, std::optional<double> q = std::nullopt);
  static Potential make(const std::string& kind_name,
                        std::optional<double> q = std::nullopt);

  std::string name() const;  // e.g. "tsallis(q=1.5)"
};

// phi(mu) for mu in [0,1]; endpoints return exactly 0 by definition.
double phi(const Potential& p, double mu);

// phi'(mu) for mu strictly inside (0,1). Hinge returns the subgradient
// -1 / 0 / +1. Throws domain_error at the endpoints.
double phi_grad(const Potential& p, double mu);

// phi''(mu) for mu strictly inside (0,1); smooth kinds only
// (Hinge -> unsupported_error).
double phi_hess(const Potential& p, double mu);

// Stable evaluation of D(mu) = mu*phi'(mu) - phi(mu), the quantity entering
// the rate exponent and the conjugate value at dual pairs. Direct
// subtraction loses all signal for mu below ~1e-6 on some kinds; this
// routine switches to cancellation-free series forms near zero.
double mu_dphi_minus_phi(const Potential& p, double mu);

// True when the loss generated by this potential has a finite separation
// margin (known analytically for every catalog kind).
bool kind_has_margin(const Potential& p);

// Catalog classification of the rows whose conjugate smoothness is reported
// as the +infinity sentinel (see smoothness_estimate in fenchel.hpp).
bool smoothness_sentinel_kind(const Potential& p);

}  // namespace fylab
