#include "fylab/potentials.hpp"

#include <cmath>

namespace fylab {

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::Shannon: return "shannon";
    case Kind::Gini: return "gini";
    case Kind::Tsallis: return "tsallis";
    case Kind::Renyi: return "renyi";
    case Kind::SemiCircle: return "semicircle";
    case Kind::Hinge: return "hinge";
    case Kind::Probit: return "probit";
    case Kind::PseudoSpherical: return "pseudospherical";
  }
  return "?";
}

Kind kind_from_name(const std::string& s) {
  if (s == "shannon" || s == "logistic") return Kind::Shannon;
  if (s == "gini") return Kind::Gini;
  if (s == "tsallis") return Kind::Tsallis;
  if (s == "renyi") return Kind::Renyi;
  if (s == "semicircle") return Kind::SemiCircle;
  if (s == "hinge") return Kind::Hinge;
  if (s == "probit") return Kind::Probit;
  if (s == "pseudospherical") return Kind::PseudoSpherical;
  throw config_error("unknown potential kind: " + s);
}

Potential Potential::make(Kind k, std::optional<double> q) {
  Potential p;
  p.kind = k;
  p.smooth = (k != Kind::Hinge);
  switch (k) {
    case Kind::Tsallis:
      if (!q) throw config_error("tsallis requires q");
      if (!(*q > 0.0) || *q == 1.0)
        throw config_error("tsallis requires q > 0, q != 1");
      p.q = q;
      break;
    case Kind::Renyi:
      if (!q) throw config_error("renyi requires q");
      if (!(*q > 0.0) || *q == 1.0)
        throw config_error("renyi requires q > 0, q != 1");
      if (*q > 2.0)
        throw config_error("renyi with q > 2 is nonconvex and rejected");
      p.q = q;
      break;
    case Kind::PseudoSpherical:
      if (!q) throw config_error("pseudospherical requires q");
      if (!(*q > 1.0) || *q > 64.0)
        throw config_error("pseudospherical requires q in (1, 64]");
      p.q = q;
      break;
    default:
      if (q) throw config_error(kind_name(k) + " takes no q parameter");
      break;
  }
  return p;
}

Potential Potential::make(const std::string& name, std::optional<double> q) {
  return make(kind_from_name(name), q);
}

std::string Potential::name() const {
  if (q) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s(q=%g)", kind_name(kind).c_str(), *q);
    return buf;
  }
  return kind_name(kind);
}

namespace {

// All catalog potentials are symmetric about 1/2; evaluating at
// min(mu, 1-mu) makes the symmetry exact in floating point and keeps the
// stable small-argument forms in play on both ends.
inline double fold(double mu) { return mu <= 0.5 ? mu : 1.0 - mu; }

// S(mu) = mu^q + (1-mu)^q, written so that S-1 is available without
// cancellation for small mu: S-1 = mu^q + expm1(q*log1p(-mu)).
inline double pow_sum_minus_one(double q, double mu) {
  return std::pow(mu, q) + std::expm1(q * std::log1p(-mu));
}

// integral_0^mu t(1-t)^(q-2) dt as a series; every term is positive for
// q <= 2 and the terms decay geometrically for mu < 1/2.
double tail_integral_series(double q, double mu) {
  double s = 0.0, c = 1.0;
  for (int k = 0; k < 300; ++k) {
    double term = c * std::pow(mu, k + 2) / (k + 2);
    s += term;
    if (k > 2 && std::fabs(term) < 1e-18 * std::fabs(s)) break;
    c *= (q - 2.0 - k) / (k + 1.0) * (-1.0);
  }
  return s;
}

}  // namespace

double phi(const Potential& p, double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw domain_error("phi: mu outside [0,1]");
  if (mu == 0.0 || mu == 1.0) return 0.0;  // zero-entropy condition
  double m = fold(mu);
  switch (p.kind) {
    case Kind::Shannon:
      return m * std::log(m) + (1.0 - m) * std::log1p(-m);
    case Kind::Gini:
      return -m * (1.0 - m);
    case Kind::Tsallis:
      return pow_sum_minus_one(*p.q, m) / (*p.q - 1.0);
    case Kind::Renyi:
      return std::log1p(pow_sum_minus_one(*p.q, m)) / (*p.q - 1.0);
    case Kind::SemiCircle:
      return -2.0 * std::sqrt(m * (1.0 - m));
    case Kind::Hinge:
      return (1.0 - m) - 1.0;  // max(mu, 1-mu) - 1 with m = min side
    case Kind::Probit:
      return -norm_pdf(norm_quantile(m));
    case Kind::PseudoSpherical: {
      // Evaluated in its defining power form on purpose; see README notes
      // on the non-convergent exponent probe for this family.
      double S = std::pow(m, *p.q) + std::pow(1.0 - m, *p.q);
      return std::pow(S, 1.0 / *p.q) - 1.0;
    }
  }
  return 0.0;
}

double phi_grad(const Potential& p, double mu) {
  if (!(mu > 0.0 && mu < 1.0))
    throw domain_error("phi_grad: mu must lie strictly inside (0,1)");
  if (p.kind == Kind::Hinge) {
    if (mu < 0.5) return -1.0;
    if (mu > 0.5) return 1.0;
    return 0.0;
  }
  double m = fold(mu);
  double sign = mu <= 0.5 ? 1.0 : -1.0;  // phi' is odd about 1/2
  double g = 0.0;
  switch (p.kind) {
    case Kind::Shannon:
      g = std::log(m) - std::log1p(-m);
      break;
    case Kind::Gini:
      g = 2.0 * m - 1.0;
      break;
    case Kind::Tsallis: {
      double q = *p.q;
      g = q * (std::pow(m, q - 1.0) - std::pow(1.0 - m, q - 1.0)) / (q - 1.0);
      break;
    }
    case Kind::Renyi: {
      double q = *p.q;
      double p0 = std::pow(m, q) + std::pow(1.0 - m, q);
      double p1 = std::pow(m, q - 1.0) - std::pow(1.0 - m, q - 1.0);
      g = q * p1 / ((q - 1.0) * p0);
      break;
    }
    case Kind::SemiCircle:
      g = (2.0 * m - 1.0) / std::sqrt(m * (1.0 - m));
      break;
    case Kind::Probit:
      g = norm_quantile(m);
      break;
    case Kind::PseudoSpherical: {
      double q = *p.q;
      double S = std::pow(m, q) + std::pow(1.0 - m, q);
      g = std::pow(S, (1.0 - q) / q) *
          (std::pow(m, q - 1.0) - std::pow(1.0 - m, q - 1.0));
      break;
    }
    case Kind::Hinge:
      break;  // handled above
  }
  return sign * g;
}

double phi_hess(const Potential& p, double mu) {
  if (p.kind == Kind::Hinge)
    throw unsupported_error("phi_hess: hinge potential is not smooth");
  if (!(mu > 0.0 && mu < 1.0))
    throw domain_error("phi_hess: mu must lie strictly inside (0,1)");
  double m = fold(mu);
  switch (p.kind) {
    case Kind::Shannon:
      return 1.0 / (m * (1.0 - m));
    case Kind::Gini:
      return 2.0;
    case Kind::Tsallis: {
      double q = *p.q;
      return q * (std::pow(m, q - 2.0) + std::pow(1.0 - m, q - 2.0));
    }
    case Kind::Renyi: {
      double q = *p.q;
      double p0 = std::pow(m, q) + std::pow(1.0 - m, q);
      if (q == 2.0) {
        // q[(q-1)p2*p0 - q*p1^2] collapses to 8 mu(1-mu) exactly at q=2;
        // the generic form cancels catastrophically for small mu.
        return 8.0 * m * (1.0 - m) / (p0 * p0);
      }
      double p1 = std::pow(m, q - 1.0) - std::pow(1.0 - m, q - 1.0);
      double p2 = std::pow(m, q - 2.0) + std::pow(1.0 - m, q - 2.0);
      return q * ((q - 1.0) * p2 * p0 - q * p1 * p1) / ((q - 1.0) * p0 * p0);
    }
    case Kind::SemiCircle:
      return 1.0 / (2.0 * std::pow(m * (1.0 - m), 1.5));
    case Kind::Probit:
      return 1.0 / norm_pdf(norm_quantile(m));
    case Kind::PseudoSpherical: {
      double q = *p.q;
      double S = std::pow(m, q) + std::pow(1.0 - m, q);
      return (q - 1.0) * std::pow(S, (1.0 - 2.0 * q) / q) *
             std::pow(m * (1.0 - m), q - 2.0);
    }
    case Kind::Hinge:
      break;
  }
  return 0.0;
}

double mu_dphi_minus_phi(const Potential& p, double mu) {
  if (!(mu > 0.0 && mu < 1.0))
    throw domain_error("mu_dphi_minus_phi: mu must lie strictly inside (0,1)");
  switch (p.kind) {
    case Kind::Shannon:
      return -std::log1p(-mu);
    case Kind::Gini:
      return mu * mu;
    case Kind::SemiCircle:
      return std::sqrt(mu / (1.0 - mu));
    case Kind::Tsallis: {
      double q = *p.q;
      if (mu <= 1e-3)
        return std::pow(mu, q) + q * tail_integral_series(q, mu);
      return ((q - 1.0) * std::pow(mu, q) -
              q * mu * std::exp((q - 1.0) * std::log1p(-mu)) -
              std::expm1(q * std::log1p(-mu))) /
             (q - 1.0);
    }
    case Kind::Renyi: {
      double q = *p.q;
      if (mu > 1e-3) {
        double p0 = std::pow(mu, q) + std::pow(1.0 - mu, q);
        double p1 = std::pow(mu, q - 1.0) - std::pow(1.0 - mu, q - 1.0);
        return (mu * q * p1 / p0 - std::log(p0)) / (q - 1.0);
      }
      double pe1 = std::expm1(q * std::log1p(-mu));
      double e0 = std::pow(mu, q) + pe1;  // S - 1
      double r;                           // log(S) - (S-1)
      if (std::fabs(e0) < 1e-4) {
        double e2 = e0 * e0;
        r = -e2 / 2.0 + e2 * e0 / 3.0 - e2 * e2 / 4.0 + e2 * e2 * e0 / 5.0;
      } else {
        r = std::log1p(e0) - e0;
      }
      double B = (q - 1.0) * std::pow(mu, q) +
                 q * (q - 1.0) * tail_integral_series(q, mu);
      return (B - e0 * e0 - r * (1.0 + e0)) / ((q - 1.0) * (1.0 + e0));
    }
    default:
      return mu * phi_grad(p, mu) - phi(p, mu);
  }
}

bool kind_has_margin(const Potential& p) {
  switch (p.kind) {
    case Kind::Shannon:
    case Kind::SemiCircle:
    case Kind::Probit:
      return false;
    case Kind::Gini:
    case Kind::Hinge:
    case Kind::PseudoSpherical:
      return true;
    case Kind::Tsallis:
    case Kind::Renyi:
      return *p.q > 1.0;
  }
  return false;
}

bool smoothness_sentinel_kind(const Potential& p) {
  // Reference-table rows reported as beta = infinity. The Renyi q=2 case is
  // a genuine divergence (phi'' vanishes toward the simplex boundary, so the
  // loss curvature is unbounded approaching the margin); the Tsallis q>2
  // rows follow the reference table's convention for the kinked conjugate.
  if (p.kind == Kind::Tsallis && *p.q > 2.0) return true;
  if (p.kind == Kind::Renyi && *p.q == 2.0) return true;
  return false;
}

}  // namespace fylab
