#include "fylab/fenchel.hpp"

#include <algorithm>
#include <cmath>

namespace fylab {

namespace {

// Solve phi'(mu) = -t on (0, 1/2] for t >= 0.  phi' is increasing with
// phi'(1/2) = 0, so the root is unique when it exists; when even the
// smallest representable mu has phi'(mu) >= -t the argmax saturates at 0.
// Geometric bisection keeps full relative precision across hundreds of
// decades, which the loss inversion needs for potentials whose conjugate
// argmax decays like a power of the loss level.
double solve_lower_half(const Potential& pot, double t) {
  double lo = 1e-300, hi = 0.5;
  if (phi_grad(pot, lo) + t >= 0.0) return 0.0;
  for (int it = 0; it < 110; ++it) {
    double mid = std::sqrt(lo * hi);
    if (phi_grad(pot, mid) + t > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
    if (hi <= lo * (1.0 + 4e-16)) break;
  }
  double mu = std::sqrt(lo * hi);
  if (!pot.smooth) return mu;  // no curvature to polish with
  for (int it = 0; it < 2; ++it) {  // Newton polish
    double step = (phi_grad(pot, mu) + t) / phi_hess(pot, mu);
    double next = mu - step;
    if (next > 0.0 && next < 1.0) mu = next;
  }
  return mu;
}
constexpr double kMuGridFloor = 1e-9;  // exponent probe floor

bool has_closed_form(const Potential& p) {
  switch (p.kind) {
    case Kind::Shannon:
    case Kind::Gini:
    case Kind::SemiCircle:
    case Kind::Probit:
    case Kind::Hinge:
      return true;
    case Kind::Tsallis:
      return *p.q == 2.0;
    default:
      return false;
  }
}

double closed_loss(const Potential& p, double z) {
  switch (p.kind) {
    case Kind::Shannon:
      return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    case Kind::Gini: {
      if (z >= 1.0) return 0.0;
      if (z <= -1.0) return -z;
      return (1.0 - z) * (1.0 - z) / 4.0;
    }
    case Kind::Tsallis: {  // q = 2
      if (z >= 2.0) return 0.0;
      if (z <= -2.0) return -z;
      return (2.0 - z) * (2.0 - z) / 8.0;
    }
    case Kind::SemiCircle: {
      double s = std::sqrt(4.0 + z * z);
      return z >= 0.0 ? 2.0 / (s + z) : 0.5 * (s - z);
    }
    case Kind::Probit:
      return std::max(0.0, norm_pdf(z) - z * norm_cdf(-z));
    case Kind::Hinge:
      return std::max({0.0, 0.5 * (1.0 - z), -z});
    default:
      return 0.0;
  }
}

double closed_g(const Potential& p, double z) {
  switch (p.kind) {
    case Kind::Shannon: {
      if (z >= 0.0) {
        double e = std::exp(-z);
        return e / (1.0 + e);
      }
      return 1.0 / (1.0 + std::exp(z));
    }
    case Kind::Gini:
      return std::clamp((1.0 - z) / 2.0, 0.0, 1.0);
    case Kind::Tsallis:  // q = 2
      return std::clamp((2.0 - z) / 4.0, 0.0, 1.0);
    case Kind::SemiCircle: {
      double s = std::sqrt(4.0 + z * z);
      return z >= 0.0 ? 2.0 / (s * (s + z)) : 0.5 * (s - z) / s;
    }
    case Kind::Probit:
      return norm_cdf(-z);
    case Kind::Hinge: {
      if (z >= 1.0) return 0.0;
      if (z <= -1.0) return 1.0;
      return 0.5;
    }
    default:
      return 0.0;
  }
}

}  // namespace

FyLoss::FyLoss(Potential p) : pot_(p) {
  closed_form_ = has_closed_form(pot_);

  // Margin probe: s_k = -phi'(10^-k), k = 6..12, accelerated twice. A
  // margin is declared only when the raw sequence stays bounded (no
  // geometric blow-up) and the accelerated sequence is Cauchy at 1e-6.
  {
    std::vector<double> s;
    for (int k = 6; k <= 12; ++k) s.push_back(-phi_grad(pot_, std::pow(10.0, -k)));
    bool blow_up = std::fabs(s.back()) >= 3.0 * std::fabs(s.front()) + 1.0;
    std::vector<double> a = aitken(aitken(s));
    size_t n = a.size();
    bool cauchy = n >= 3 &&
                  std::fabs(a[n - 1] - a[n - 2]) <= 1e-6 &&
                  std::fabs(a[n - 2] - a[n - 3]) <= 1e-6;
    if (!blow_up && cauchy && a.back() > 1e-3) margin_ = a.back();
  }

  loss_at_zero_ = -phi(pot_, 0.5);
}

double FyLoss::argmax_mu(double z) const {
  if (pot_.kind == Kind::Hinge) {
    if (z >= 1.0) return 0.0;
    if (z <= -1.0) return 1.0;
    return 0.5;
  }
  if (margin_ && z >= *margin_) return 0.0;
  // Symmetry phi'(1 - nu) = -phi'(nu) folds the upper half onto the lower.
  if (z >= 0.0) return solve_lower_half(pot_, z);
  return 1.0 - solve_lower_half(pot_, -z);
}

double FyLoss::loss(double z) const {
  if (closed_form_) return closed_loss(pot_, z);
  double mu = argmax_mu(z);
  if (mu <= 0.0) return 0.0;
  if (mu >= 1.0) return -z;  // phi(1) = 0
  return std::max(0.0, -z * mu - phi(pot_, mu));
}

double FyLoss::g(double z) const {
  if (closed_form_) return closed_g(pot_, z);
  return argmax_mu(z);
}

double FyLoss::loss_curvature(double z) const {
  if (pot_.kind == Kind::Hinge) return 0.0;
  double mu = g(z);
  if (mu <= 1e-15 || mu >= 1.0 - 1e-15) return 0.0;
  return 1.0 / phi_hess(pot_, mu);
}

double FyLoss::loss_inverse(double eps) const {
  if (!(eps > 0.0) || !(eps < 1e300)) {
    throw domain_error("loss_inverse: eps must lie in (0, 1e300)");
  }
  double lo, hi;
  if (loss(0.0) > eps) {
    lo = 0.0;
    if (margin_) {
      hi = *margin_;
    } else {
      hi = 1.0;
      while (loss(hi) > eps) {
        hi *= 2.0;
        if (hi > 1e301) throw bracket_error("loss_inverse: no right bracket");
      }
    }
  } else {
    hi = 0.0;
    lo = -1.0;
    while (loss(lo) <= eps) {
      lo *= 2.0;
      if (lo < -1e301) throw bracket_error("loss_inverse: no left bracket");
    }
  }
  // Bisect to near machine precision in z (tighter than the value contract
  // |loss(z) - eps| <= 1e-12 * max(1, eps) demands, which downstream ladders
  // rely on).
  for (int it = 0; it < 300; ++it) {
    double mid = 0.5 * (lo + hi);
    if (loss(mid) > eps) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-15 * std::max(1.0, std::min(std::fabs(lo), std::fabs(hi))))
      break;
  }
  return 0.5 * (lo + hi);
}

double numeric_conjugate_g(const Potential& pot, double z) {
  if (z >= 0.0) return solve_lower_half(pot, z);
  return 1.0 - solve_lower_half(pot, -z);
}

double numeric_conjugate_loss(const Potential& pot, double z) {
  double mu = numeric_conjugate_g(pot, z);
  if (mu <= 0.0) return 0.0;
  if (mu >= 1.0) return -z;
  return std::max(0.0, -z * mu - phi(pot, mu));
}

double rho(const FyLoss& f, double lambda, double* argmin) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw domain_error("rho: lambda must be positive and finite");
  }
  auto m = f.separation_margin();
  double b = m ? std::max(*m, 1.0) + 1.0
               : std::log(std::max(lambda, 2.0)) + 10.0;
  while (-lambda * f.g(b) + 2.0 * b < 0.0) {
    b *= 2.0;
    if (b > 1e12) throw bracket_error("rho: right bracket did not close");
  }
  auto obj = [&](double z) { return lambda * f.loss(z) + z * z; };
  double zstar = 0.0;
  double val = golden_min(obj, -1.0, b, &zstar);
  if (argmin) *argmin = zstar;
  return val;
}

namespace {

// A(mu) = (mu phi' - phi) / (mu^2 phi''), evaluated through the stable
// bracket form.
double rate_integrand(const Potential& p, double mu) {
  return mu_dphi_minus_phi(p, mu) / (mu * mu * phi_hess(p, mu));
}

std::vector<double> exponent_grid(double eps_bar) {
  std::vector<double> grid;
  for (int j = 0; j <= 40; ++j) {
    double mu = eps_bar * std::pow(2.0, -j);
    if (mu < kMuGridFloor) {
      if (grid.empty()) grid.push_back(kMuGridFloor);
      break;
    }
    grid.push_back(mu);
  }
  return grid;
}

}  // namespace

double alpha_exponent(const FyLoss& f, double eps_bar, bool* converged) {
  const Potential& p = f.potential();
  if (p.kind == Kind::Hinge) {
    throw unsupported_error("alpha_exponent: hinge has no curvature exponent");
  }
  if (!(eps_bar > 0.0) || !(eps_bar < 1.0)) {
    throw domain_error("alpha_exponent: eps_bar must lie in (0, 1)");
  }
  std::vector<double> vals;
  double sup = -kInf;
  for (double mu : exponent_grid(eps_bar)) {
    double a = rate_integrand(p, mu);
    vals.push_back(a);
    sup = std::max(sup, a);
  }
  if (converged) {
    size_t tail = std::min<size_t>(8, vals.size());
    double mn = kInf, mx = -kInf;
    for (size_t i = vals.size() - tail; i < vals.size(); ++i) {
      mn = std::min(mn, vals[i]);
      mx = std::max(mx, vals[i]);
    }
    *converged = (mx - mn) <= 1e-3;
  }
  return sup;
}

double alpha_limit(const FyLoss& f, double eps_bar) {
  std::vector<double> s = {alpha_exponent(f, eps_bar),
                           alpha_exponent(f, eps_bar / 10.0),
                           alpha_exponent(f, eps_bar / 100.0)};
  std::vector<double> a = aitken(s);
  return a.back();
}

namespace {

// Both prefactor routes at one scale. Returns false when the conjugate
// argmax sits too close to the solver floor for the bracket-form route.
bool c_phi_routes(const FyLoss& f, double eps, double* out) {
  double alpha = alpha_exponent(f, eps);
  double zbar = f.loss_inverse(eps);
  double mubar = std::min(f.g(zbar), 1.0);
  double denom = std::pow(eps, alpha);
  if (denom <= 0.0 || !std::isfinite(denom)) return false;
  double via_eps = mubar / denom;
  *out = via_eps;
  if (mubar < 1e-12 || mubar >= 1.0) return true;  // skip the cross-check
  double d = mu_dphi_minus_phi(f.potential(), mubar);
  double via_bracket = mubar / std::pow(d, alpha);
  if (std::fabs(via_bracket - via_eps) >
      1e-8 * std::max(std::fabs(via_bracket), std::fabs(via_eps))) {
    throw analysis_error(
        "c_phi: bracket-form and scale-form routes disagree beyond 1e-8 for " +
        f.potential().name());
  }
  return true;
}

}  // namespace

double c_phi(const FyLoss& f, double eps_bar) {
  double v = 0.0;
  if (!c_phi_routes(f, eps_bar, &v)) {
    throw analysis_error("c_phi: scale form not computable at this eps_bar");
  }
  return v;
}

double c_phi_limit(const FyLoss& f, double eps_bar) {
  std::vector<double> rungs;
  for (int j = 0; j <= 6; ++j) {
    double eps = eps_bar * std::pow(8.0, -j);
    double zbar = f.loss_inverse(eps);
    if (std::min(f.g(zbar), 1.0) < 1e-12) break;  // solver floor reached
    double v = 0.0;
    if (!c_phi_routes(f, eps, &v)) break;
    rungs.push_back(v);
  }
  if (rungs.size() < 3) return c_phi(f, eps_bar);
  return aitken_limit(rungs);
}

double lipschitz_cg(const FyLoss&) {
  // |loss'(z)| = g(z) = conjugate argmax, which lives in [0,1].
  return 1.0;
}

double smoothness_estimate(const FyLoss& f) {
  const Potential& p = f.potential();
  if (p.kind == Kind::Hinge) return kInf;
  const double lo = 1e-9, hi = 0.5;  // symmetric about 1/2
  const int n = 20000;
  double best = kInf, best_mu = hi;
  for (int i = 0; i <= n; ++i) {
    double mu = lo + (hi - lo) * i / n;
    double h = phi_hess(p, mu);
    if (h < best) {
      best = h;
      best_mu = mu;
    }
  }
  double span = (hi - lo) / n;
  double a = std::max(lo, best_mu - 2.0 * span);
  double b = std::min(hi, best_mu + 2.0 * span);
  double refined =
      golden_min([&](double mu) { return phi_hess(p, mu); }, a, b);
  best = std::min(best, refined);
  if (smoothness_sentinel_kind(p)) return kInf;
  if (best < 1e-6) return kInf;  // curvature collapses toward the boundary
  return 1.0 / best;
}

SelfBounding self_bounding_probe(const FyLoss& f) {
  SelfBounding out;
  auto m = f.separation_margin();
  if (m) {
    out.classification = "not-self-bounding";
    double zmax = std::min(10.0, *m - 1e-6);
    double best = 0.0;
    for (int i = 0; i <= 400; ++i) {
      double z = zmax * i / 400.0;
      double g = f.g(z);
      if (g > 1e-300) best = std::max(best, f.loss(z) / g);
    }
    out.c_e_hat = best;
    return out;
  }
  double cbeta = 0.0;
  for (int i = 0; i <= 400; ++i) {
    double z = -10.0 + 20.0 * i / 400.0;
    double l = f.loss(z);
    if (l > 1e-300) cbeta = std::max(cbeta, f.g(z) / l);
  }
  // trend probe: does g/loss keep growing along the flat tail?
  double r_first = 0.0, r_last = 0.0;
  for (double z : {10.0, 20.0, 30.0}) {
    double l = f.loss(z);
    if (l > 1e-300) {
      double r = f.g(z) / l;
      if (r_first == 0.0) r_first = r;
      r_last = r;
    }
  }
  bool diverging = r_first > 0.0 && r_last >= 2.0 * r_first;
  if (diverging) {
    out.classification = "diverging";
  } else {
    out.classification = "bounded";
    out.c_beta_hat = cbeta;
  }
  double ce = 0.0;
  for (int i = 0; i <= 400; ++i) {
    double z = 10.0 * i / 400.0;
    double g = f.g(z);
    if (g > 1e-300) ce = std::max(ce, f.loss(z) / g);
  }
  out.c_e_hat = ce;
  return out;
}

double iteration_bound(const LossAnalysis& a, double n, double gamma,
                       double eta, double eps) {
  if (!a.alpha || !a.c_phi) {
    throw unsupported_error("iteration_bound: no rate constants available");
  }
  if (!(eps > 0.0) || eps >= a.eps_bar) {
    throw domain_error("iteration_bound: eps must lie in (0, eps_bar)");
  }
  if (!(n > 0.0) || !(gamma > 0.0) || !(eta > 0.0)) {
    throw domain_error("iteration_bound: n, gamma, eta must be positive");
  }
  double alpha = *a.alpha, cphi = *a.c_phi;
  double g2 = gamma * gamma;
  if (a.margin) {
    double m = *a.margin;
    return n / (cphi * g2) * (4.0 * m / eta + a.c_g) * std::pow(eps, -alpha);
  }
  double t1 = 2.0 * a.c_g * n / (cphi * g2) * std::pow(eps, -alpha);
  double t2 = 16.0 * a.loss_at_zero * n * n / (cphi * cphi * g2 * eta) *
              std::pow(eps, -2.0 * alpha);
  return t1 + t2;
}

LossAnalysis analyze(const FyLoss& f, double eps_bar) {
  LossAnalysis a;
  a.potential = f.potential();
  a.margin = f.separation_margin();
  a.eps_bar = eps_bar;
  a.loss_at_zero = f.loss(0.0);
  a.c_g = lipschitz_cg(f);
  a.beta_hat = smoothness_estimate(f);
  a.self_bounding = self_bounding_probe(f);
  if (f.potential().kind != Kind::Hinge) {
    bool conv = false;
    double raw = alpha_exponent(f, eps_bar, &conv);
    a.alpha_converged = conv;
    if (conv) {
      a.alpha = alpha_limit(f, eps_bar);
      a.c_phi = c_phi_limit(f, eps_bar);
    } else {
      a.alpha = raw;  // honest raw probe; flagged by alpha_converged=false
    }
  }
  for (double lam = 1.0; lam <= 1.5e6; lam *= 10.0) {
    RhoSample s;
    s.lambda = lam;
    s.value = rho(f, lam, &s.argmin);
    a.rho_samples.push_back(s);
  }
  return a;
}

}  // namespace fylab
