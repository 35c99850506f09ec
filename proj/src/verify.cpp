#include "fylab/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace fylab {

namespace {

constexpr double kSlackMul = 1.0 + 1e-9;  // multiplicative bound slack
constexpr double kSlackAbs = 1e-12;       // absolute floating-point guard
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Potential P(Kind k, std::optional<double> q = std::nullopt) {
  return Potential::make(k, q);
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string fmt_eta(double eta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", eta);
  return buf;
}

// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y,
                bool* valid) {
  *valid = false;
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx < 1e-12) return 0.0;
  *valid = true;
  return sxy / sxx;
}

const std::vector<double>& rho_lambda_grid() {
  static const std::vector<double> grid = {1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
  return grid;
}

}  // namespace

bool VerificationReport::ok() const {
  for (const auto& c : checks)
    if (c.status == "fail") return false;
  return true;
}

void VerificationReport::add(const std::string& name, bool pass,
                             double measured, double expected,
                             double tolerance, const std::string& note) {
  checks.push_back(
      {name, pass ? "pass" : "fail", measured, expected, tolerance, note});
}

void VerificationReport::add_skip(const std::string& name, double measured,
                                  const std::string& note) {
  checks.push_back({name, "skip", measured, 0.0, 0.0, note});
}

VerificationReport check_table1() {
  VerificationReport rep{"table-1", {}};
  struct Row {
    Potential pot;
    double margin;  // kInf = no finite margin
    double beta;    // kInf = smoothness sentinel expected
    bool beta_lower_only;
    double alpha;
  };
  const std::vector<Row> rows = {
      {P(Kind::Shannon), kInf, 0.25, false, 1.0},
      {P(Kind::SemiCircle), kInf, 0.25, false, 2.0},
      {P(Kind::Tsallis, 0.5), kInf, std::pow(2.0, -2.5) / 0.5, false, 2.0},
      {P(Kind::Tsallis, 1.5), 3.0, std::pow(2.0, -1.5) / 1.5, false, 2.0 / 3.0},
      {P(Kind::Tsallis, 2.0), 2.0, 0.25, false, 0.5},
      {P(Kind::Tsallis, 3.0), 1.5, kInf, false, 0.5},
      {P(Kind::Tsallis, 4.0), 4.0 / 3.0, kInf, false, 0.5},
      {P(Kind::Renyi, 0.5), kInf, 0.5, false, 2.0},
      {P(Kind::Renyi, 1.5), 3.0, 1.0 / 6.0, true, 2.0 / 3.0},
      {P(Kind::Renyi, 2.0), 2.0, kInf, false, 1.0 / 3.0},
  };
  for (const auto& row : rows) {
    const std::string name = row.pot.name();
    FyLoss f(row.pot);

    auto m = f.separation_margin();
    const double m_meas = m ? *m : kInf;
    bool m_ok = std::isinf(row.margin)
                    ? !m.has_value()
                    : (m.has_value() && std::fabs(*m - row.margin) <= 1e-6);
    rep.add(name + "/margin", m_ok, m_meas, row.margin, 1e-6);

    const double beta = smoothness_estimate(f);
    std::string note;
    if (row.pot.smooth) {
      const double h0 = phi_hess(row.pot, 1e-9);
      if (h0 <= phi_hess(row.pot, 0.25) && h0 <= phi_hess(row.pot, 0.5))
        note = "phi'' infimum sits at the boundary";
    }
    if (row.beta_lower_only) {
      rep.add(name + "/beta", beta >= row.beta - 1e-6, beta, row.beta, 1e-6,
              "lower bound only" + (note.empty() ? "" : "; " + note));
    } else if (std::isinf(row.beta)) {
      rep.add(name + "/beta", std::isinf(beta), beta, row.beta, 0.0, note);
    } else {
      rep.add(name + "/beta", std::fabs(beta - row.beta) <= 1e-6, beta,
              row.beta, 1e-6, note);
    }

    const double alpha = alpha_limit(f, 1e-4);
    rep.add(name + "/alpha", std::fabs(alpha - row.alpha) <= 1e-3, alpha,
            row.alpha, 1e-3);
  }
  return rep;
}

VerificationReport check_rate_constants() {
  VerificationReport rep{"rate-constants", {}};
  struct Row {
    Potential pot;
    double c_phi;
  };
  const std::vector<Row> rows = {
      {P(Kind::Shannon), 1.0},
      {P(Kind::Tsallis, 3.0), std::sqrt(2.0 / 3.0)},
      {P(Kind::Renyi, 2.0), std::cbrt(3.0 / 8.0)},
  };
  for (const auto& row : rows) {
    FyLoss f(row.pot);
    const double c = c_phi_limit(f, 1e-4);
    rep.add(row.pot.name() + "/c-phi", std::fabs(c - row.c_phi) <= 1e-3, c,
            row.c_phi, 1e-3);
  }
  return rep;
}

VerificationReport check_conjugate_parity() {
  VerificationReport rep{"conjugate-parity", {}};
  const std::vector<Potential> pots = {
      P(Kind::Shannon),    P(Kind::Gini),  P(Kind::SemiCircle),
      P(Kind::Probit),     P(Kind::Hinge), P(Kind::Tsallis, 2.0),
  };
  for (const auto& pot : pots) {
    FyLoss f(pot);
    double dev_loss = 0.0, dev_g = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double z = -20.0 + 0.1 * i;
      dev_loss = std::max(dev_loss,
                          std::fabs(numeric_conjugate_loss(pot, z) - f.loss(z)));
      dev_g = std::max(dev_g, std::fabs(numeric_conjugate_g(pot, z) - f.g(z)));
    }
    rep.add(pot.name() + "/loss", dev_loss <= 1e-9, dev_loss, 0.0, 1e-9);
    rep.add(pot.name() + "/g", dev_g <= 1e-8, dev_g, 0.0, 1e-8);
    if (!pot.smooth) continue;
    double dev_cx = 0.0;
    for (int i = 2; i <= 98; ++i) {
      const double mu = 0.01 * i;
      const double z = -phi_grad(pot, mu);
      dev_cx = std::max(
          dev_cx, std::fabs(phi_hess(pot, mu) * f.loss_curvature(z) - 1.0));
    }
    rep.add(pot.name() + "/crouzeix", dev_cx <= 1e-6, dev_cx, 0.0, 1e-6);
  }
  return rep;
}

VerificationReport check_rho_properties() {
  VerificationReport rep{"rho-properties", {}};
  const std::vector<Potential> pots = {
      P(Kind::Shannon),       P(Kind::Gini),
      P(Kind::SemiCircle),    P(Kind::Probit),
      P(Kind::Hinge),         P(Kind::Tsallis, 0.5),
      P(Kind::Tsallis, 1.5),  P(Kind::Tsallis, 2.0),
      P(Kind::Tsallis, 3.0),  P(Kind::Tsallis, 4.0),
      P(Kind::Renyi, 0.5),    P(Kind::Renyi, 1.5),
      P(Kind::Renyi, 2.0),    P(Kind::PseudoSpherical, 2.0),
      P(Kind::PseudoSpherical, 4.0),
  };
  for (const auto& pot : pots) {
    const std::string name = pot.name();
    FyLoss f(pot);
    const double l0 = f.loss(0.0);
    const auto m = f.separation_margin();
    std::vector<double> vals, args;
    for (double lam : rho_lambda_grid()) {
      double zstar = 0.0;
      vals.push_back(rho(f, lam, &zstar));
      args.push_back(zstar);
    }
    double vmin = kInf;
    bool mono = true;
    double linear_ratio = 0.0;   // rho / (lambda * loss(0))
    double margin_ratio = 0.0;   // rho / m^2
    double argmin_dev = 0.0;     // consistency of the reported minimizer
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double lam = rho_lambda_grid()[i];
      vmin = std::min(vmin, vals[i]);
      if (i && vals[i] < vals[i - 1] * (1.0 - 1e-9) - 1e-15) mono = false;
      linear_ratio = std::max(linear_ratio, vals[i] / (lam * l0));
      if (m) margin_ratio = std::max(margin_ratio, vals[i] / (*m * *m));
      const double direct = lam * f.loss(args[i]) + args[i] * args[i];
      argmin_dev = std::max(
          argmin_dev, std::fabs(direct - vals[i]) / std::max(1.0, vals[i]));
    }
    rep.add(name + "/positive", vmin > 0.0, vmin, 0.0, 0.0);
    rep.add(name + "/monotone", mono, mono ? 1.0 : 0.0, 1.0, 0.0);
    rep.add(name + "/linear-cap", linear_ratio <= kSlackMul, linear_ratio, 1.0,
            1e-9, "rho <= lambda * loss(0)");
    if (m) {
      rep.add(name + "/margin-cap", margin_ratio <= kSlackMul, margin_ratio,
              1.0, 1e-9, "rho <= m^2");
    }
    if (pot.kind == Kind::Shannon) {
      double log_ratio = 0.0;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const double lam = rho_lambda_grid()[i];
        const double cap = 1.0 + std::log(lam) * std::log(lam);
        log_ratio = std::max(log_ratio, vals[i] / cap);
      }
      rep.add(name + "/log-cap", log_ratio <= kSlackMul, log_ratio, 1.0, 1e-9,
              "rho <= 1 + ln^2 lambda");
    }
    rep.add(name + "/argmin", argmin_dev <= 1e-9, argmin_dev, 0.0, 1e-9);
  }
  return rep;
}

VerificationReport check_self_bounding() {
  VerificationReport rep{"self-bounding", {}};
  {
    SelfBounding sb = self_bounding_probe(FyLoss(P(Kind::Probit)));
    rep.add("probit/diverging", sb.classification == "diverging",
            sb.c_e_hat.value_or(0.0), 0.0, 0.0,
            "classified: " + sb.classification);
  }
  {
    SelfBounding sb = self_bounding_probe(FyLoss(P(Kind::Shannon)));
    const bool bounded = sb.classification == "bounded";
    const double cb = sb.c_beta_hat.value_or(0.0);
    rep.add("shannon/bounded", bounded && cb >= 0.9 && cb <= 1.1, cb, 1.0, 0.1,
            "classified: " + sb.classification);
  }
  {
    SelfBounding sb = self_bounding_probe(FyLoss(P(Kind::SemiCircle)));
    const bool bounded = sb.classification == "bounded";
    const double cb = sb.c_beta_hat.value_or(0.0);
    rep.add("semicircle/bounded", bounded && std::fabs(cb - 0.5) <= 1e-6, cb,
            0.5, 1e-6, "classified: " + sb.classification);
  }
  const std::vector<Potential> margin_pots = {
      P(Kind::Gini),          P(Kind::Hinge),        P(Kind::Tsallis, 1.5),
      P(Kind::Tsallis, 2.0),  P(Kind::Tsallis, 3.0), P(Kind::Tsallis, 4.0),
      P(Kind::Renyi, 1.5),    P(Kind::Renyi, 2.0),
  };
  for (const auto& pot : margin_pots) {
    SelfBounding sb = self_bounding_probe(FyLoss(pot));
    rep.add(pot.name() + "/not-self-bounding",
            sb.classification == "not-self-bounding", 0.0, 0.0, 0.0,
            "classified: " + sb.classification);
  }
  return rep;
}

VerificationReport check_pilot_convergence() {
  VerificationReport rep{"pilot-convergence", {}};
  const Dataset ds = pilot_dataset();
  const MarginCertificate cert = margin_certificate(ds);
  FyLoss f(P(Kind::Tsallis, 2.0));
  for (double eta : {1.0, 4.0, 16.0}) {
    RunConfig cfg;
    cfg.eta = eta;
    cfg.steps = 10000;
    cfg.record_every = 1;
    cfg.sharpness_every = -1;
    Trace tr = gd_run(f, ds, cfg, &cert);
    const std::string tag = "pilot-t2-eta" + fmt_eta(eta);
    rep.add(tag + "/min-risk", tr.min_risk.back() <= 1e-8, tr.min_risk.back(),
            0.0, 1e-8, "min risk within 1e4 steps");
    const double cap = (4.0 * 2.0 + eta * 1.0) / cert.gamma;
    double wmax = 0.0;
    for (double w : tr.w_norm) wmax = std::max(wmax, w);
    rep.add(tag + "/norm-cap", wmax <= cap * kSlackMul + kSlackAbs, wmax, cap,
            1e-9, "(4m + eta*C_g)/gamma at every step");
  }
  return rep;
}

VerificationReport check_phase_transition() {
  VerificationReport rep{"phase-transition", {}};
  const Dataset ds = pilot_dataset();
  const MarginCertificate cert = margin_certificate(ds);
  FyLoss f(P(Kind::Shannon));
  const LossAnalysis a = analyze(f);
  RunConfig cfg;
  cfg.eta = 16.0;
  cfg.steps = 10000;
  cfg.record_every = 1;
  cfg.sharpness_every = -1;
  Trace tr = gd_run(f, ds, cfg, &cert);
  PhaseReport pr = phase_detect(tr, f, a, cfg.eta, ds.n);
  rep.add("phase/applicable", pr.applicable, pr.applicable ? 1.0 : 0.0, 1.0,
          0.0, pr.note);
  rep.add_skip("phase/threshold", pr.threshold,
               "min{1/(4 c_beta^2 eta), loss(0)/n}");
  const double s_meas = pr.s ? static_cast<double>(*pr.s) : -1.0;
  rep.add("phase/exists", pr.s.has_value() && !pr.insufficient_horizon, s_meas,
          0.0, 0.0, "first recorded step at or below the threshold");
  rep.add("phase/monotone", pr.monotone_after_s, pr.monotone_after_s, 1.0, 0.0,
          "risk nonincreasing after s");
  rep.add("phase/classified", pr.all_correct_at_s, pr.all_correct_at_s, 1.0,
          0.0, "all points correctly classified at s");
  rep.add("phase/stable-rate", pr.stable_rate_ok, pr.stable_rate_ok, 1.0, 0.0,
          "L(w_{s+t}) <= 5 rho(g^2 eta t)/(g^2 eta t)");
  return rep;
}

void check_trace(VerificationReport& rep, const std::string& label,
                 const FyLoss& f, const LossAnalysis& a, const Trace& tr,
                 std::size_t n) {
  const bool sgd = tr.mode == "sgd";
  const double gamma = tr.gamma;
  const double eta = tr.eta;
  const double cg = a.c_g;

  double norm_ratio = 0.0, avg_ratio = 0.0;
  long long norm_at = -1, avg_at = -1;
  bool norm_ok = true, avg_ok = true;
  bool have_avg = false;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    const long long t = tr.t[i];
    if (t < 1) continue;
    const double lam = gamma * gamma * eta * static_cast<double>(t);
    const double r = rho(f, lam);
    const double nb = (4.0 * std::sqrt(r) + eta * cg) / gamma;
    const double nr = tr.w_norm[i] / nb;
    if (nr > norm_ratio) {
      norm_ratio = nr;
      norm_at = t;
    }
    if (tr.w_norm[i] > nb * kSlackMul + kSlackAbs) norm_ok = false;
    if (!sgd && !std::isnan(tr.cum_risk[i])) {
      have_avg = true;
      const double avg = tr.cum_risk[i] / static_cast<double>(t);
      const double six = 6.0 * std::sqrt(r) + eta * cg;
      const double ab = six * six / (8.0 * gamma * gamma * eta *
                                     static_cast<double>(t));
      const double ar = avg / ab;
      if (ar > avg_ratio) {
        avg_ratio = ar;
        avg_at = t;
      }
      if (avg > ab * kSlackMul + kSlackAbs) avg_ok = false;
    }
  }
  rep.add(label + "/norm", norm_ok, norm_ratio, 1.0, 1e-9,
          "worst ratio at t=" + std::to_string(norm_at));
  if (have_avg) {
    rep.add(label + "/avg-risk", avg_ok, avg_ratio, 1.0, 1e-9,
            "worst ratio at t=" + std::to_string(avg_at));
  } else {
    rep.add_skip(label + "/avg-risk", 0.0,
                 "average-risk bound needs full-batch risks");
  }

  if (tr.has_alignment) {
    // Both sides are long running sums, so the 1e-9 slack is measured
    // relative to the accumulated quantity once it exceeds unit size.
    double deficit = -kInf;
    long long at = -1;
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      const double rhs = gamma * eta * tr.cum_g[i];
      const double d =
          (rhs - (tr.alignment[i] - tr.alignment[0])) / std::max(1.0, rhs);
      if (d > deficit) {
        deficit = d;
        at = tr.t[i];
      }
    }
    rep.add(label + "/perceptron", deficit <= 1e-9, deficit, 0.0, 1e-9,
            "worst relative deficit at t=" + std::to_string(at));
  } else {
    rep.add_skip(label + "/perceptron", 0.0, "no margin certificate attached");
  }

  if (sgd || !a.alpha) {
    rep.add_skip(label + "/hitting", 0.0,
                 sgd ? "per-sample stream: bound holds in expectation only"
                     : "no rate exponent available");
    return;
  }
  double worst = -kInf;
  bool hit_ok = true;
  int checked = 0, short_horizon = 0;
  std::string note;
  for (const auto& [eps, th] : tr.hits) {
    if (eps < 0.999e-3) continue;  // bound checked on {1e-1, 1e-2, 1e-3}
    const double bound =
        iteration_bound(a, static_cast<double>(n), gamma, eta, eps);
    if (th >= 0) {
      ++checked;
      const double excess = static_cast<double>(th) - (bound + 1.0);
      worst = std::max(worst, excess);
      if (excess > 0.0) hit_ok = false;
    } else if (static_cast<double>(tr.steps_completed) >= bound) {
      ++checked;
      hit_ok = false;
      note = "bound exceeded without a hit at eps=" + fmt_num(eps);
      worst = kInf;
    } else {
      ++short_horizon;
    }
  }
  if (checked == 0) {
    rep.add_skip(label + "/hitting", 0.0, "horizon shorter than every bound");
  } else {
    if (note.empty())
      note = short_horizon
                 ? "worst t_hit - (bound+1); " + std::to_string(short_horizon) +
                       " eps horizon-limited"
                 : "worst t_hit - (bound+1)";
    rep.add(label + "/hitting", hit_ok, worst, 0.0, 0.0, note);
  }
}

VerificationReport check_negative_controls() {
  VerificationReport rep{"negative-controls", {}};
  const Dataset ds = pilot_dataset();
  const MarginCertificate cert = margin_certificate(ds);
  FyLoss f(P(Kind::Shannon));
  const LossAnalysis a = analyze(f, 0.5);
  RunConfig cfg;
  cfg.eta = 4.0;
  cfg.steps = 2000;
  cfg.record_every = 1;
  cfg.sharpness_every = -1;
  const Trace tr = gd_run(f, ds, cfg, &cert);

  auto status_of = [&](const Trace& t, const std::string& suffix) {
    VerificationReport tmp{"tmp", {}};
    check_trace(tmp, "run", f, a, t, ds.n);
    for (const auto& c : tmp.checks)
      if (c.name == "run/" + suffix) return c.status;
    return std::string("missing");
  };

  {
    VerificationReport tmp{"tmp", {}};
    check_trace(tmp, "run", f, a, tr, ds.n);
    rep.add("control/baseline", tmp.ok(), tmp.ok() ? 1.0 : 0.0, 1.0, 0.0,
            "clean trace passes all four checks");
  }
  {
    Trace bad = tr;
    bad.eta *= 1e-4;
    rep.add("control/eta-deflated", status_of(bad, "norm") == "fail", 0.0, 0.0,
            0.0, "eta metadata shrunk 1e4x must break the norm bound");
  }
  {
    Trace bad = tr;
    bad.gamma *= 100.0;
    rep.add("control/gamma-inflated", status_of(bad, "perceptron") == "fail",
            0.0, 0.0, 0.0,
            "gamma metadata grown 100x must break the alignment bound");
  }
  {
    Trace bad = tr;
    for (double& v : bad.cum_risk) v *= 1000.0;
    rep.add("control/risk-scaled", status_of(bad, "avg-risk") == "fail", 0.0,
            0.0, 0.0, "risks grown 1000x must break the average bound");
  }
  return rep;
}

RateFit rate_fit(const FyLoss& f, const LossAnalysis& a, const Dataset& ds,
                 const MarginCertificate& cert, double eta,
                 std::vector<double> eps_grid, long long max_steps) {
  if (eps_grid.empty()) throw config_error("rate_fit: empty eps grid");
  std::sort(eps_grid.begin(), eps_grid.end(), std::greater<double>());
  eps_grid.erase(std::unique(eps_grid.begin(), eps_grid.end()),
                 eps_grid.end());

  RateFit fit;
  fit.eps_grid = eps_grid;
  fit.theory_alpha = a.alpha.value_or(0.0);
  double max_bound = 0.0;
  for (double eps : eps_grid) {
    const double b =
        iteration_bound(a, static_cast<double>(ds.n), cert.gamma, eta, eps);
    fit.bound_curve.push_back(b);
    if (std::isfinite(b)) max_bound = std::max(max_bound, b);
  }
  long long steps = max_steps;
  if (std::isfinite(max_bound) && max_bound + 2.0 < static_cast<double>(steps))
    steps = static_cast<long long>(std::ceil(max_bound)) + 2;

  RunConfig cfg;
  cfg.eta = eta;
  cfg.steps = steps;
  cfg.record_every = std::max<long long>(1, steps / 10000);
  cfg.sharpness_every = -1;
  cfg.hitting_eps = eps_grid;
  Trace tr = gd_run(f, ds, cfg, &cert);
  fit.steps_run = tr.steps_completed;

  for (double eps : eps_grid) {
    long long th = -1;
    for (const auto& [e, t] : tr.hits)
      if (e == eps) th = t;
    fit.hitting_times.push_back(th);
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (fit.hitting_times[i] >= 1) {
      xs.push_back(std::log(1.0 / eps_grid[i]));
      ys.push_back(std::log(static_cast<double>(fit.hitting_times[i])));
    }
  }
  fit.fitted_slope = ls_slope(xs, ys, &fit.slope_valid);
  return fit;
}

void check_rate_fit(VerificationReport& rep, const std::string& label,
                    const RateFit& fit, bool assert_slope) {
  bool mono = true;
  long long prev = -1;
  for (std::size_t i = 0; i < fit.eps_grid.size(); ++i) {
    if (fit.hitting_times[i] < 0) continue;
    if (fit.hitting_times[i] < prev) mono = false;
    prev = fit.hitting_times[i];
  }
  rep.add(label + "/monotone", mono, mono ? 1.0 : 0.0, 1.0, 0.0,
          "hitting times nondecreasing in 1/eps");

  bool within = true;
  double worst = -kInf;
  int unhit = 0;
  for (std::size_t i = 0; i < fit.eps_grid.size(); ++i) {
    if (fit.hitting_times[i] >= 0) {
      const double excess =
          static_cast<double>(fit.hitting_times[i]) - (fit.bound_curve[i] + 1.0);
      worst = std::max(worst, excess);
      if (excess > 0.0) within = false;
    } else if (static_cast<double>(fit.steps_run) >= fit.bound_curve[i]) {
      within = false;
      worst = kInf;
    } else {
      ++unhit;
    }
  }
  rep.add(label + "/within-bound", within, worst, 0.0, 0.0,
          unhit ? "worst t_hit - (bound+1); " + std::to_string(unhit) +
                      " eps horizon-limited"
                : "worst t_hit - (bound+1)");

  if (assert_slope) {
    rep.add(label + "/slope", fit.slope_valid &&
                                  fit.fitted_slope <=
                                      fit.theory_alpha + 0.2,
            fit.fitted_slope, fit.theory_alpha, 0.2,
            "LS slope of log t_hit against log(1/eps)");
  } else {
    rep.add_skip(label + "/slope", fit.slope_valid ? fit.fitted_slope : kNaN,
                 "informational; theory alpha = " + fmt_num(fit.theory_alpha));
  }
}

VerificationReport check_rate_fits(bool full) {
  VerificationReport rep{"rate-fit", {}};
  const Dataset ds = pilot_dataset();
  const MarginCertificate cert = margin_certificate(ds);

  {
    FyLoss f(P(Kind::Tsallis, 2.0));
    const LossAnalysis a = analyze(f, 0.5);
    RateFit fit = rate_fit(f, a, ds, cert, 16.0,
                           {1e-1, 1e-2, 1e-3, 1e-4}, 10000);
    check_rate_fit(rep, "tsallis(q=2)-eta16", fit, true);
  }
  {
    FyLoss f(P(Kind::Renyi, 2.0));
    const LossAnalysis a = analyze(f, 0.5);
    std::vector<double> grid = {1e-1, 1e-2, 1e-3};
    if (full) grid.push_back(1e-4);
    RateFit fit = rate_fit(f, a, ds, cert, 16.0, grid, 10000);
    check_rate_fit(rep, "renyi(q=2)-eta16", fit, false);
  }
  {
    FyLoss f(P(Kind::Shannon));
    const LossAnalysis a = analyze(f, 0.5);
    RateFit fit = rate_fit(f, a, ds, cert, 16.0, {1e-1, 1e-2, 1e-3},
                           full ? 100000 : 10000);
    check_rate_fit(rep, "shannon-eta16", fit, false);
  }
  return rep;
}

VerificationReport check_trace_suite(bool full, unsigned threads) {
  struct Spec {
    Potential pot;
    double eta;
    int ds_id;  // 0 = pilot, 1 = synth
    long long steps;
  };
  std::vector<Spec> specs;
  const std::vector<Potential> pilot_pots = {
      P(Kind::Shannon),       P(Kind::Gini),       P(Kind::Tsallis, 1.5),
      P(Kind::Tsallis, 2.0),  P(Kind::Tsallis, 3.0), P(Kind::Renyi, 2.0),
  };
  for (const auto& pot : pilot_pots)
    for (double eta : {1.0, 4.0, 16.0}) specs.push_back({pot, eta, 0, 10000});
  specs.push_back({P(Kind::Tsallis, 2.0), 4.0, 1, 10000});
  specs.push_back({P(Kind::Shannon), 4.0, 1, 10000});
  if (full) {
    specs.push_back({P(Kind::Shannon), 4.0, 0, 1000000});
    specs.push_back({P(Kind::Tsallis, 2.0), 4.0, 0, 1000000});
  }

  const Dataset pilot = pilot_dataset();
  const MarginCertificate pilot_cert = margin_certificate(pilot);
  const Dataset synth = synth_separable(2026, 32, 3, 0.25);
  const MarginCertificate synth_cert = margin_certificate(synth);

  // One analysis per distinct loss, shared across worker threads.
  std::map<std::string, std::shared_ptr<const LossAnalysis>> analyses;
  std::map<std::string, std::shared_ptr<const FyLoss>> losses;
  for (const auto& s : specs) {
    const std::string key = s.pot.name();
    if (losses.count(key)) continue;
    auto f = std::make_shared<const FyLoss>(s.pot);
    losses[key] = f;
    analyses[key] = std::make_shared<const LossAnalysis>(analyze(*f, 0.5));
  }

  std::vector<VerificationReport> frags(specs.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= specs.size()) return;
      const Spec& s = specs[i];
      const Dataset& ds = s.ds_id == 0 ? pilot : synth;
      const MarginCertificate& cert = s.ds_id == 0 ? pilot_cert : synth_cert;
      const FyLoss& f = *losses.at(s.pot.name());
      const LossAnalysis& a = *analyses.at(s.pot.name());
      RunConfig cfg;
      cfg.eta = s.eta;
      cfg.steps = s.steps;
      cfg.record_every = s.steps <= 10000 ? 10 : 0;
      cfg.sharpness_every = -1;
      Trace tr = gd_run(f, ds, cfg, &cert);
      const std::string label = s.pot.name() + "-eta" + fmt_eta(s.eta) +
                                (s.ds_id == 0 ? "-pilot" : "-synth") +
                                (s.steps > 10000 ? "-long" : "");
      check_trace(frags[i], label, f, a, tr, ds.n);
    }
  };
  unsigned nt = std::max(1u, std::min<unsigned>(
                                  threads, static_cast<unsigned>(specs.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < nt; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  VerificationReport rep{"trace-suite", {}};
  rep.add("suite/run-count", specs.size() >= 12,
          static_cast<double>(specs.size()), 12.0, 0.0,
          "distinct loss/stepsize runs checked");
  for (const auto& frag : frags)
    for (const auto& c : frag.checks) rep.checks.push_back(c);
  return rep;
}

VerificationReport check_sgd_ensemble() {
  VerificationReport rep{"sgd-ensemble", {}};
  FyLoss f(P(Kind::Tsallis, 2.0));
  const LossAnalysis a = analyze(f, 0.5);
  const double eta = 4.0, gamma = 0.2;
  const int seeds = 20;

  int successes = 0;
  bool all_pass = true;
  double worst_ratio = 0.0;
  for (int seed = 1; seed <= seeds; ++seed) {
    RunConfig cfg;
    cfg.eta = eta;
    cfg.steps = 100000;
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.sgd_dim = 3;
    cfg.sgd_gamma = gamma;
    cfg.record_every = 1000;
    cfg.sharpness_every = -1;
    Trace tr = sgd_run(f, cfg);
    if (tr.min_risk.back() <= 1e-2) ++successes;
    VerificationReport tmp{"tmp", {}};
    check_trace(tmp, "seed", f, a, tr, 1);
    for (const auto& c : tmp.checks) {
      if (c.name == "seed/norm") {
        worst_ratio = std::max(worst_ratio, c.measured);
        if (c.status != "pass") all_pass = false;
      }
      if (c.name == "seed/perceptron" && c.status == "fail") all_pass = false;
    }
  }
  rep.add("sgd/held-out-successes", successes >= 18,
          static_cast<double>(successes), 18.0, 0.0,
          "seeds reaching held-out risk <= 1e-2 out of 20");
  rep.add("sgd/norm-bound", all_pass, worst_ratio, 1.0, 1e-9,
          "stream norm + alignment bounds on every recorded step");

  // Probabilistic constants: recorded for reference, never asserted.
  const double m = f.separation_margin().value_or(0.0);
  const double cap = (4.0 * m + eta * a.c_g) / gamma;
  const double M = f.loss(-cap);
  const double delta = 0.1, eps = 1e-2;
  const double t0 = std::max(32.0 * M * M * std::log(1.0 / delta) / (eps * eps),
                             8.0 * M * std::log(1.0 / delta) / eps);
  const double alpha = a.alpha.value_or(0.5);
  const double N = std::pow(2.0, alpha) / (a.c_phi.value_or(1.0) * gamma * gamma) *
                   (4.0 * m / eta + a.c_g) * std::pow(eps, -alpha);
  rep.add_skip("sgd/const-M", M, "loss(-(4m + eta*C_g)/gamma)");
  rep.add_skip("sgd/const-t0", t0, "burn-in horizon at delta=0.1, eps=1e-2");
  rep.add_skip("sgd/const-N", N, "expected-hit bound at delta=0.1, eps=1e-2");
  return rep;
}

std::vector<VerificationReport> run_suite(bool full, unsigned threads) {
  std::vector<VerificationReport> reports;
  reports.push_back(check_table1());
  reports.push_back(check_rate_constants());
  reports.push_back(check_conjugate_parity());
  reports.push_back(check_pilot_convergence());
  reports.push_back(check_trace_suite(full, threads));
  reports.push_back(check_rate_fits(full));
  reports.push_back(check_phase_transition());
  reports.push_back(check_self_bounding());
  reports.push_back(check_rho_properties());
  reports.push_back(check_negative_controls());
  if (full) reports.push_back(check_sgd_ensemble());
  return reports;
}

bool suite_ok(const std::vector<VerificationReport>& reports) {
  for (const auto& r : reports)
    if (!r.ok()) return false;
  return true;
}

std::string reports_json(const std::vector<VerificationReport>& reports) {
  using json = nlohmann::ordered_json;
  auto num = [](double v) -> json {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    return v;
  };
  json doc;
  doc["ok"] = suite_ok(reports);
  doc["suites"] = json::array();
  for (const auto& r : reports) {
    json s;
    s["title"] = r.title;
    s["ok"] = r.ok();
    s["checks"] = json::array();
    for (const auto& c : r.checks) {
      json row;
      row["name"] = c.name;
      row["status"] = c.status;
      row["measured"] = num(c.measured);
      row["expected"] = num(c.expected);
      row["tolerance"] = num(c.tolerance);
      if (!c.note.empty()) row["note"] = c.note;
      s["checks"].push_back(row);
    }
    doc["suites"].push_back(s);
  }
  return doc.dump(2) + "\n";
}

std::string render_reports(const std::vector<VerificationReport>& reports) {
  std::ostringstream out;
  int pass = 0, fail = 0, skip = 0;
  for (const auto& r : reports) {
    out << "== " << r.title << " ==\n";
    for (const auto& c : r.checks) {
      if (c.status == "pass") ++pass;
      else if (c.status == "fail") ++fail;
      else ++skip;
      char line[256];
      std::snprintf(line, sizeof(line), "[%s] %-44s measured=%-14s expected=%-14s tol=%s",
                    c.status == "pass" ? "PASS"
                    : c.status == "fail" ? "FAIL"
                                         : "SKIP",
                    c.name.c_str(), fmt_num(c.measured).c_str(),
                    fmt_num(c.expected).c_str(), fmt_num(c.tolerance).c_str());
      out << line;
      if (!c.note.empty()) out << "  # " << c.note;
      out << "\n";
    }
  }
  out << "== summary ==\n"
      << reports.size() << " suites, " << (pass + fail + skip)
      << " checks: " << pass << " pass, " << fail << " fail, " << skip
      << " skip\n"
      << "RESULT: " << (fail == 0 ? "PASS" : "FAIL") << "\n";
  return out.str();
}

}  // namespace fylab
