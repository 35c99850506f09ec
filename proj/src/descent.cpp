#include "fylab/descent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace fylab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRiskAbort = 1e300;
constexpr double kNormAbort = 1e150;

long long resolve_record_every(const RunConfig& cfg) {
  if (cfg.record_every > 0) return cfg.record_every;
  if (cfg.steps <= 10000) return 1;
  return (cfg.steps + 9999) / 10000;
}

long long resolve_sharpness_every(const RunConfig& cfg, long long rec) {
  if (cfg.sharpness_every < 0) return -1;
  if (cfg.sharpness_every > 0) return cfg.sharpness_every;
  return 10 * rec;
}

void check_common(const RunConfig& cfg) {
  if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) {
    throw domain_error("run config: eta must be positive and finite");
  }
  if (cfg.steps < 1) throw domain_error("run config: steps must be >= 1");
  for (double e : cfg.hitting_eps) {
    if (!(e > 0.0)) throw domain_error("run config: hitting eps must be positive");
  }
}

struct HitTracker {
  std::vector<std::pair<double, long long>> hits;
  explicit HitTracker(const std::vector<double>& eps) {
    for (double e : eps) hits.emplace_back(e, -1);
  }
  void observe(double risk_value, long long t) {
    for (auto& h : hits) {
      if (h.second < 0 && risk_value <= h.first) h.second = t;
    }
  }
};

}  // namespace

double risk(const FyLoss& f, const Dataset& ds, const std::vector<double>& w) {
  if (w.size() != ds.d) throw domain_error("risk: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    s += f.loss(dot(w.data(), ds.zrow(i), ds.d));
  }
  return s / static_cast<double>(ds.n);
}

std::vector<double> risk_grad(const FyLoss& f, const Dataset& ds,
                              const std::vector<double>& w) {
  if (w.size() != ds.d) throw domain_error("risk_grad: dimension mismatch");
  std::vector<double> g(ds.d, 0.0);
  for (std::size_t i = 0; i < ds.n; ++i) {
    double gi = f.g(dot(w.data(), ds.zrow(i), ds.d));
    axpy(-gi / static_cast<double>(ds.n), ds.zrow(i), g.data(), ds.d);
  }
  return g;
}

double sharpness(const FyLoss& f, const Dataset& ds,
                 const std::vector<double>& w) {
  if (f.potential().kind == Kind::Hinge) {
    throw unsupported_error("sharpness: hinge loss has no Hessian");
  }
  if (w.size() != ds.d) throw domain_error("sharpness: dimension mismatch");
  std::vector<double> curv(ds.n);
  bool any = false;
  for (std::size_t i = 0; i < ds.n; ++i) {
    curv[i] = f.loss_curvature(dot(w.data(), ds.zrow(i), ds.d));
    if (curv[i] > 0.0) any = true;
  }
  if (!any) return 0.0;

  // deterministic start vector with no special alignment
  std::vector<double> v(ds.d), av(ds.d);
  for (std::size_t j = 0; j < ds.d; ++j) {
    v[j] = 1.0 / std::sqrt(static_cast<double>(j + 1));
  }
  double vn = nrm2(v);
  for (auto& vj : v) vj /= vn;

  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    std::fill(av.begin(), av.end(), 0.0);
    for (std::size_t i = 0; i < ds.n; ++i) {
      if (curv[i] == 0.0) continue;
      double c = curv[i] * dot(v.data(), ds.zrow(i), ds.d) /
                 static_cast<double>(ds.n);
      axpy(c, ds.zrow(i), av.data(), ds.d);
    }
    double nn = nrm2(av);
    if (nn < 1e-300) return 0.0;
    double next = dot(v, av);  // Rayleigh quotient, v is unit
    for (std::size_t j = 0; j < ds.d; ++j) v[j] = av[j] / nn;
    if (it > 0 && std::fabs(next - lambda) <= 1e-10 * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

Trace gd_run(const FyLoss& f, const Dataset& ds, const RunConfig& cfg,
             const MarginCertificate* cert) {
  check_common(cfg);
  if (!cfg.w0.empty() && cfg.w0.size() != ds.d) {
    throw domain_error("run config: w0 dimension mismatch");
  }
  const long long rec = resolve_record_every(cfg);
  const long long sharp_every = resolve_sharpness_every(cfg, rec);
  const bool can_sharpness = f.potential().kind != Kind::Hinge;

  Trace tr;
  tr.mode = "gd";
  tr.eta = cfg.eta;
  tr.record_every = rec;
  tr.has_alignment = cert != nullptr;
  tr.gamma = cert ? cert->gamma : 0.0;

  std::vector<double> w = cfg.w0.empty() ? std::vector<double>(ds.d, 0.0)
                                         : cfg.w0;
  std::vector<double> grad(ds.d);
  HitTracker hits(cfg.hitting_eps);
  double min_risk = kInf, cum_g = 0.0, cum_risk = 0.0;
  const double inv_n = 1.0 / static_cast<double>(ds.n);

  for (long long t = 0;; ++t) {
    // one pass over the data gives every diagnostic at w_t
    double L = 0.0, G = 0.0, mmin = kInf;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < ds.n; ++i) {
      double m = dot(w.data(), ds.zrow(i), ds.d);
      L += f.loss(m);
      double gi = f.g(m);
      G += gi;
      axpy(-gi * inv_n, ds.zrow(i), grad.data(), ds.d);
      mmin = std::min(mmin, m);
    }
    L *= inv_n;
    G *= inv_n;
    double wn = nrm2(w);

    if (!std::isfinite(L) || L > kRiskAbort || wn > kNormAbort) {
      tr.diverged = true;
      tr.steps_completed = t;
      break;
    }

    min_risk = std::min(min_risk, L);
    hits.observe(L, t);

    if (t % rec == 0 || t == cfg.steps) {
      tr.t.push_back(t);
      tr.risk.push_back(L);
      tr.min_risk.push_back(min_risk);
      tr.grad_norm.push_back(nrm2(grad));
      tr.w_norm.push_back(wn);
      tr.alignment.push_back(cert ? dot(w, cert->w_star) : kNaN);
      tr.g_potential.push_back(G);
      tr.cum_g.push_back(cum_g);
      tr.cum_risk.push_back(cum_risk);
      tr.min_margin.push_back(mmin);
      bool sample_sharp =
          can_sharpness && sharp_every > 0 && t % sharp_every == 0;
      tr.sharpness.push_back(sample_sharp ? sharpness(f, ds, w) : kNaN);
    }

    if (t == cfg.steps) {
      tr.steps_completed = t;
      break;
    }
    cum_g += G;
    cum_risk += L;
    axpy(-cfg.eta, grad, w);
  }

  tr.w_final = w;
  tr.hits = hits.hits;
  return tr;
}

Trace sgd_run(const FyLoss& f, const RunConfig& cfg) {
  check_common(cfg);
  if (cfg.sgd_dim == 0) throw domain_error("sgd run: sgd_dim must be positive");
  if (!(cfg.sgd_gamma > 0.0 && cfg.sgd_gamma < 0.9)) {
    throw domain_error("sgd run: sgd_gamma must lie in (0, 0.9)");
  }
  if (!cfg.w0.empty() && cfg.w0.size() != cfg.sgd_dim) {
    throw domain_error("run config: w0 dimension mismatch");
  }
  const std::size_t d = cfg.sgd_dim;
  const long long rec = resolve_record_every(cfg);

  // held-out panel, separately seeded, fixed for the whole run
  const std::size_t P = cfg.panel_size;
  std::vector<double> panel(P * d);
  {
    SampleStream ps(d, cfg.sgd_gamma, cfg.seed ^ 0x9e3779b97f4a7c15ull);
    for (std::size_t i = 0; i < P; ++i) ps.next_z(&panel[i * d]);
  }
  SampleStream stream(d, cfg.sgd_gamma, cfg.seed);

  Trace tr;
  tr.mode = "sgd";
  tr.eta = cfg.eta;
  tr.record_every = rec;
  tr.has_alignment = true;  // the generator's labeling direction is e1
  tr.gamma = cfg.sgd_gamma;

  std::vector<double> w = cfg.w0.empty() ? std::vector<double>(d, 0.0)
                                         : cfg.w0;
  std::vector<double> zbuf(d), pgrad(d);
  HitTracker hits(cfg.hitting_eps);
  double min_risk = kInf, cum_g = 0.0;
  const double inv_p = 1.0 / static_cast<double>(P);

  for (long long t = 0;; ++t) {
    double wn = nrm2(w);
    if (!std::isfinite(wn) || wn > kNormAbort) {
      tr.diverged = true;
      tr.steps_completed = t;
      break;
    }

    if (t % rec == 0 || t == cfg.steps) {
      // panel pass: population-risk estimates at w_t
      double L = 0.0, G = 0.0, mmin = kInf;
      std::fill(pgrad.begin(), pgrad.end(), 0.0);
      for (std::size_t i = 0; i < P; ++i) {
        double m = dot(w.data(), &panel[i * d], d);
        L += f.loss(m);
        double gi = f.g(m);
        G += gi;
        axpy(-gi * inv_p, &panel[i * d], pgrad.data(), d);
        mmin = std::min(mmin, m);
      }
      L *= inv_p;
      G *= inv_p;
      if (!std::isfinite(L) || L > kRiskAbort) {
        tr.diverged = true;
        tr.steps_completed = t;
        break;
      }
      min_risk = std::min(min_risk, L);
      hits.observe(L, t);

      tr.t.push_back(t);
      tr.risk.push_back(L);
      tr.min_risk.push_back(min_risk);
      tr.grad_norm.push_back(nrm2(pgrad));
      tr.w_norm.push_back(wn);
      tr.alignment.push_back(w[0]);  // <w, e1>
      tr.g_potential.push_back(G);
      tr.cum_g.push_back(cum_g);
      tr.cum_risk.push_back(kNaN);
      tr.min_margin.push_back(mmin);
      tr.sharpness.push_back(kNaN);
    }

    if (t == cfg.steps) {
      tr.steps_completed = t;
      break;
    }
    stream.next_z(zbuf.data());
    double gi = f.g(dot(w.data(), zbuf.data(), d));
    cum_g += gi;
    axpy(cfg.eta * gi, zbuf.data(), w.data(), d);
  }

  tr.w_final = w;
  tr.hits = hits.hits;
  return tr;
}

PhaseReport phase_detect(const Trace& tr, const FyLoss& f,
                         const LossAnalysis& a, double eta, std::size_t n) {
  PhaseReport rep;
  for (const auto& s : a.rho_samples) {
    rep.psi.emplace_back(s.lambda, s.lambda / s.value);
  }
  if (a.self_bounding.classification != "bounded" ||
      !a.self_bounding.c_beta_hat) {
    rep.note = "not applicable (no self-bounding constant)";
    return rep;
  }
  rep.applicable = true;
  double cb = *a.self_bounding.c_beta_hat;
  rep.threshold = std::min(1.0 / (4.0 * cb * cb * eta),
                           a.loss_at_zero / static_cast<double>(n));

  std::size_t si = tr.risk.size();
  for (std::size_t r = 0; r < tr.risk.size(); ++r) {
    if (tr.risk[r] <= rep.threshold) {
      si = r;
      break;
    }
  }
  if (si == tr.risk.size()) {
    rep.insufficient_horizon = true;
    rep.monotone_after_s = true;  // vacuously
    rep.all_correct_at_s = true;
    rep.stable_rate_ok = true;
    rep.note = "insufficient horizon: threshold never reached";
    return rep;
  }
  rep.s = tr.t[si];

  rep.monotone_after_s = true;
  for (std::size_t r = si; r + 1 < tr.risk.size(); ++r) {
    if (tr.risk[r + 1] > tr.risk[r] * (1.0 + 1e-12) + 1e-15) {
      rep.monotone_after_s = false;
      break;
    }
  }
  rep.all_correct_at_s = tr.min_margin[si] >= 0.0;

  rep.stable_rate_ok = true;
  if (tr.gamma > 0.0) {
    double g2e = tr.gamma * tr.gamma * eta;
    for (std::size_t r = si + 1; r < tr.risk.size(); ++r) {
      double dt = static_cast<double>(tr.t[r] - *rep.s);
      if (dt <= 0.0) continue;
      double bound = 5.0 * rho(f, g2e * dt) / (g2e * dt);
      if (tr.risk[r] > bound * (1.0 + 1e-9) + 1e-12) {
        rep.stable_rate_ok = false;
        break;
      }
    }
  } else {
    rep.note = "stable-rate check skipped: no margin certificate";
  }
  return rep;
}

void write_trace_csv(const Trace& tr, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("write_trace_csv: cannot open " + path);
  out << "t,risk,min_risk,grad_norm,w_norm,alignment,g_potential,cum_g,"
         "sharpness,min_margin\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string() : fmt_g17(v); };
  for (std::size_t r = 0; r < tr.t.size(); ++r) {
    out << tr.t[r] << "," << cell(tr.risk[r]) << "," << cell(tr.min_risk[r])
        << "," << cell(tr.grad_norm[r]) << "," << cell(tr.w_norm[r]) << ","
        << cell(tr.alignment[r]) << "," << cell(tr.g_potential[r]) << ","
        << cell(tr.cum_g[r]) << "," << cell(tr.sharpness[r]) << ","
        << cell(tr.min_margin[r]) << "\n";
  }
  if (!out.good()) throw config_error("write_trace_csv: write failed for " + path);
}

}  // namespace fylab
