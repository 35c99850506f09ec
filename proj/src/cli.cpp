#include "fylab/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "fylab/verify.hpp"
#include "json.hpp"

namespace fylab {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  return v;
}

json opt_num(const std::optional<double>& v) {
  if (!v) return nullptr;
  return num(*v);
}

// "tsallis(q=1.5)" -> "tsallis-q1.5", safe as a file-name stem.
std::string sanitize(std::string name) {
  std::string out;
  for (char c : name) {
    if (c == '(' || c == ')' || c == '=' || c == ' ') continue;
    out.push_back(c);
  }
  return out;
}

// Loss token: "name" or "name:q", e.g. "tsallis:1.5".
Potential parse_loss_token(const std::string& tok) {
  const auto colon = tok.find(':');
  if (colon == std::string::npos)
    return Potential::make(kind_from_name(tok));
  const std::string name = tok.substr(0, colon);
  const std::string qs = tok.substr(colon + 1);
  char* end = nullptr;
  const double q = std::strtod(qs.c_str(), &end);
  if (end != qs.c_str() + qs.size() || qs.empty())
    throw config_error("bad loss parameter: " + tok);
  return Potential::make(kind_from_name(name), q);
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%SZ", &tm);
  return buf;
}

fs::path resolve_run_dir(const std::string& out_flag, const std::string& cmd,
                         const std::string& label) {
  std::string root = out_flag;
  if (root.empty()) {
    if (const char* env = std::getenv("FYLAB_OUT")) root = env;
  }
  if (root.empty()) root = "fylab-out";
  fs::path dir = fs::path(root) / cmd / (label.empty() ? timestamp_utc() : label);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("cannot write " + path.string());
  out << content;
}

json certificate_json(const MarginCertificate& cert) {
  json c;
  c["gamma"] = num(cert.gamma);
  c["w_star"] = json::array();
  for (double w : cert.w_star) c["w_star"].push_back(num(w));
  c["residual"] = num(cert.residual);
  c["iterations"] = cert.iterations;
  return c;
}

json analysis_json(const FyLoss& f, const LossAnalysis& a) {
  json doc;
  doc["loss"] = a.potential.name();
  doc["margin"] = opt_num(f.separation_margin());
  doc["alpha"] = opt_num(a.alpha);
  doc["alpha_converged"] = a.alpha_converged;
  doc["c_phi"] = opt_num(a.c_phi);
  doc["c_g"] = num(a.c_g);
  doc["beta_hat"] = num(a.beta_hat);
  doc["eps_bar"] = num(a.eps_bar);
  doc["loss_at_zero"] = num(a.loss_at_zero);
  if (!a.potential.smooth)
    doc["note"] = "nonsmooth loss: exponent and prefactor unavailable";
  else if (!a.alpha_converged)
    doc["note"] = "exponent ladder did not plateau; prefactor withheld";
  json sb;
  sb["classification"] = a.self_bounding.classification;
  sb["c_beta_hat"] = opt_num(a.self_bounding.c_beta_hat);
  sb["c_e_hat"] = opt_num(a.self_bounding.c_e_hat);
  doc["self_bounding"] = sb;
  doc["rho"] = json::array();
  for (const auto& s : a.rho_samples) {
    json r;
    r["lambda"] = num(s.lambda);
    r["value"] = num(s.value);
    r["argmin"] = num(s.argmin);
    doc["rho"].push_back(r);
  }
  return doc;
}

int cmd_analyze(const Potential& pot, double eps_bar,
                const std::string& out_flag, const std::string& label) {
  FyLoss f(pot);
  const LossAnalysis a = analyze(f, eps_bar);
  const json doc = analysis_json(f, a);

  const fs::path dir = resolve_run_dir(out_flag, "analyze", label);
  json meta;
  meta["command"] = "analyze";
  meta["loss"] = pot.name();
  meta["eps_bar"] = num(eps_bar);
  if (!label.empty()) meta["label"] = label;
  write_file(dir / "meta.json", meta.dump(2) + "\n");
  write_file(dir / "analysis.json", doc.dump(2) + "\n");

  std::cout << doc.dump(2) << "\n";
  std::cerr << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_pilot(const std::vector<std::string>& loss_tokens,
              const std::vector<double>& etas, long long steps,
              long long record_every, unsigned threads, std::uint64_t seed,
              const std::string& out_flag, const std::string& label) {
  std::vector<Potential> pots;
  for (const auto& tok : loss_tokens) pots.push_back(parse_loss_token(tok));
  if (pots.empty() || etas.empty())
    throw config_error("pilot needs at least one loss and one stepsize");
  for (double eta : etas)
    if (!(eta > 0.0) || !std::isfinite(eta))
      throw config_error("stepsizes must be positive and finite");

  const Dataset ds = pilot_dataset();
  const MarginCertificate cert = margin_certificate(ds);

  struct Run {
    std::size_t pot_idx;
    double eta;
    Trace trace;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < pots.size(); ++i)
    for (double eta : etas) runs.push_back({i, eta, {}});

  // The losses are analyzed once; runs fan out over the worker pool and are
  // collected by index, so the artifacts never depend on scheduling.
  std::vector<FyLoss> losses;
  losses.reserve(pots.size());
  for (const auto& p : pots) losses.emplace_back(p);

  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= runs.size()) return;
      RunConfig cfg;
      cfg.eta = runs[i].eta;
      cfg.steps = steps;
      cfg.record_every = record_every;
      cfg.seed = seed;
      runs[i].trace = gd_run(losses[runs[i].pot_idx], ds, cfg, &cert);
    }
  };
  const unsigned nt =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(runs.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < nt; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  const fs::path dir = resolve_run_dir(out_flag, "pilot", label);

  // Summary rows sorted by (loss, eta); trace files written in the same
  // order so repeated invocations are byte-identical.
  std::vector<std::size_t> order(runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const std::string na = pots[runs[a].pot_idx].name();
    const std::string nb = pots[runs[b].pot_idx].name();
    if (na != nb) return na < nb;
    return runs[a].eta < runs[b].eta;
  });

  json summary = json::array();
  for (std::size_t idx : order) {
    const Run& run = runs[idx];
    const std::string name = pots[run.pot_idx].name();
    char etabuf[32];
    std::snprintf(etabuf, sizeof(etabuf), "%g", run.eta);
    const std::string stem = sanitize(name) + "-eta" + etabuf;
    write_trace_csv(run.trace, (dir / (stem + ".csv")).string());

    double sup_norm = 0.0;
    for (double w : run.trace.w_norm) sup_norm = std::max(sup_norm, w);
    json row;
    row["loss"] = name;
    row["eta"] = num(run.eta);
    row["trace"] = stem + ".csv";
    row["final_risk"] = num(run.trace.risk.back());
    row["min_risk"] = num(run.trace.min_risk.back());
    row["sup_norm"] = num(sup_norm);
    row["steps"] = run.trace.steps_completed;
    row["diverged"] = run.trace.diverged;
    row["hits"] = json::array();
    for (const auto& [eps, t] : run.trace.hits) {
      json h;
      h["eps"] = num(eps);
      h["t"] = t;
      row["hits"].push_back(h);
    }
    summary.push_back(row);
  }

  json meta;
  meta["command"] = "pilot";
  meta["losses"] = json::array();
  for (const auto& p : pots) meta["losses"].push_back(p.name());
  meta["etas"] = json::array();
  for (double e : etas) meta["etas"].push_back(num(e));
  meta["steps"] = steps;
  meta["record_every"] = record_every;
  meta["threads"] = threads;
  meta["seed"] = seed;
  if (!label.empty()) meta["label"] = label;
  meta["dataset"] = "pilot";
  meta["certificate"] = certificate_json(cert);
  write_file(dir / "meta.json", meta.dump(2) + "\n");
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  std::cout << summary.dump(2) << "\n";
  std::cerr << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_rates(const Potential& pot, double eta, const std::vector<double>& eps,
              long long max_steps, const std::string& out_flag,
              const std::string& label) {
  if (eps.empty()) throw config_error("rates needs a nonempty --eps list");
  for (double e : eps)
    if (!(e > 0.0) || !(e < 0.5) || !std::isfinite(e))
      throw config_error("--eps entries must lie in (0, 0.5)");
  FyLoss f(pot);
  const LossAnalysis a = analyze(f, 0.5);
  const Dataset ds = pilot_dataset();
  const MarginCertificate cert = margin_certificate(ds);
  const RateFit fit = rate_fit(f, a, ds, cert, eta, eps, max_steps);

  json doc;
  doc["loss"] = pot.name();
  doc["eta"] = num(eta);
  doc["theory_alpha"] = num(fit.theory_alpha);
  doc["steps_run"] = fit.steps_run;
  doc["eps"] = json::array();
  for (double e : fit.eps_grid) doc["eps"].push_back(num(e));
  doc["hitting_times"] = json::array();
  for (long long t : fit.hitting_times) doc["hitting_times"].push_back(t);
  doc["bounds"] = json::array();
  for (double b : fit.bound_curve) doc["bounds"].push_back(num(b));
  doc["within_bound"] = json::array();
  for (std::size_t i = 0; i < fit.eps_grid.size(); ++i) {
    if (fit.hitting_times[i] < 0)
      doc["within_bound"].push_back(nullptr);
    else
      doc["within_bound"].push_back(static_cast<double>(fit.hitting_times[i]) <=
                                    fit.bound_curve[i] + 1.0);
  }
  doc["fitted_slope"] = fit.slope_valid ? num(fit.fitted_slope) : json(nullptr);

  const fs::path dir = resolve_run_dir(out_flag, "rates", label);
  json meta;
  meta["command"] = "rates";
  meta["loss"] = pot.name();
  meta["eta"] = num(eta);
  meta["eps"] = doc["eps"];
  meta["max_steps"] = max_steps;
  if (!label.empty()) meta["label"] = label;
  meta["dataset"] = "pilot";
  meta["certificate"] = certificate_json(cert);
  write_file(dir / "meta.json", meta.dump(2) + "\n");
  write_file(dir / "rates.json", doc.dump(2) + "\n");

  std::cout << doc.dump(2) << "\n";
  std::cerr << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_verify(const std::string& scope, unsigned threads,
               const std::string& out_flag, const std::string& label) {
  const bool full = scope == "full";
  const auto reports = run_suite(full, threads);
  const std::string table = render_reports(reports);
  const std::string js = reports_json(reports);

  const fs::path dir = resolve_run_dir(out_flag, "verify", label);
  json meta;
  meta["command"] = "verify";
  meta["scope"] = scope;
  meta["threads"] = threads;
  if (!label.empty()) meta["label"] = label;
  write_file(dir / "meta.json", meta.dump(2) + "\n");
  write_file(dir / "report.json", js);
  write_file(dir / "report.txt", table);

  std::cout << table;
  std::cerr << "wrote " << dir.string() << "\n";
  return suite_ok(reports) ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"fylab: Fenchel-Young losses, large-stepsize descent, and "
               "verification suites"};
  app.require_subcommand(1);

  std::string out_flag, label;
  unsigned threads = 1;

  // analyze
  auto* an = app.add_subcommand(
      "analyze", "Rate constants and envelope table for one loss");
  std::string an_loss;
  std::optional<double> an_q;
  double an_eps_bar = 1e-2;
  an->add_option("--loss", an_loss, "Loss kind (e.g. logistic, tsallis)")
      ->required();
  an->add_option("--q", an_q, "Family parameter where applicable");
  an->add_option("--eps-bar", an_eps_bar, "Base probe scale")
      ->check(CLI::PositiveNumber);
  an->add_option("--out", out_flag, "Output root (default $FYLAB_OUT)");
  an->add_option("--label", label, "Run directory name (default timestamp)");

  // pilot
  auto* pi = app.add_subcommand(
      "pilot", "Reference GD sweep on the four-point pilot set");
  std::vector<std::string> pi_losses = {"logistic", "tsallis:1.5", "tsallis:2",
                                        "tsallis:0.5"};
  std::vector<double> pi_etas = {1.0, 4.0, 16.0};
  long long pi_steps = 10000, pi_record = 0;
  std::uint64_t pi_seed = 0;
  pi->add_option("--loss", pi_losses, "Losses as name[:q], comma-separated")
      ->delimiter(',');
  pi->add_option("--eta", pi_etas, "Stepsizes, comma-separated")
      ->delimiter(',');
  pi->add_option("--steps", pi_steps, "Steps per run")
      ->check(CLI::PositiveNumber);
  pi->add_option("--record-every", pi_record, "Recording stride (0 = auto)");
  pi->add_option("--seed", pi_seed, "Echoed into metadata");
  pi->add_option("--threads", threads, "Worker pool size")
      ->check(CLI::PositiveNumber);
  pi->add_option("--out", out_flag, "Output root (default $FYLAB_OUT)");
  pi->add_option("--label", label, "Run directory name (default timestamp)");

  // rates
  auto* ra = app.add_subcommand(
      "rates", "Hitting times against the iteration bound on the pilot set");
  std::string ra_loss;
  std::optional<double> ra_q;
  double ra_eta = 16.0;
  std::vector<double> ra_eps = {1e-1, 1e-2, 1e-3};
  long long ra_steps = 100000;
  ra->add_option("--loss", ra_loss, "Loss kind")->required();
  ra->add_option("--q", ra_q, "Family parameter where applicable");
  ra->add_option("--eta", ra_eta, "Stepsize")->check(CLI::PositiveNumber);
  ra->add_option("--eps", ra_eps, "Risk levels, comma-separated")
      ->delimiter(',')
      ->expected(0, 64);
  ra->add_option("--steps", ra_steps, "Horizon cap")
      ->check(CLI::PositiveNumber);
  ra->add_option("--out", out_flag, "Output root (default $FYLAB_OUT)");
  ra->add_option("--label", label, "Run directory name (default timestamp)");

  // verify
  auto* ve = app.add_subcommand("verify", "Run the verification suites");
  std::string ve_scope = "fast";
  ve->add_option("scope", ve_scope, "fast | full")
      ->check(CLI::IsMember({"fast", "full"}));
  ve->add_option("--threads", threads, "Worker pool size")
      ->check(CLI::PositiveNumber);
  ve->add_option("--out", out_flag, "Output root (default $FYLAB_OUT)");
  ve->add_option("--label", label, "Run directory name (default timestamp)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (an->parsed())
      return cmd_analyze(Potential::make(kind_from_name(an_loss), an_q),
                         an_eps_bar, out_flag, label);
    if (pi->parsed())
      return cmd_pilot(pi_losses, pi_etas, pi_steps, pi_record, threads,
                       pi_seed, out_flag, label);
    if (ra->parsed())
      return cmd_rates(Potential::make(kind_from_name(ra_loss), ra_q), ra_eta,
                       ra_eps, ra_steps, out_flag, label);
    if (ve->parsed()) return cmd_verify(ve_scope, threads, out_flag, label);
  } catch (const config_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace fylab
