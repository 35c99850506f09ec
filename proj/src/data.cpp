#include "fylab/data.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace fylab {

namespace {

void fail_parse(const std::string& path, std::size_t line,
                const std::string& what) {
  throw config_error("load_csv: " + path + ":" + std::to_string(line) + ": " +
                     what);
}

// strict double parse: the token must be a finite number and nothing else
double parse_field(const std::string& tok, const std::string& path,
                   std::size_t line) {
  if (tok.empty()) fail_parse(path, line, "empty field");
  const char* begin = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + tok.size()) fail_parse(path, line, "malformed number '" + tok + "'");
  if (!std::isfinite(v)) fail_parse(path, line, "non-finite value '" + tok + "'");
  return v;
}

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string expected_header(std::size_t d) {
  std::string h;
  for (std::size_t j = 0; j < d; ++j) {
    h += "x" + std::to_string(j + 1) + ",";
  }
  h += "y";
  return h;
}

}  // namespace

Dataset validate(Dataset ds) {
  if (ds.n == 0) throw domain_error("dataset must contain at least one point");
  if (ds.d == 0) throw domain_error("dataset dimension must be positive");
  if (ds.x.size() != ds.n * ds.d || ds.y.size() != ds.n) {
    throw domain_error("dataset shape mismatch");
  }
  for (double v : ds.x) {
    if (!std::isfinite(v)) throw domain_error("dataset contains non-finite feature");
  }
  for (double v : ds.y) {
    if (v != 1.0 && v != -1.0) throw domain_error("labels must be exactly +1 or -1");
  }
  ds.z.resize(ds.n * ds.d);
  ds.norm_warning = false;
  for (std::size_t i = 0; i < ds.n; ++i) {
    const double* xi = ds.row(i);
    for (std::size_t j = 0; j < ds.d; ++j) ds.z[i * ds.d + j] = ds.y[i] * xi[j];
    if (nrm2(xi, ds.d) > 1.0 + 1e-12) ds.norm_warning = true;
  }
  return ds;
}

Dataset pilot_dataset() {
  Dataset ds;
  ds.n = 4;
  ds.d = 2;
  ds.x = {1.0, 0.2, -2.0, 0.2, -1.0, -0.2, 2.0, -0.2};
  ds.y = {1.0, 1.0, -1.0, -1.0};
  return validate(std::move(ds));
}

Dataset synth_separable(std::uint64_t seed, std::size_t n, std::size_t d,
                        double gamma_target) {
  if (n == 0) throw domain_error("synth_separable: n must be positive");
  if (d == 0) throw domain_error("synth_separable: d must be positive");
  if (!(gamma_target > 0.0 && gamma_target < 0.9)) {
    throw domain_error("synth_separable: gamma_target must lie in (0, 0.9)");
  }
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.x.resize(n * d);
  ds.y.resize(n);
  RandomStream rng(seed);
  std::vector<double> pt(d);
  for (std::size_t i = 0; i < n; ++i) {
    do {
      rng.unit_ball(pt.data(), d);
    } while (std::fabs(pt[0]) < gamma_target);
    for (std::size_t j = 0; j < d; ++j) ds.x[i * d + j] = pt[j];
    ds.y[i] = pt[0] > 0.0 ? 1.0 : -1.0;
  }
  return validate(std::move(ds));
}

MarginCertificate margin_certificate(const Dataset& ds, double gap_tol,
                                     std::size_t max_iters) {
  const std::size_t n = ds.n, d = ds.d;
  if (n == 0) throw domain_error("margin_certificate: empty dataset");

  // convex weights over the z_i and the current hull point p
  std::vector<double> lam(n, 0.0), p(d);
  std::size_t start = 0;
  double best = kInf;
  for (std::size_t i = 0; i < n; ++i) {
    double nz = nrm2(ds.zrow(i), d);
    if (nz < best) {
      best = nz;
      start = i;
    }
  }
  lam[start] = 1.0;
  for (std::size_t j = 0; j < d; ++j) p[j] = ds.zrow(start)[j];

  std::vector<double> dots(n);
  MarginCertificate cert;
  bool converged = false;
  for (std::size_t it = 0; it < max_iters; ++it) {
    // occasional exact resynthesis of p from the weights kills drift
    if (it % 1024 == 1023) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += lam[i];
      std::fill(p.begin(), p.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (lam[i] <= 0.0) continue;
        lam[i] /= s;
        axpy(lam[i], ds.zrow(i), p.data(), d);
      }
    }

    double pn2 = dot(p.data(), p.data(), d);
    double pn = std::sqrt(pn2);
    if (pn < 1e-12) throw not_separable_error("origin lies in the hull of the z_i");

    std::size_t i_min = 0, i_max = n;
    double v_min = kInf, v_max = -kInf;
    for (std::size_t i = 0; i < n; ++i) {
      dots[i] = dot(p.data(), ds.zrow(i), d);
      if (dots[i] < v_min) {
        v_min = dots[i];
        i_min = i;
      }
      if (lam[i] > 0.0 && dots[i] > v_max) {
        v_max = dots[i];
        i_max = i;
      }
    }

    cert.iterations = it;
    if (pn - v_min / pn <= gap_tol) {
      converged = true;
      break;
    }

    if (it % 2 == 0) {
      // Gilbert step: line search from p toward the most violating vertex
      double un2 = 0.0, pu = 0.0;
      const double* zs = ds.zrow(i_min);
      for (std::size_t j = 0; j < d; ++j) {
        double uj = p[j] - zs[j];
        un2 += uj * uj;
        pu += p[j] * uj;
      }
      if (un2 > 0.0) {
        double t = std::min(1.0, std::max(0.0, pu / un2));
        for (std::size_t j = 0; j < d; ++j) p[j] = p[j] - t * (p[j] - zs[j]);
        for (std::size_t i = 0; i < n; ++i) lam[i] *= (1.0 - t);
        lam[i_min] += t;
      }
    } else if (i_max < n && i_max != i_min) {
      // MDM transfer: move weight from the worst support vertex to the best
      double dn2 = 0.0, pd = 0.0;
      const double* za = ds.zrow(i_min);
      const double* zb = ds.zrow(i_max);
      for (std::size_t j = 0; j < d; ++j) {
        double dj = za[j] - zb[j];
        dn2 += dj * dj;
        pd += p[j] * dj;
      }
      if (dn2 > 0.0 && pd < 0.0) {
        double tau = std::min(lam[i_max], -pd / dn2);
        lam[i_max] -= tau;
        lam[i_min] += tau;
        for (std::size_t j = 0; j < d; ++j) p[j] += tau * (za[j] - zb[j]);
      }
    }
  }
  if (!converged) {
    throw not_separable_error("margin_certificate: duality gap failed to close");
  }

  double pn = nrm2(p.data(), d);
  cert.w_star.resize(d);
  for (std::size_t j = 0; j < d; ++j) cert.w_star[j] = p[j] / pn;
  double gmin = kInf;
  for (std::size_t i = 0; i < n; ++i) {
    gmin = std::min(gmin, dot(cert.w_star.data(), ds.zrow(i), d));
  }
  cert.gamma = gmin;
  cert.residual = pn - gmin;
  if (!(cert.gamma > 0.0)) {
    throw not_separable_error("margin_certificate: non-positive margin");
  }
  return cert;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("save_csv: cannot open " + path);
  out << expected_header(ds.d) << "\n";
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = 0; j < ds.d; ++j) {
      out << fmt_g17(ds.x[i * ds.d + j]) << ",";
    }
    out << (ds.y[i] > 0 ? "1" : "-1") << "\n";
  }
  if (!out.good()) throw config_error("save_csv: write failed for " + path);
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw config_error("load_csv: empty file " + path);
  std::vector<std::string> head = split_csv_line(line);
  if (head.size() < 2 || head.back() != "y") {
    fail_parse(path, 1, "header must be x1,...,xd,y");
  }
  std::size_t d = head.size() - 1;
  std::string expect = expected_header(d);
  std::string got;
  for (std::size_t i = 0; i < head.size(); ++i) {
    got += head[i];
    if (i + 1 < head.size()) got += ",";
  }
  if (got != expect) fail_parse(path, 1, "header must be " + expect);

  Dataset ds;
  ds.d = d;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != d + 1) {
      fail_parse(path, lineno, "expected " + std::to_string(d + 1) + " fields, got " +
                                   std::to_string(f.size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      ds.x.push_back(parse_field(f[j], path, lineno));
    }
    double y = parse_field(f[d], path, lineno);
    if (y != 1.0 && y != -1.0) fail_parse(path, lineno, "label must be 1 or -1");
    ds.y.push_back(y);
    ++ds.n;
  }
  return validate(std::move(ds));
}

SampleStream::SampleStream(std::size_t d, double gamma_target,
                           std::uint64_t seed)
    : d_(d), gamma_(gamma_target), rng_(seed), buf_(d) {
  if (d == 0) throw domain_error("SampleStream: d must be positive");
  if (!(gamma_target > 0.0 && gamma_target < 0.9)) {
    throw domain_error("SampleStream: gamma_target must lie in (0, 0.9)");
  }
}

double SampleStream::next_z(double* out) {
  do {
    rng_.unit_ball(buf_.data(), d_);
  } while (std::fabs(buf_[0]) < gamma_);
  double y = buf_[0] > 0.0 ? 1.0 : -1.0;
  for (std::size_t j = 0; j < d_; ++j) out[j] = y * buf_[j];
  return y;
}

}  // namespace fylab
