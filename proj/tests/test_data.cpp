#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fylab/data.hpp"

using namespace fylab;

namespace {

Dataset from_z_rows(const std::vector<std::vector<double>>& zs) {
  Dataset ds;
  ds.n = zs.size();
  ds.d = zs.front().size();
  for (const auto& z : zs) {
    for (double v : z) ds.x.push_back(v);
    ds.y.push_back(1.0);
  }
  return validate(std::move(ds));
}

// Brute-force max-margin for d=2: coarse angular scan plus one refinement
// pass around the best direction.
double angular_scan_gamma(const Dataset& ds) {
  REQUIRE(ds.d == 2);
  auto min_margin = [&](double th) {
    double c = std::cos(th), s = std::sin(th);
    double m = kInf;
    for (std::size_t i = 0; i < ds.n; ++i) {
      m = std::min(m, c * ds.zrow(i)[0] + s * ds.zrow(i)[1]);
    }
    return m;
  };
  const int kDirs = 100000;
  double best = -kInf, best_th = 0.0;
  for (int k = 0; k < kDirs; ++k) {
    double th = 2.0 * M_PI * k / kDirs;
    double m = min_margin(th);
    if (m > best) {
      best = m;
      best_th = th;
    }
  }
  double step = 2.0 * M_PI / kDirs;
  for (int k = 0; k <= kDirs; ++k) {
    double th = best_th - step + 2.0 * step * k / kDirs;
    best = std::max(best, min_margin(th));
  }
  return best;
}

std::string temp_path(const std::string& name) {
  return std::string("/tmp/fylab_test_") + name;
}

}  // namespace

TEST_CASE("pilot dataset matches the reference points") {
  Dataset ds = pilot_dataset();
  CHECK(ds.n == 4);
  CHECK(ds.d == 2);
  CHECK(ds.norm_warning);  // two points have norm > 1 on purpose
  CHECK(ds.row(1)[0] == -2.0);
  CHECK(ds.y[2] == -1.0);
  // z_2 = y_2 x_2 and z_3 = -x_3
  CHECK(ds.zrow(1)[0] == -2.0);
  CHECK(ds.zrow(1)[1] == 0.2);
  CHECK(ds.zrow(2)[0] == 1.0);
  CHECK(ds.zrow(2)[1] == 0.2);

  MarginCertificate cert = margin_certificate(ds);
  REQUIRE(cert.w_star.size() == 2);
  CHECK(std::fabs(cert.w_star[0]) <= 1e-12);
  CHECK(cert.w_star[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cert.gamma == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(cert.residual <= 1e-9);
  CHECK(std::fabs(nrm2(cert.w_star) - 1.0) <= 1e-12);
  double gmin = kInf;
  for (std::size_t i = 0; i < ds.n; ++i) {
    gmin = std::min(gmin, dot(cert.w_star.data(), ds.zrow(i), ds.d));
  }
  CHECK(gmin >= cert.gamma - 1e-9);
}

TEST_CASE("certificate on degenerate and near-degenerate hulls") {
  // single point: hull is the point itself
  Dataset one = from_z_rows({{0.6, 0.8}});
  MarginCertificate c1 = margin_certificate(one);
  CHECK(c1.w_star[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(c1.w_star[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(c1.gamma == doctest::Approx(1.0).epsilon(1e-12));

  // segment passing close to the origin: margin is the segment distance
  Dataset seg = from_z_rows({{1.0, 0.0}, {-1.0, 1e-3}});
  MarginCertificate c2 = margin_certificate(seg);
  double ax = 1.0, ay = 0.0, bx = -1.0, by = 1e-3;
  double analytic = std::fabs(ax * by - ay * bx) /
                    std::hypot(bx - ax, by - ay);
  CHECK(c2.gamma == doctest::Approx(analytic).epsilon(1e-6));
  CHECK(c2.residual <= 1e-9);
}

TEST_CASE("certificate gamma matches an angular brute-force scan in 2-d") {
  Dataset pilot = pilot_dataset();
  CHECK(margin_certificate(pilot).gamma ==
        doctest::Approx(angular_scan_gamma(pilot)).epsilon(1e-6));
  for (std::uint64_t seed : {7ull, 8ull}) {
    Dataset ds = synth_separable(seed, 40, 2, 0.15);
    double brute = angular_scan_gamma(ds);
    double cert = margin_certificate(ds).gamma;
    CHECK(std::fabs(cert - brute) <= 1e-6 * std::max(1.0, std::fabs(brute)));
  }
}

TEST_CASE("non-separable hulls are rejected") {
  Dataset cross =
      from_z_rows({{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}});
  CHECK_THROWS_AS(margin_certificate(cross), not_separable_error);
  Dataset tri = from_z_rows({{1.0, 0.0}, {-0.6, 0.8}, {-0.6, -0.8}});
  CHECK_THROWS_AS(margin_certificate(tri), not_separable_error);
}

TEST_CASE("synth_separable construction guarantees") {
  Dataset ds = synth_separable(1, 100, 5, 0.1);
  CHECK(ds.n == 100);
  CHECK(ds.d == 5);
  CHECK_FALSE(ds.norm_warning);
  for (std::size_t i = 0; i < ds.n; ++i) {
    CHECK(nrm2(ds.row(i), ds.d) <= 1.0 + 1e-12);
    CHECK(std::fabs(ds.row(i)[0]) >= 0.1);
    CHECK(ds.y[i] == (ds.row(i)[0] > 0 ? 1.0 : -1.0));
    // e1 separates with margin gamma_target by construction
    CHECK(ds.zrow(i)[0] >= 0.1);
  }
  MarginCertificate cert = margin_certificate(ds);
  CHECK(cert.gamma >= 0.1);
  CHECK(cert.residual <= 1e-9);

  Dataset again = synth_separable(1, 100, 5, 0.1);
  CHECK(ds.x == again.x);
  CHECK(ds.y == again.y);
  Dataset other = synth_separable(2, 100, 5, 0.1);
  CHECK(ds.x != other.x);

  CHECK_THROWS_AS(synth_separable(1, 0, 5, 0.1), domain_error);
  CHECK_THROWS_AS(synth_separable(1, 10, 0, 0.1), domain_error);
  CHECK_THROWS_AS(synth_separable(1, 10, 5, 0.95), domain_error);
  CHECK_THROWS_AS(synth_separable(1, 10, 5, 0.0), domain_error);
}

TEST_CASE("certificate invariants across random datasets") {
  for (std::uint64_t seed = 11; seed < 16; ++seed) {
    Dataset ds = synth_separable(seed, 64, 3, 0.2);
    MarginCertificate cert = margin_certificate(ds);
    CAPTURE(seed);
    CHECK(std::fabs(nrm2(cert.w_star) - 1.0) <= 1e-12);
    CHECK(cert.gamma > 0.0);
    CHECK(cert.residual >= -1e-15);
    CHECK(cert.residual <= 1e-9);
    double gmin = kInf;
    for (std::size_t i = 0; i < ds.n; ++i) {
      gmin = std::min(gmin, dot(cert.w_star.data(), ds.zrow(i), ds.d));
    }
    CHECK(gmin >= cert.gamma - 1e-9);
  }
}

TEST_CASE("csv round trip is exact") {
  Dataset ds = synth_separable(3, 25, 4, 0.2);
  std::string path = temp_path("roundtrip.csv");
  save_csv(ds, path);
  Dataset back = load_csv(path);
  CHECK(back.n == ds.n);
  CHECK(back.d == ds.d);
  CHECK(back.x == ds.x);
  CHECK(back.y == ds.y);
  CHECK(back.norm_warning == ds.norm_warning);

  // header shape
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x1,x2,x3,x4,y");

  // byte-identical on re-save (determinism of the writer)
  std::string path2 = temp_path("roundtrip2.csv");
  save_csv(back, path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)),
                 std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)),
                 std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("csv strict parsing rejects malformed input") {
  auto write_and_try = [](const std::string& name, const std::string& body) {
    std::string path = temp_path(name);
    std::ofstream out(path);
    out << body;
    out.close();
    Dataset ds;
    try {
      ds = load_csv(path);
      std::remove(path.c_str());
      return false;  // parsed fine
    } catch (const config_error&) {
      std::remove(path.c_str());
      return true;  // rejected
    } catch (const domain_error&) {
      std::remove(path.c_str());
      return true;  // rejected
    }
  };
  CHECK_FALSE(write_and_try("ok.csv", "x1,x2,y\n0.5,0.25,1\n-0.5,0.1,-1\n"));
  CHECK(write_and_try("nan.csv", "x1,x2,y\nnan,0.25,1\n"));
  CHECK(write_and_try("inf.csv", "x1,x2,y\n0.5,inf,1\n"));
  CHECK(write_and_try("badlabel.csv", "x1,x2,y\n0.5,0.25,2\n"));
  CHECK(write_and_try("fraclabel.csv", "x1,x2,y\n0.5,0.25,0.5\n"));
  CHECK(write_and_try("badnum.csv", "x1,x2,y\n0.5abc,0.25,1\n"));
  CHECK(write_and_try("shortrow.csv", "x1,x2,y\n0.5,1\n"));
  CHECK(write_and_try("longrow.csv", "x1,x2,y\n0.5,0.25,0.1,1\n"));
  CHECK(write_and_try("badheader.csv", "a,b,y\n0.5,0.25,1\n"));
  CHECK(write_and_try("noheader.csv", "0.5,0.25,1\n"));
  CHECK(write_and_try("empty.csv", ""));
  CHECK(write_and_try("headeronly.csv", "x1,x2,y\n"));
  CHECK(write_and_try("emptyfield.csv", "x1,x2,y\n0.5,,1\n"));
}

TEST_CASE("validate catches shape and label violations") {
  Dataset ds;
  ds.n = 2;
  ds.d = 2;
  ds.x = {0.1, 0.2, 0.3, 0.4};
  ds.y = {1.0, -1.0};
  CHECK_NOTHROW(validate(ds));
  Dataset bad = ds;
  bad.y = {1.0, 0.5};
  CHECK_THROWS_AS(validate(bad), domain_error);
  bad = ds;
  bad.x[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate(bad), domain_error);
  bad = ds;
  bad.y.pop_back();
  CHECK_THROWS_AS(validate(bad), domain_error);
  bad = ds;
  bad.n = 0;
  bad.x.clear();
  bad.y.clear();
  CHECK_THROWS_AS(validate(bad), domain_error);
}

TEST_CASE("sample stream is deterministic and respects the margin") {
  SampleStream s1(5, 0.2, 42);
  SampleStream s2(5, 0.2, 42);
  SampleStream s3(5, 0.2, 43);
  std::vector<double> a(5), b(5);
  bool any_diff = false;
  for (int k = 0; k < 200; ++k) {
    double ya = s1.next_z(a.data());
    double yb = s2.next_z(b.data());
    CHECK(ya == yb);
    CHECK(a == b);
    CHECK((ya == 1.0 || ya == -1.0));
    CHECK(nrm2(a) <= 1.0 + 1e-12);
    CHECK(a[0] >= 0.2);  // <z, e1> = y*x1 = |x1| >= gamma
    double yc = s3.next_z(b.data());
    (void)yc;
    if (a != b) any_diff = true;
  }
  CHECK(any_diff);
  CHECK_THROWS_AS(SampleStream(0, 0.2, 1), domain_error);
  CHECK_THROWS_AS(SampleStream(5, 0.0, 1), domain_error);
}
