#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fylab/numeric.hpp"

namespace fylab {

// Binary classification dataset.  x is row-major n*d, y in {-1,+1}, and
// z_i = y_i * x_i is the signed representation every algorithm consumes.
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> z;
  bool norm_warning = false;  // set when some ||x_i|| > 1

  const double* row(std::size_t i) const { return x.data() + i * d; }
  const double* zrow(std::size_t i) const { return z.data() + i * d; }
};

// Max-margin separator through the origin together with its duality gap.
struct MarginCertificate {
  std::vector<double> w_star;  // unit vector, ||w_star|| = 1 within 1e-12
  double gamma = 0.0;          // min_i <w_star, z_i>, strictly positive
  double residual = 0.0;       // ||p|| - gamma in length units
  std::size_t iterations = 0;
};

// Finalizes derived fields and enforces the dataset contract: n >= 1,
// consistent shapes, finite entries, labels exactly +-1.  Points with
// ||x_i|| > 1 set norm_warning instead of raising an error.
Dataset validate(Dataset ds);

// The four-point 2-d set used for the reference gradient-descent runs.  Two
// of its points have norm > 1 on purpose, so norm_warning is set.
Dataset pilot_dataset();

// Deterministic separable sample: x uniform on the unit ball, labeled by the
// fixed direction e1, points with |x_1| < gamma_target rejected.  The result
// satisfies the separability assumption with margin >= gamma_target.
Dataset synth_separable(std::uint64_t seed, std::size_t n, std::size_t d,
                        double gamma_target);

// Nearest point of conv{z_i} to the origin via Gilbert iterations
// interleaved with Mitchell-Demyanov-Malozemov weight transfers.  Stops when
// the duality gap ||p|| - min_i <p/||p||, z_i> drops to gap_tol.  Throws
// not_separable_error when the iterate norm collapses below 1e-12 or the gap
// fails to close within max_iters.
MarginCertificate margin_certificate(const Dataset& ds, double gap_tol = 1e-10,
                                     std::size_t max_iters = 1000000);

// CSV with header `x1,...,xd,y`; y in {-1,1}; strict parsing (any NaN/inf,
// malformed number, or shape mismatch rejects the file).
void save_csv(const Dataset& ds, const std::string& path);
Dataset load_csv(const std::string& path);

// One fresh (x, y) pair per call, drawn from the same distribution as
// synth_separable (labeling direction e1).
class SampleStream {
 public:
  SampleStream(std::size_t d, double gamma_target, std::uint64_t seed);
  // writes z = y*x into out (size d); returns y
  double next_z(double* out);

 private:
  std::size_t d_;
  double gamma_;
  RandomStream rng_;
  std::vector<double> buf_;
};

}  // namespace fylab
