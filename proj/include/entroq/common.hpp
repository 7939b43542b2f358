#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace entroq {

using Complex = std::complex<double>;
using Field = std::vector<double>;
using CField = std::vector<Complex>;

/// Bad input: shapes, ranges, preconditions.  The CLI maps this to exit code 2.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A computation that could not complete (instability, non-convergence).  Exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kDensityFloor = 1e-30;
inline constexpr double kPi = 3.14159265358979323846;

struct PhysicalConstants {
  double hbar = 1.0;
  double grav = 1.0;
  double lapse = 1.0;
  double shift = 0.0;
  double alpha = 1.0;

  // grav == 0 is accepted only where a caller explicitly allows the decoupled limit
  void validate(bool allow_zero_grav = false) const;
};

struct GridBounds {
  double min = 0.0;
  double max = 1.0;
  int points = 3;
};

struct Axis {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  int points = 3;

  double step() const { return (max - min) / (points - 1); }
  double at(int i) const { return i == points - 1 ? max : min + i * step(); }
};

/// Sum with a fixed binary tree, so the result is independent of how work was split.
double pairwise_sum(const double* x, std::size_t n);
inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

/// Worker cap: ENTROQ_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

/// Runs fn(begin, end) over contiguous chunks of [0, n).  Chunk boundaries depend only on n and
/// the worker count, and callers write into disjoint slots, so results never depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_chunk = 4096) {
  std::size_t workers = std::min<std::size_t>(worker_count(), (n + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

/// Least-squares line y = slope*x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace entroq
