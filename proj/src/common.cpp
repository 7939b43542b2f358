#include "entroq/common.hpp"

#include <cmath>
#include <cstdlib>

namespace entroq {

void PhysicalConstants::validate(bool allow_zero_grav) const {
  if (!(hbar > 0.0) || !std::isfinite(hbar)) throw ValidationError("hbar must be positive");
  if (allow_zero_grav ? !(grav >= 0.0) : !(grav > 0.0)) throw ValidationError("grav must be positive");
  if (!std::isfinite(grav)) throw ValidationError("grav must be finite");
  if (!(lapse > 0.0) || !std::isfinite(lapse)) throw ValidationError("lapse must be positive");
  if (shift != 0.0) throw ValidationError("shift must be zero");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be positive");
}

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

unsigned worker_count() {
  if (const char* env = std::getenv("ENTROQ_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("line fit needs at least two points");
  double n = static_cast<double>(x.size());
  double mx = pairwise_sum(x) / n, my = pairwise_sum(y) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw NumericalError("line fit is degenerate: all abscissae equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / n);
  return f;
}

}  // namespace entroq
