#include "entroq/wdw.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>

#include <Eigen/SparseLU>

namespace entroq {

std::string to_string(Ordering o) { return o == Ordering::Paper ? "paper" : "naive"; }

Ordering ordering_from_string(const std::string& s) {
  if (s == "paper") return Ordering::Paper;
  if (s == "naive") return Ordering::Naive;
  throw ValidationError("unknown ordering '" + s + "'");
}

WdwOperator build_wdw_operator(const ConfigSpace& space, const PhysicalConstants& constants, Ordering ordering) {
  if (space.kind == SpaceKind::ScalarLattice) throw ValidationError("scalar lattice spaces carry no curvature term");
  space.validate();
  constants.validate(true);
  const std::size_t n = space.size();
  const double h2 = constants.hbar * constants.hbar;
  std::vector<Eigen::Triplet<double>> kt, vt;
  for (std::size_t node = 0; node < n; ++node) {
    vt.emplace_back(node, node, space.potential[node]);
    if (space.on_boundary(node)) continue;
    double diag = 0.0;
    for (std::size_t a = 0; a < space.dims(); ++a) {
      const Field& c = space.kinetic[a];
      const std::size_t st = space.stride(a);
      const double s = h2 / (space.axes[a].step() * space.axes[a].step());
      double cp = c[node], cm = c[node];
      if (ordering == Ordering::Paper) {
        cp = 0.5 * (c[node] + c[node + st]);
        cm = 0.5 * (c[node] + c[node - st]);
      }
      const double wp = cp * s, wm = cm * s;
      diag += wp + wm;
      kt.emplace_back(node, node + st, -wp);
      kt.emplace_back(node, node - st, -wm);
    }
    kt.emplace_back(node, node, diag);
  }
  WdwOperator op;
  op.space = space;
  op.ordering = ordering;
  op.alpha = constants.alpha;
  op.constants = constants;
  op.kinetic_unit.resize(n, n);
  op.kinetic_unit.setFromTriplets(kt.begin(), kt.end());
  op.potential.resize(n, n);
  op.potential.setFromTriplets(vt.begin(), vt.end());
  op.kinetic = constants.alpha * op.kinetic_unit;
  op.matrix = op.kinetic + op.potential;
  return op;
}

double wdw_residual(const WdwOperator& op, const CField& psi) {
  const ConfigSpace& s = op.space;
  if (psi.size() != s.size()) throw ValidationError("wave does not match the operator");
  Eigen::Map<const Eigen::VectorXcd> x(psi.data(), psi.size());
  Eigen::VectorXcd r = op.matrix.cast<Complex>() * x;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.on_boundary(i)) continue;
    num += std::norm(r[i]);
    den += std::norm(x[i]);
  }
  if (den == 0.0) throw NumericalError("wave vanishes on the interior");
  return std::sqrt(num / den);
}

namespace {

WdwSolution finish(const WdwOperator& op, CField psi, double tol) {
  WdwSolution out;
  out.residual = wdw_residual(op, psi);
  if (!(out.residual <= tol)) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "zero-mode residual %.6g exceeds tolerance %.6g", out.residual, tol);
    throw NumericalError(msg);
  }
  const ConfigSpace& s = op.space;
  const Field w = s.quadrature();
  double norm = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) norm += w[i] * s.measure[i] * std::norm(psi[i]);
  if (!(norm > 0.0)) throw NumericalError("zero mode vanishes identically");
  out.raw = psi;
  for (auto& v : psi) v /= std::sqrt(norm);
  out.state.psi = std::move(psi);
  return out;
}

WdwSolution solve_1d(const WdwOperator& op, const WdwBoundary& b, double tol) {
  const std::size_t n = op.space.size();
  if (n < 3) throw ValidationError("need at least 3 nodes");
  const long m = static_cast<long>(n) - 2;
  Eigen::SparseMatrix<Complex> A = op.matrix.block(1, 1, m, m).cast<Complex>();
  Eigen::VectorXcd rhs(m);
  rhs.setZero();
  rhs[0] -= op.matrix.coeff(1, 0) * b.left;
  rhs[m - 1] -= op.matrix.coeff(n - 2, n - 1) * b.right;
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw NumericalError("boundary-value problem is ill-posed: interior operator is singular");
  Eigen::VectorXcd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw NumericalError("boundary-value solve failed");
  CField psi(n);
  psi[0] = b.left;
  psi[n - 1] = b.right;
  for (long i = 0; i < m; ++i) psi[i + 1] = x[i];
  return finish(op, std::move(psi), tol);
}

WdwSolution solve_2d(const WdwOperator& op, const WdwBoundary& b, double tol) {
  const ConfigSpace& s = op.space;
  const int na = s.axes[0].points, nf = s.axes[1].points;
  const double ha = s.axes[0].step(), hf = s.axes[1].step();
  if (static_cast<int>(b.slice_value.size()) != nf || static_cast<int>(b.slice_derivative.size()) != nf)
    throw ValidationError("initial slice data must have one value per point of the second axis");
  for (std::size_t i = 0; i < s.size(); ++i) {
    double caa = s.kinetic[0][i], cff = s.kinetic[1][i];
    if (!(caa * cff < 0.0)) throw ValidationError("kinetic form is not Lorentzian; marching in a is ill-posed");
    double limit = hf * std::sqrt(std::abs(caa / cff));
    if (ha > limit) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "a-step %.6g exceeds the characteristic limit %.6g", ha, limit);
      throw ValidationError(msg);
    }
  }
  const std::size_t n = s.size();
  const double ah2 = op.alpha * op.constants.hbar * op.constants.hbar;
  CField psi(n, Complex(0.0));
  for (int j = 0; j < nf; ++j) psi[j] = b.slice_value[j];

  // second a-derivative on the first slice from the equation itself
  const Field& ca = s.kinetic[0];
  const Field& cf = s.kinetic[1];
  for (int j = 0; j < nf; ++j) {
    Complex lphi(0.0);
    if (j > 0 && j < nf - 1) {
      double cp = 0.5 * (cf[j] + cf[j + 1]), cm = 0.5 * (cf[j] + cf[j - 1]);
      if (op.ordering == Ordering::Naive) cp = cm = cf[j];
      lphi = ah2 / (hf * hf) * (cp * (psi[j] - psi[j + 1]) + cm * (psi[j] - psi[j - 1]));
    }
    double dca = (-3.0 * ca[j] + 4.0 * ca[j + nf] - ca[j + 2 * nf]) / (2.0 * ha);
    if (op.ordering == Ordering::Naive) dca = 0.0;
    Complex rest = lphi + s.potential[j] * psi[j];
    Complex paa = rest / (ah2 * ca[j]) - dca / ca[j] * b.slice_derivative[j];
    psi[nf + j] = (j == 0 || j == nf - 1) ? Complex(0.0)
                                           : psi[j] + ha * b.slice_derivative[j] + 0.5 * ha * ha * paa;
  }
  // every interior row of the operator fixes the node one slice ahead
  for (int i = 1; i < na - 1; ++i) {
    for (int j = 1; j < nf - 1; ++j) {
      const std::size_t row = static_cast<std::size_t>(i) * nf + j, ahead = row + nf;
      Complex acc(0.0);
      double pivot = 0.0;
      for (std::size_t col : {row - nf, row - 1, row, row + 1, ahead}) {
        double v = op.matrix.coeff(row, col);
        if (col == ahead)
          pivot = v;
        else
          acc += v * psi[col];
      }
      if (pivot == 0.0) throw NumericalError("zero pivot while marching in a");
      psi[ahead] = -acc / pivot;
      if (!std::isfinite(psi[ahead].real()) || !std::isfinite(psi[ahead].imag()))
        throw NumericalError("marching in a produced non-finite values");
    }
  }
  return finish(op, std::move(psi), tol);
}

}  // namespace

WdwSolution solve_wdw(const WdwOperator& op, const WdwBoundary& boundary, double tol) {
  if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
  if (op.space.dims() == 1) return solve_1d(op, boundary, tol);
  if (op.space.dims() == 2) return solve_2d(op, boundary, tol);
  throw ValidationError("solve_wdw supports one or two degrees of freedom");
}

ResidualReport madelung_split_residual(const WaveState& psi, const ConfigSpace& space,
                                       const PhysicalConstants& constants, double phase_origin) {
  const std::size_t n = space.size();
  if (psi.psi.size() != n) throw ValidationError("wave does not match the grid");
  WdwOperator op = build_wdw_operator(space, constants, Ordering::Paper);
  EnsembleState e = ensemble_from_wave(psi, space, constants, phase_origin);

  std::vector<char> mask;
  Field q = bohm_potential(e.rho, space, constants, &mask);
  Field h = hamilton_density(e.S, space);
  Field cont(n, 0.0), cw(n);
  for (std::size_t a = 0; a < space.dims(); ++a) {
    for (std::size_t i = 0; i < n; ++i) cw[i] = e.rho[i] * space.kinetic[a][i];
    Field d = flux_divergence(space, cw, e.S, a);
    for (std::size_t i = 0; i < n; ++i) cont[i] += d[i];
  }
  Eigen::Map<const Eigen::VectorXcd> x(psi.psi.data(), n);
  Eigen::VectorXcd ox = op.matrix.cast<Complex>() * x;
  const double unit = std::sqrt(constants.alpha) * constants.hbar;

  double s_im = 0, s11 = 0, s12 = 0, g_re = 0, g_im = 0;
  long count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double var12 = h[i] + constants.alpha * q[i];
    const double imag = -unit / e.rho[i] * cont[i];
    const Complex ratio = ox[i] / x[i];
    s12 += var12 * var12;
    s11 += cont[i] * cont[i];
    s_im += imag * imag;
    g_re += (ratio.real() - var12) * (ratio.real() - var12);
    g_im += (ratio.imag() - imag) * (ratio.imag() - imag);
    ++count;
  }
  if (count == 0) throw NumericalError("every node is masked");
  auto rms = [count](double v) { return std::sqrt(v / count); };
  ResidualReport r;
  r.set("wdw_real", rms(s12), count);
  r.set("wdw_imag", rms(s_im), count);
  r.set("var11", rms(s11), count);
  r.set("var12", rms(s12), count);
  r.set("gap_real", rms(g_re), count);
  r.set("gap_imag", rms(g_im), count);
  r.set("masked", 0.0, static_cast<long>(n) - count);
  return r;
}

void write_operator_coo(const WdwOperator& op, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path);
  out << std::setprecision(17) << "# rows " << op.matrix.rows() << " cols " << op.matrix.cols() << " ordering "
      << to_string(op.ordering) << " alpha " << op.alpha << '\n';
  for (int k = 0; k < op.matrix.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.matrix, k); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

void write_wave_csv(const WaveState& psi, const ConfigSpace& space, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path);
  out << std::setprecision(17) << "node";
  for (const auto& ax : space.axes) out << ',' << ax.name;
  out << ",re_psi,im_psi\n";
  for (std::size_t i = 0; i < psi.psi.size(); ++i) {
    out << i;
    for (std::size_t a = 0; a < space.dims(); ++a) out << ',' << space.coord(i, a);
    out << ',' << psi.psi[i].real() << ',' << psi.psi[i].imag() << '\n';
  }
}

}  // namespace entroq
