#include "entroq/configspace.hpp"

#include <cmath>

#include "entroq/frw_table.hpp"

namespace entroq {

std::string to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::ScalarLattice: return "scalar-lattice";
    case SpaceKind::Frw: return "frw";
    case SpaceKind::Coupled: return "coupled";
  }
  return "?";
}

SpaceKind space_kind_from_string(const std::string& s) {
  if (s == "scalar-lattice") return SpaceKind::ScalarLattice;
  if (s == "frw") return SpaceKind::Frw;
  if (s == "coupled") return SpaceKind::Coupled;
  throw ValidationError("unknown space kind '" + s + "'");
}

std::size_t ConfigSpace::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= static_cast<std::size_t>(a.points);
  return n;
}

std::size_t ConfigSpace::stride(std::size_t axis) const {
  std::size_t s = 1;
  for (std::size_t k = axis + 1; k < axes.size(); ++k) s *= static_cast<std::size_t>(axes[k].points);
  return s;
}

int ConfigSpace::index(std::size_t node, std::size_t axis) const {
  return static_cast<int>((node / stride(axis)) % static_cast<std::size_t>(axes[axis].points));
}

bool ConfigSpace::on_boundary(std::size_t node) const {
  for (std::size_t a = 0; a < axes.size(); ++a) {
    int i = index(node, a);
    if (i == 0 || i == axes[a].points - 1) return true;
  }
  return false;
}

Field ConfigSpace::quadrature() const {
  Field w(size(), 1.0);
  for (std::size_t node = 0; node < w.size(); ++node) {
    for (std::size_t a = 0; a < axes.size(); ++a) {
      int i = index(node, a);
      double h = axes[a].step();
      w[node] *= (i == 0 || i == axes[a].points - 1) ? 0.5 * h : h;
    }
  }
  return w;
}

void ConfigSpace::validate() const {
  if (axes.empty()) throw ValidationError("configuration space has no axes");
  for (const auto& a : axes) {
    if (a.points < 3) throw ValidationError("axis '" + a.name + "' needs at least 3 points");
    if (!std::isfinite(a.min) || !std::isfinite(a.max) || !(a.max > a.min))
      throw ValidationError("axis '" + a.name + "' bounds must be finite and increasing");
  }
  std::size_t n = size();
  if (measure.size() != n || potential.size() != n || kinetic.size() != axes.size())
    throw ValidationError("configuration space tables do not match the grid");
  for (const auto& k : kinetic)
    if (k.size() != n) throw ValidationError("kinetic table does not match the grid");
  for (std::size_t node = 0; node < n; ++node)
    if (!on_boundary(node) && !(measure[node] > 0.0)) throw ValidationError("measure must be positive at interior nodes");
}

namespace {

double eval_term(const frw_table::Term& t, double grav, double volume, double a, int k) {
  if (t.curv > 0 && k == 0) return 0.0;
  double v = t.coeff * std::pow(grav, t.grav) * std::pow(volume, t.volume) * std::pow(a, t.scale);
  if (t.curv > 0) v *= std::pow(static_cast<double>(k), t.curv);
  return v;
}

void check_bounds(const GridBounds& b, const char* what) {
  if (!std::isfinite(b.min) || !std::isfinite(b.max)) throw ValidationError(std::string(what) + " bounds must be finite");
  if (!(b.max > b.min)) throw ValidationError(std::string(what) + " bounds must be increasing");
  if (b.points < 3) throw ValidationError(std::string(what) + " needs at least 3 points");
}

}  // namespace

namespace frw {
double kinetic_aa(double a, double v, double g) { return eval_term(frw_table::kinetic_aa, g, v, a, 0); }
double potential(double a, int k, double v, double g) { return eval_term(frw_table::potential, g, v, a, k); }
double kinetic_phi(double a, double v) { return eval_term(frw_table::kinetic_phi, 1.0, v, a, 0); }
double measure(double a) { return eval_term(frw_table::measure, 1.0, 1.0, a, 0); }
double ricci(double a, int k) { return eval_term(frw_table::ricci, 1.0, 1.0, a, k); }
}  // namespace frw

ConfigSpace build_scalar_lattice_space(const LatticeSpec& spec, double mass, const GridBounds& axis,
                                       const PhysicalConstants& constants) {
  constants.validate();
  if (spec.sites < 1) throw ValidationError("lattice needs at least one site");
  if (!(spec.spacing > 0.0) || !std::isfinite(spec.spacing)) throw ValidationError("lattice spacing must be positive");
  if (!(mass >= 0.0) || !std::isfinite(mass)) throw ValidationError("mass must be non-negative");
  check_bounds(axis, "field axis");

  ConfigSpace s;
  s.kind = SpaceKind::ScalarLattice;
  s.lattice = spec;
  s.mass = mass;
  s.constants = constants;
  for (int i = 0; i < spec.sites; ++i) s.axes.push_back({"phi" + std::to_string(i), axis.min, axis.max, axis.points});
  std::size_t n = s.size();
  double dx = spec.spacing;
  s.measure.assign(n, 1.0);
  s.kinetic.assign(spec.sites, Field(n, 1.0 / (2.0 * dx)));
  s.potential.assign(n, 0.0);
  std::vector<double> phi(spec.sites);
  for (std::size_t node = 0; node < n; ++node) {
    for (int i = 0; i < spec.sites; ++i) phi[i] = s.coord(node, i);
    double u = 0.0;
    for (int i = 0; i < spec.sites; ++i) {
      double grad = (phi[(i + 1) % spec.sites] - phi[i]) / dx;
      u += 0.5 * grad * grad + 0.5 * mass * mass * phi[i] * phi[i];
    }
    s.potential[node] = dx * u;
  }
  return s;
}

ConfigSpace build_frw_space(int curvature, double fiducial_volume, const GridBounds& a_axis,
                            const PhysicalConstants& constants) {
  constants.validate(true);
  if (curvature < -1 || curvature > 1) throw ValidationError("curvature must be -1, 0 or +1");
  if (!(fiducial_volume > 0.0) || !std::isfinite(fiducial_volume)) throw ValidationError("fiducial volume must be positive");
  check_bounds(a_axis, "scale-factor axis");
  if (!(a_axis.min > 0.0)) throw ValidationError("scale-factor axis must start at a > 0");
  if (constants.grav == 0.0 && curvature != 0) throw ValidationError("curved FRW potential needs grav > 0");

  ConfigSpace s;
  s.kind = SpaceKind::Frw;
  s.curvature = curvature;
  s.fiducial_volume = fiducial_volume;
  s.constants = constants;
  s.axes.push_back({"a", a_axis.min, a_axis.max, a_axis.points});
  std::size_t n = s.size();
  s.kinetic.assign(1, Field(n));
  s.measure.resize(n);
  s.potential.resize(n);
  for (std::size_t node = 0; node < n; ++node) {
    double a = s.coord(node, 0);
    s.kinetic[0][node] = frw::kinetic_aa(a, fiducial_volume, constants.grav);
    s.potential[node] = frw::potential(a, curvature, fiducial_volume, constants.grav);
    s.measure[node] = frw::measure(a);
  }
  return s;
}

ConfigSpace build_coupled_space(const ConfigSpace& frw_space, const GridBounds& phi_axis,
                                const PhysicalConstants& constants) {
  if (frw_space.kind != SpaceKind::Frw) throw ValidationError("coupled space needs an frw space");
  constants.validate(true);
  check_bounds(phi_axis, "scalar axis");

  ConfigSpace s;
  s.kind = SpaceKind::Coupled;
  s.curvature = frw_space.curvature;
  s.fiducial_volume = frw_space.fiducial_volume;
  s.constants = constants;
  s.axes = {frw_space.axes[0], Axis{"phi", phi_axis.min, phi_axis.max, phi_axis.points}};
  std::size_t n = s.size();
  s.kinetic.assign(2, Field(n));
  s.measure.resize(n);
  s.potential.resize(n);
  for (std::size_t node = 0; node < n; ++node) {
    auto ia = static_cast<std::size_t>(s.index(node, 0));
    s.kinetic[0][node] = frw_space.kinetic[0][ia];
    s.kinetic[1][node] = frw::kinetic_phi(s.coord(node, 0), s.fiducial_volume);
    s.potential[node] = frw_space.potential[ia];
    s.measure[node] = frw_space.measure[ia];
  }
  return s;
}

ConfigSpace make_custom_space(SpaceKind kind, std::vector<Axis> axes, std::vector<Field> kinetic, Field potential,
                              Field measure, const PhysicalConstants& constants) {
  ConfigSpace s;
  s.kind = kind;
  s.axes = std::move(axes);
  s.kinetic = std::move(kinetic);
  s.potential = std::move(potential);
  s.measure = std::move(measure);
  s.constants = constants;
  s.validate();
  return s;
}

SuperMetricSample dewitt_supermetric(const Eigen::Matrix3d& h) {
  if (!h.allFinite()) throw ValidationError("metric has non-finite entries");
  double scale = h.cwiseAbs().maxCoeff();
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale) throw ValidationError("metric is not symmetric");
  Eigen::LLT<Eigen::Matrix3d> llt(h);
  if (llt.info() != Eigen::Success) throw ValidationError("metric is not positive definite");

  SuperMetricSample g;
  g.h = h;
  g.h_inv = llt.solve(Eigen::Matrix3d::Identity());
  g.h_inv = 0.5 * (g.h_inv + g.h_inv.transpose());
  g.sqrt_det = std::sqrt(h.determinant());
  const auto& hi = g.h_inv;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          g.lower[t4(i, j, k, l)] = 0.5 * (h(i, k) * h(j, l) + h(i, l) * h(j, k) - h(i, j) * h(k, l));
          g.upper[t4(i, j, k, l)] = 0.5 * (hi(i, k) * hi(j, l) + hi(i, l) * hi(j, k) - 2.0 * hi(i, j) * hi(k, l));
        }
  return g;
}

Field gradient(const ConfigSpace& s, const Field& f, std::size_t axis) {
  const std::size_t n = s.size(), st = s.stride(axis);
  const int m = s.axes[axis].points;
  const double inv2h = 1.0 / (2.0 * s.axes[axis].step());
  Field g(n);
  for (std::size_t node = 0; node < n; ++node) {
    int i = s.index(node, axis);
    if (i == 0)
      g[node] = (-3.0 * f[node] + 4.0 * f[node + st] - f[node + 2 * st]) * inv2h;
    else if (i == m - 1)
      g[node] = (3.0 * f[node] - 4.0 * f[node - st] + f[node - 2 * st]) * inv2h;
    else
      g[node] = (f[node + st] - f[node - st]) * inv2h;
  }
  return g;
}

Field flux_divergence(const ConfigSpace& s, const Field& c, const Field& f, std::size_t axis) {
  const std::size_t n = s.size(), st = s.stride(axis);
  const int m = s.axes[axis].points;
  const double h = s.axes[axis].step(), inv = 1.0 / (h * h);
  Field d(n, 0.0);
  for (std::size_t node = 0; node < n; ++node) {
    int i = s.index(node, axis);
    if (i == 0 || i == m - 1) continue;
    double cp = 0.5 * (c[node] + c[node + st]);
    double cm = 0.5 * (c[node] + c[node - st]);
    d[node] = (cp * (f[node + st] - f[node]) - cm * (f[node] - f[node - st])) * inv;
  }
  return d;
}

Eigen::SparseMatrix<double> derivative_matrix(const ConfigSpace& s, std::size_t axis) {
  const std::size_t n = s.size(), st = s.stride(axis);
  const int m = s.axes[axis].points;
  const double inv2h = 1.0 / (2.0 * s.axes[axis].step());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(3 * n);
  for (std::size_t node = 0; node < n; ++node) {
    auto r = static_cast<int>(node);
    int i = s.index(node, axis);
    auto c = [&](std::size_t k) { return static_cast<int>(k); };
    if (i == 0) {
      t.emplace_back(r, c(node), -3.0 * inv2h);
      t.emplace_back(r, c(node + st), 4.0 * inv2h);
      t.emplace_back(r, c(node + 2 * st), -inv2h);
    } else if (i == m - 1) {
      t.emplace_back(r, c(node), 3.0 * inv2h);
      t.emplace_back(r, c(node - st), -4.0 * inv2h);
      t.emplace_back(r, c(node - 2 * st), inv2h);
    } else {
      t.emplace_back(r, c(node + st), inv2h);
      t.emplace_back(r, c(node - st), -inv2h);
    }
  }
  Eigen::SparseMatrix<double> d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

nlohmann::ordered_json to_json(const ConfigSpace& s) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(s.kind);
  j["axes"] = nlohmann::ordered_json::array();
  for (const auto& a : s.axes) j["axes"].push_back({{"name", a.name}, {"min", a.min}, {"max", a.max}, {"points", a.points}});
  j["lattice"] = {{"sites", s.lattice.sites}, {"spacing", s.lattice.spacing}};
  j["mass"] = s.mass;
  j["curvature"] = s.curvature;
  j["fiducial_volume"] = s.fiducial_volume;
  j["constants"] = {{"hbar", s.constants.hbar},
                    {"grav", s.constants.grav},
                    {"lapse", s.constants.lapse},
                    {"alpha", s.constants.alpha}};
  j["measure"] = s.measure;
  j["kinetic"] = s.kinetic;
  j["potential"] = s.potential;
  return j;
}

ConfigSpace space_from_json(const nlohmann::json& j) {
  ConfigSpace s;
  s.kind = space_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& a : j.at("axes"))
    s.axes.push_back({a.at("name").get<std::string>(), a.at("min").get<double>(), a.at("max").get<double>(),
                      a.at("points").get<int>()});
  s.lattice.sites = j.at("lattice").at("sites").get<int>();
  s.lattice.spacing = j.at("lattice").at("spacing").get<double>();
  s.mass = j.at("mass").get<double>();
  s.curvature = j.at("curvature").get<int>();
  s.fiducial_volume = j.at("fiducial_volume").get<double>();
  const auto& c = j.at("constants");
  s.constants.hbar = c.at("hbar").get<double>();
  s.constants.grav = c.at("grav").get<double>();
  s.constants.lapse = c.at("lapse").get<double>();
  s.constants.alpha = c.at("alpha").get<double>();
  s.measure = j.at("measure").get<Field>();
  s.kinetic = j.at("kinetic").get<std::vector<Field>>();
  s.potential = j.at("potential").get<Field>();
  s.validate();
  return s;
}

}  // namespace entroq
