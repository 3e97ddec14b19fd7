#include "elasticity.hpp"

#include <iomanip>
#include <ostream>

#include "error.hpp"

namespace phononet {

LameConstants lame_constants(const Material& material) {
  material.validate();
  const double E = material.youngs_modulus, nu = material.poisson_ratio;
  return {nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu)), E / (2.0 * (1.0 + nu))};
}

namespace {

// Symmetric 6-point rule, exact for quadratics' products (degree 4).
struct QuadPoint {
  double l0, l1, l2, w;
};
constexpr double kQa = 0.44594849091596488632, kQwa = 0.22338158967801146570;
constexpr double kQb = 0.09157621350977074346, kQwb = 0.10995174365532186764;
constexpr QuadPoint kRule[6] = {
    {kQa, kQa, 1.0 - 2.0 * kQa, kQwa}, {kQa, 1.0 - 2.0 * kQa, kQa, kQwa},
    {1.0 - 2.0 * kQa, kQa, kQa, kQwa}, {kQb, kQb, 1.0 - 2.0 * kQb, kQwb},
    {kQb, 1.0 - 2.0 * kQb, kQb, kQwb}, {1.0 - 2.0 * kQb, kQb, kQb, kQwb},
};

std::array<double, 6> shape(double l0, double l1, double l2) {
  return {l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
          4 * l0 * l1,       4 * l1 * l2,       4 * l2 * l0};
}

}  // namespace

ElementMatrices element_matrices(const Mesh& mesh, std::size_t e, const Material& material) {
  const auto& el = mesh.elements[e];
  const Vec2 p[3] = {mesh.nodes[el[0]], mesh.nodes[el[1]], mesh.nodes[el[2]]};
  const double area = 0.5 * cross(p[1] - p[0], p[2] - p[0]);
  if (!(area > 0.0))
    fail(ErrorKind::Assembly, "element " + std::to_string(e) + " has a non-positive Jacobian");
  Vec2 g[3];
  for (int i = 0; i < 3; ++i) {
    const Vec2 a = p[(i + 1) % 3], b = p[(i + 2) % 3];
    g[i] = Vec2{a.y - b.y, b.x - a.x} * (1.0 / (2.0 * area));
  }
  const LameConstants lame = lame_constants(material);
  const double lam = 2.0 * lame.lambda * lame.mu / (lame.lambda + 2.0 * lame.mu);
  Eigen::Matrix3d D;
  D << lam + 2 * lame.mu, lam, 0, lam, lam + 2 * lame.mu, 0, 0, 0, lame.mu;
  const double t = material.thickness, rho = material.density;

  ElementMatrices out;
  out.K.setZero();
  out.M.setZero();
  for (const auto& q : kRule) {
    const double L[3] = {q.l0, q.l1, q.l2};
    Vec2 dN[6];
    for (int i = 0; i < 3; ++i) dN[i] = g[i] * (4 * L[i] - 1);
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      dN[3 + i] = (g[i] * L[j] + g[j] * L[i]) * 4.0;
    }
    Eigen::Matrix<double, 3, 12> B = Eigen::Matrix<double, 3, 12>::Zero();
    for (int a = 0; a < 6; ++a) {
      B(0, 2 * a) = dN[a].x;
      B(1, 2 * a + 1) = dN[a].y;
      B(2, 2 * a) = dN[a].y;
      B(2, 2 * a + 1) = dN[a].x;
    }
    const double w = q.w * area;
    out.K.noalias() += (w * t) * B.transpose() * D * B;
    const auto N = shape(q.l0, q.l1, q.l2);
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) {
        const double m = w * rho * t * N[a] * N[b];
        out.M(2 * a, 2 * b) += m;
        out.M(2 * a + 1, 2 * b + 1) += m;
      }
  }
  return out;
}

OperatorPair assemble(const Mesh& mesh, const Material& material) {
  material.validate();
  const Eigen::Index n = 2 * static_cast<Eigen::Index>(mesh.nodes.size());
  std::vector<Eigen::Triplet<cplx>> kt, mt;
  kt.reserve(mesh.elements.size() * 144);
  mt.reserve(mesh.elements.size() * 144);
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const auto em = element_matrices(mesh, e, material);
    const auto& el = mesh.elements[e];
    for (int a = 0; a < 12; ++a) {
      const int ga = 2 * el[a / 2] + a % 2;
      for (int b = 0; b < 12; ++b) {
        const int gb = 2 * el[b / 2] + b % 2;
        kt.emplace_back(ga, gb, em.K(a, b));
        mt.emplace_back(ga, gb, em.M(a, b));
      }
    }
  }
  OperatorPair ops;
  ops.K.resize(n, n);
  ops.M.resize(n, n);
  ops.K.setFromTriplets(kt.begin(), kt.end());
  ops.M.setFromTriplets(mt.begin(), mt.end());
  ops.material = material;
  ops.node_count = mesh.nodes.size();
  return ops;
}

Eigen::VectorXcd OperatorPair::expand(const Eigen::VectorXcd& u) const {
  if (!reduced) return u;
  return expansion * u;
}

OperatorPair apply_bloch(const OperatorPair& ops, const std::vector<PeriodicMap>& maps,
                         const std::vector<Vec2>& lattice_vectors,
                         const std::vector<double>& k_components) {
  if (ops.reduced) fail(ErrorKind::InvalidArgument, "operator pair is already Bloch-reduced");
  if (k_components.size() > maps.size())
    fail(ErrorKind::InvalidArgument, "missing periodic map for a requested wavevector axis");
  if (k_components.size() != maps.size() || lattice_vectors.size() != maps.size())
    fail(ErrorKind::InvalidArgument, "one wavevector component and lattice vector per periodic map");

  const std::size_t nn = ops.node_count;
  std::vector<int> master(nn, -1);
  std::vector<cplx> phase(nn, 1.0);
  bool real = true;
  for (std::size_t m = 0; m < maps.size(); ++m) {
    const double kr = k_components[m] * norm(lattice_vectors[m]);
    if (std::abs(kr) > kPi * (1.0 + 1e-12))
      fail(ErrorKind::InvalidArgument, "wavevector outside the first Brillouin zone (|k.R| > pi)");
    cplx ph = std::polar(1.0, kr);
    if (kr == 0.0) ph = 1.0;
    if (std::abs(std::abs(kr) - kPi) < 1e-15) ph = -1.0;
    if (ph.imag() != 0.0) real = false;
    for (const auto& [minus, plus] : maps[m].pairs) {
      // A cell corner can be the image under both maps; either chain reaches
      // the same root with the same accumulated phase.
      if (master[plus] >= 0) continue;
      master[plus] = minus;
      phase[plus] = ph;
    }
  }
  // Resolve chains (corner nodes reached through two maps).
  std::vector<int> root(nn);
  std::vector<cplx> total(nn);
  for (std::size_t n = 0; n < nn; ++n) {
    int cur = static_cast<int>(n);
    cplx ph = 1.0;
    for (int guard = 0; master[cur] >= 0; ++guard) {
      if (guard > 8) fail(ErrorKind::Pairing, "cyclic periodic node pairing");
      ph *= phase[cur];
      cur = master[cur];
    }
    root[n] = cur;
    total[n] = ph;
  }
  std::vector<int> reduced_index(nn, -1);
  int count = 0;
  for (std::size_t n = 0; n < nn; ++n)
    if (root[n] == static_cast<int>(n)) reduced_index[n] = count++;

  SparseC T(2 * static_cast<Eigen::Index>(nn), 2 * count);
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(2 * nn);
  for (std::size_t n = 0; n < nn; ++n) {
    const int r = reduced_index[root[n]];
    trip.emplace_back(2 * n, 2 * r, total[n]);
    trip.emplace_back(2 * n + 1, 2 * r + 1, total[n]);
  }
  T.setFromTriplets(trip.begin(), trip.end());

  OperatorPair out;
  const SparseC Th = T.adjoint();
  out.K = Th * ops.K * T;
  out.M = Th * ops.M * T;
  out.K.prune(cplx(0.0));
  out.M.prune(cplx(0.0));
  out.material = ops.material;
  out.node_count = nn;
  out.reduced = true;
  out.real = real;
  out.expansion = std::move(T);
  return out;
}

OperatorPair apply_bloch(const OperatorPair& ops, const PeriodicMap& map, double k) {
  return apply_bloch(ops, {map}, {map.translation}, {k});
}

std::vector<double> strain_energy_field(const OperatorPair& ops, const ModeSolution& mode,
                                        const Mesh& mesh) {
  if (static_cast<std::size_t>(mode.displacement.size()) != 2 * mesh.nodes.size())
    fail(ErrorKind::InvalidArgument, "mode does not belong to this mesh");
  std::vector<double> energy(mesh.elements.size());
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const auto em = element_matrices(mesh, e, ops.material);
    Eigen::Matrix<cplx, 12, 1> ue;
    for (int a = 0; a < 12; ++a) ue(a) = mode.displacement(2 * mesh.elements[e][a / 2] + a % 2);
    energy[e] = 0.5 * (ue.adjoint() * em.K.cast<cplx>() * ue)(0, 0).real();
  }
  return energy;
}

std::array<cplx, 2> interpolate(const Mesh& mesh, const Eigen::VectorXcd& field, std::size_t e,
                                const std::array<double, 3>& bary) {
  const auto N = shape(bary[0], bary[1], bary[2]);
  std::array<cplx, 2> u{0.0, 0.0};
  for (int a = 0; a < 6; ++a) {
    const int n = mesh.elements[e][a];
    u[0] += N[a] * field(2 * n);
    u[1] += N[a] * field(2 * n + 1);
  }
  return u;
}

void write_mode(std::ostream& os, const ModeSolution& mode) {
  os << std::setprecision(12);
  os << "# frequency_ghz " << mode.frequency * 1e-9 << '\n';
  os << "# residual " << mode.residual << '\n';
  os << "# node re_ux im_ux re_uy im_uy\n";
  const Eigen::Index n = mode.displacement.size() / 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    const cplx ux = mode.displacement(2 * i), uy = mode.displacement(2 * i + 1);
    os << i << ' ' << ux.real() << ' ' << ux.imag() << ' ' << uy.real() << ' ' << uy.imag() << '\n';
  }
}

}  // namespace phononet
