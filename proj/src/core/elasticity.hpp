#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "geometry.hpp"
#include "mesh.hpp"

namespace phononet {

using cplx = std::complex<double>;
using SparseC = Eigen::SparseMatrix<cplx>;
using SparseR = Eigen::SparseMatrix<double>;

struct LameConstants {
  double lambda = 0.0;  // Pa
  double mu = 0.0;      // Pa
};

LameConstants lame_constants(const Material& material);

/// Stiffness/mass pair of the plane-stress discretization. When `reduced` is
/// set, the unknowns are the master DOFs of a Bloch-periodic cell and
/// `expansion` maps them back onto every node (full = expansion * reduced).
struct OperatorPair {
  SparseC K;
  SparseC M;
  Material material;
  std::size_t node_count = 0;
  bool reduced = false;
  bool real = true;  // no imaginary entries anywhere
  SparseC expansion;

  Eigen::Index size() const { return K.rows(); }
  Eigen::VectorXcd expand(const Eigen::VectorXcd& u) const;
};

/// Dense 12x12 element stiffness and mass (DOF order: ux, uy per element node).
struct ElementMatrices {
  Eigen::Matrix<double, 12, 12> K;
  Eigen::Matrix<double, 12, 12> M;
};

ElementMatrices element_matrices(const Mesh& mesh, std::size_t e, const Material& material);

OperatorPair assemble(const Mesh& mesh, const Material& material);

/// Wavevector in rad/m, one component per periodic map.
OperatorPair apply_bloch(const OperatorPair& ops, const std::vector<PeriodicMap>& maps,
                         const std::vector<Vec2>& lattice_vectors,
                         const std::vector<double>& k_components);

/// Convenience for a single periodic direction along the map's translation.
OperatorPair apply_bloch(const OperatorPair& ops, const PeriodicMap& map, double k);

struct ModeSolution {
  double omega = 0.0;      // rad/s
  double frequency = 0.0;  // Hz
  double eigenvalue = 0.0; // omega^2, may be slightly negative for rigid-body modes
  Eigen::VectorXcd displacement;  // full field, [ux0, uy0, ux1, uy1, ...]
  double residual = 0.0;
};

struct EigsOptions {
  double tol = 1e-9;
  int max_restarts = 300;
  int krylov_dim = 0;  // 0 = automatic
};

/// The `count` eigenpairs with frequencies nearest `shift_hz`, ascending.
std::vector<ModeSolution> eigs(const OperatorPair& ops, double shift_hz, int count,
                               const EigsOptions& options = {});

/// Per-element peak strain energy 1/2 u_e^H K_e u_e of a mode.
std::vector<double> strain_energy_field(const OperatorPair& ops, const ModeSolution& mode,
                                        const Mesh& mesh);

/// Complex displacement (ux, uy) at a point with barycentric coordinates in element e.
std::array<cplx, 2> interpolate(const Mesh& mesh, const Eigen::VectorXcd& field, std::size_t e,
                                const std::array<double, 3>& bary);

void write_mode(std::ostream& os, const ModeSolution& mode);

}  // namespace phononet
