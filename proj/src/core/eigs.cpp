// Shift-invert Krylov-Schur (thick-restart Lanczos) for K u = lambda M u.
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/SparseCholesky>

#include "elasticity.hpp"
#include "error.hpp"

namespace phononet {
namespace {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
S random_scalar(std::mt19937_64& rng, std::normal_distribution<double>& nd) {
  if constexpr (std::is_same_v<S, double>) {
    return nd(rng);
  } else {
    const double re = nd(rng);
    return S(re, nd(rng));
  }
}

template <typename S>
double m_norm(const Vec<S>& x, const Vec<S>& mx) {
  return std::sqrt(std::max(0.0, std::real(x.dot(mx))));
}

struct Pair {
  double lambda;
  Eigen::VectorXcd u;
};

template <typename S>
Eigen::VectorXcd to_complex(const Vec<S>& v) {
  if constexpr (std::is_same_v<S, double>) return v.template cast<cplx>();
  else return v;
}

/// Fixes the M-norm to one and the phase so the largest entry is real positive.
Eigen::VectorXcd normalize(Eigen::VectorXcd u, const SparseC& M) {
  const double nm = std::sqrt(std::max(0.0, u.dot(M * u).real()));
  if (nm > 0) u /= nm;
  Eigen::Index imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  if (std::abs(u(imax)) > 0) u *= std::conj(u(imax)) / std::abs(u(imax));
  return u;
}

template <typename S>
std::vector<Pair> dense_solve(const Eigen::SparseMatrix<S>& K, const Eigen::SparseMatrix<S>& M,
                              double sigma, int m) {
  const Mat<S> Kd(K), Md(M);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat<S>> es(Kd, Md);
  if (es.info() != Eigen::Success) fail(ErrorKind::Solver, "dense generalized eigensolver failed");
  const auto& ev = es.eigenvalues();
  std::vector<int> idx(ev.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(ev(a) - sigma) < std::abs(ev(b) - sigma);
  });
  std::vector<Pair> out;
  for (int i = 0; i < m; ++i)
    out.push_back({ev(idx[i]), to_complex<S>(es.eigenvectors().col(idx[i]))});
  return out;
}

/// One step of subspace iteration followed by Rayleigh-Ritz on K, M.
template <typename S>
std::vector<Pair> polish(const Eigen::SparseMatrix<S>& K, const Eigen::SparseMatrix<S>& M,
                         const Eigen::SimplicialLDLT<Eigen::SparseMatrix<S>>& ldlt,
                         const std::vector<Pair>& pairs) {
  const int m = static_cast<int>(pairs.size());
  Mat<S> X(K.rows(), m);
  for (int i = 0; i < m; ++i) {
    if constexpr (std::is_same_v<S, double>) X.col(i) = pairs[i].u.real();
    else X.col(i) = pairs[i].u;
  }
  const Mat<S> Z = ldlt.solve(M * X);
  const Mat<S> Kz = Z.adjoint() * (K * Z);
  const Mat<S> Mz = Z.adjoint() * (M * Z);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat<S>> es(Mat<S>(0.5 * (Kz + Kz.adjoint())),
                                                      Mat<S>(0.5 * (Mz + Mz.adjoint())));
  if (es.info() != Eigen::Success) return pairs;
  std::vector<Pair> out;
  for (int i = 0; i < m; ++i)
    out.push_back({es.eigenvalues()(i), to_complex<S>(Z * es.eigenvectors().col(i))});
  return out;
}

template <typename S>
std::vector<Pair> krylov_schur(const Eigen::SparseMatrix<S>& K, const Eigen::SparseMatrix<S>& M,
                               double sigma, int m, int p, const EigsOptions& options) {
  const Eigen::Index n = K.rows();
  Eigen::SparseMatrix<S> A = K - S(sigma) * M;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<S>> ldlt;
  ldlt.compute(A);
  if (ldlt.info() != Eigen::Success)
    fail(ErrorKind::Solver, "factorization of K - sigma M failed; retry with a different shift");
  {
    const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
    if (d.minCoeff() <= 1e-13 * d.maxCoeff())
      fail(ErrorKind::Solver,
           "K - sigma M is numerically singular (shift on an eigenvalue); retry with a shift "
           "offset by a small fraction of the band");
  }

  Mat<S> V(n, p + 1), MV(n, p + 1);
  Mat<S> H = Mat<S>::Zero(p, p);
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(n));
  std::normal_distribution<double> nd;

  auto fresh = [&](int j) {
    // Random vector M-orthogonal to V[:, 0..j-1].
    for (int attempt = 0; attempt < 5; ++attempt) {
      Vec<S> w(n);
      for (Eigen::Index i = 0; i < n; ++i) w(i) = random_scalar<S>(rng, nd);
      w = ldlt.solve(M * w);
      for (int pass = 0; pass < 2 && j > 0; ++pass) {
        const Vec<S> c = MV.leftCols(j).adjoint() * w;
        w -= V.leftCols(j) * c;
      }
      Vec<S> mw = M * w;
      const double nm = m_norm<S>(w, mw);
      if (nm > 0) {
        V.col(j) = w / nm;
        MV.col(j) = mw / nm;
        return;
      }
    }
    fail(ErrorKind::Solver, "could not build a Krylov start vector");
  };

  fresh(0);
  int k = 0;
  double beta = 0.0;
  const double ritz_tol = std::max(0.01 * options.tol, 1e-14);
  Eigen::SelfAdjointEigenSolver<Mat<S>> es;
  std::vector<int> order;

  for (int restart = 0;; ++restart) {
    for (int j = k; j < p; ++j) {
      Vec<S> w = ldlt.solve(MV.col(j));
      const double w0 = m_norm<S>(w, M * w);
      Vec<S> c = MV.leftCols(j + 1).adjoint() * w;
      w -= V.leftCols(j + 1) * c;
      const Vec<S> c2 = MV.leftCols(j + 1).adjoint() * w;
      w -= V.leftCols(j + 1) * c2;
      c += c2;
      for (int i = 0; i < j; ++i) {
        H(i, j) = c(i);
        H(j, i) = Eigen::numext::conj(c(i));
      }
      H(j, j) = S(std::real(c(j)));
      Vec<S> mw = M * w;
      beta = m_norm<S>(w, mw);
      if (beta <= 1e-12 * w0) {
        // Invariant subspace: continue with a new direction.
        beta = 0.0;
        fresh(j + 1);
      } else {
        V.col(j + 1) = w / beta;
        MV.col(j + 1) = mw / beta;
      }
      if (j + 1 < p) {
        H(j + 1, j) = S(beta);
        H(j, j + 1) = S(beta);
      }
    }

    es.compute(H);
    const auto& theta = es.eigenvalues();
    const auto& Y = es.eigenvectors();
    order.resize(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(theta(a)) > std::abs(theta(b)); });
    int converged = 0;
    const double theta_max = std::abs(theta(order[0]));
    for (int i = 0; i < m; ++i) {
      const int c = order[i];
      const double scale = std::max(std::abs(theta(c)), 1e-12 * theta_max);
      if (beta * std::abs(Y(p - 1, c)) <= ritz_tol * scale) ++converged;
    }
    if (converged == m) {
      std::vector<Pair> out;
      for (int i = 0; i < m; ++i) {
        const int c = order[i];
        const Vec<S> x = V.leftCols(p) * Y.col(c);
        out.push_back({sigma + 1.0 / theta(c), to_complex<S>(x)});
      }
      return polish<S>(K, M, ldlt, out);
    }
    if (restart >= options.max_restarts)
      fail(ErrorKind::Solver, "eigensolver did not converge after " +
                                  std::to_string(options.max_restarts) + " restarts (" +
                                  std::to_string(converged) + "/" + std::to_string(m) +
                                  " converged); raise max_restarts or move the shift");

    k = std::min(p - 1, m + (p - m) / 2);
    Mat<S> Yk(p, k);
    for (int i = 0; i < k; ++i) Yk.col(i) = Y.col(order[i]);
    const Mat<S> Vk = V.leftCols(p) * Yk;
    const Mat<S> MVk = MV.leftCols(p) * Yk;
    V.leftCols(k) = Vk;
    MV.leftCols(k) = MVk;
    V.col(k) = V.col(p);
    MV.col(k) = MV.col(p);
    H.setZero();
    for (int i = 0; i < k; ++i) {
      H(i, i) = S(theta(order[i]));
      H(k, i) = S(beta) * Yk(p - 1, i);
      H(i, k) = Eigen::numext::conj(H(k, i));
    }
  }
}

template <typename S>
std::vector<Pair> solve(const Eigen::SparseMatrix<S>& K, const Eigen::SparseMatrix<S>& M,
                        double sigma, int m, const EigsOptions& options) {
  const Eigen::Index n = K.rows();
  int p = options.krylov_dim > 0 ? options.krylov_dim : std::max(2 * m + 20, m + 30);
  p = std::max(p, m + 2);
  if (n <= p + 1) return dense_solve<S>(K, M, sigma, m);
  return krylov_schur<S>(K, M, sigma, m, p, options);
}

}  // namespace

std::vector<ModeSolution> eigs(const OperatorPair& ops, double shift_hz, int count,
                               const EigsOptions& options) {
  const Eigen::Index n = ops.size();
  if (count <= 0) fail(ErrorKind::InvalidArgument, "eigenpair count must be positive");
  if (count > n)
    fail(ErrorKind::InvalidArgument, "requested " + std::to_string(count) +
                                         " eigenpairs from a problem of size " + std::to_string(n));
  if (!(shift_hz >= 0.0) || !std::isfinite(shift_hz))
    fail(ErrorKind::InvalidArgument, "shift must be a finite non-negative frequency");
  if (!(options.tol > 0.0)) fail(ErrorKind::InvalidArgument, "tolerance must be positive");

  double sigma = std::pow(2.0 * kPi * shift_hz, 2);
  if (shift_hz == 0.0) {
    // Keep K - sigma M definite when the structure has rigid-body modes.
    const double dk = ops.K.diagonal().real().mean(), dm = ops.M.diagonal().real().mean();
    sigma = -1e-6 * dk / dm;
  }

  std::vector<Pair> pairs;
  if (ops.real) {
    const SparseR K = ops.K.real(), M = ops.M.real();
    pairs = solve<double>(K, M, sigma, count, options);
  } else {
    pairs = solve<cplx>(ops.K, ops.M, sigma, count, options);
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return a.lambda < b.lambda; });

  double k_fro = 0.0;
  for (int c = 0; c < ops.K.outerSize(); ++c)
    for (SparseC::InnerIterator it(ops.K, c); it; ++it) k_fro += std::norm(it.value());
  k_fro = std::sqrt(k_fro);

  std::vector<ModeSolution> out;
  for (auto& pr : pairs) {
    const Eigen::VectorXcd u = normalize(pr.u, ops.M);
    const Eigen::VectorXcd ku = ops.K * u, mu = ops.M * u;
    const double floor = 1e-4 * k_fro * u.norm();
    const double denom = std::max(ku.norm() + std::abs(pr.lambda) * mu.norm(), floor);
    ModeSolution s;
    s.eigenvalue = pr.lambda;
    s.omega = std::sqrt(std::max(0.0, pr.lambda));
    s.frequency = s.omega / (2.0 * kPi);
    s.residual = denom > 0 ? (ku - pr.lambda * mu).norm() / denom : 0.0;
    s.displacement = ops.expand(u);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace phononet
