#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "sclab/errors.hpp"
#include "sclab/spectral.hpp"

namespace sclab::spectral {

namespace {

constexpr double kClusterTolerance = 1e-6;

// A = D^{-1/2} K D^{-1/2}; eigenvectors x of A give modes e = D^{-1/2} x.
SparseMatrix symmetric_form(const Operators& ops) {
  const Eigen::VectorXd s = ops.mass.cwiseSqrt().cwiseInverse();
  SparseMatrix a = s.asDiagonal() * ops.stiffness * s.asDiagonal();
  a.makeCompressed();
  return a;
}

// Canonical order inside a cluster of (numerically) equal eigenvalues: each
// vector gets a positive leading component, then vectors are sorted
// lexicographically.
void canonicalize_cluster(Eigen::Ref<Eigen::MatrixXd> block) {
  const int n = static_cast<int>(block.rows());
  for (int c = 0; c < block.cols(); ++c) {
    const double big = block.col(c).cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i) {
      if (std::abs(block(i, c)) > 1e-3 * big) {
        if (block(i, c) < 0) block.col(c) *= -1.0;
        break;
      }
    }
  }
  std::vector<int> order(block.cols());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int i = 0; i < n; ++i) {
      if (block(i, a) != block(i, b)) return block(i, a) > block(i, b);
    }
    return a < b;
  });
  const Eigen::MatrixXd copy = block;
  for (int c = 0; c < block.cols(); ++c) block.col(c) = copy.col(order[c]);
}

EigenBasis finalize(const Operators& ops, const SparseMatrix& a,
                    Eigen::VectorXd lambdas, Eigen::MatrixXd x) {
  const int n_modes = static_cast<int>(lambdas.size());
  std::vector<int> order(n_modes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return lambdas(i) < lambdas(j); });
  Eigen::VectorXd sorted_l(n_modes);
  Eigen::MatrixXd sorted_x(x.rows(), n_modes);
  for (int c = 0; c < n_modes; ++c) {
    sorted_l(c) = lambdas(order[c]);
    sorted_x.col(c) = x.col(order[c]);
  }

  // Joint orthonormalization and canonical ordering per cluster.
  for (int start = 0; start < n_modes;) {
    int end = start + 1;
    while (end < n_modes &&
           std::abs(sorted_l(end) - sorted_l(start)) <=
               kClusterTolerance * std::max(std::abs(sorted_l(end)), 1e-300)) {
      ++end;
    }
    auto block = sorted_x.middleCols(start, end - start);
    if (end - start > 1) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(block);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(block.rows(), block.cols());
      block = q;
      canonicalize_cluster(block);
      const Eigen::MatrixXd ax = a * Eigen::MatrixXd(block);
      for (int c = 0; c < block.cols(); ++c)
        sorted_l(start + c) = block.col(c).dot(ax.col(c));
    } else {
      canonicalize_cluster(block);
    }
    start = end;
  }

  EigenBasis basis;
  basis.lambdas = sorted_l;
  basis.mass = ops.mass;
  basis.modes = ops.mass.cwiseSqrt().cwiseInverse().asDiagonal() * sorted_x;
  basis.residuals.resize(n_modes);
  const Eigen::MatrixXd ke = ops.stiffness * basis.modes;
  for (int c = 0; c < n_modes; ++c) {
    basis.residuals(c) =
        (ke.col(c) - basis.lambdas(c) * ops.mass.cwiseProduct(basis.modes.col(c))).norm();
  }
  basis.change_of_basis = Eigen::MatrixXd::Identity(n_modes, n_modes);
  return basis;
}

EigenBasis dense_solve(const Operators& ops, const SparseMatrix& a, int n_modes) {
  const Eigen::MatrixXd dense = Eigen::MatrixXd(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (dense + dense.transpose()));
  if (es.info() != Eigen::Success)
    throw ConvergenceFailure("dense symmetric eigensolver did not converge");
  return finalize(ops, a, es.eigenvalues().head(n_modes),
                  es.eigenvectors().leftCols(n_modes));
}

class BlockKrylov {
 public:
  BlockKrylov(const SparseMatrix& a, const Eigen::VectorXd& constant,
              const EigensolveOptions& options)
      : a_(a), constant_(constant), options_(options), rng_(options.seed) {
    const double mean_diag = a.diagonal().mean();
    shift_ = 1e-6 * mean_diag;
    SparseMatrix shifted = a;
    for (int i = 0; i < a.rows(); ++i) shifted.coeffRef(i, i) += shift_;
    ldlt_.compute(shifted);
    if (ldlt_.info() != Eigen::Success)
      throw ConvergenceFailure("sparse LDLT factorization of the shifted operator failed");
  }

  std::pair<Eigen::VectorXd, Eigen::MatrixXd> solve(int n_modes) {
    const int n = static_cast<int>(a_.rows());
    const int b = std::max(1, std::min(options_.block_size, n_modes));
    const int m_max = std::min(n, std::max(2 * n_modes + 4 * b, n_modes + 8 * b));
    V_.resize(n, m_max);
    OV_.resize(n, m_max);
    H_.setZero(m_max, m_max);

    Eigen::MatrixXd start_block(n, b);
    fill_random(start_block);
    start_block.col(0) = constant_;
    int cur = 0;
    append(start_block, cur, b);
    int fresh = 0;  // first column whose operator image is not yet known
    int restarts = 0;
    int since_check = 0;
    const int check_interval = std::max(1, (n_modes + 2 * b - 1) / (2 * b));
    double last_residual = std::numeric_limits<double>::infinity();
    double inner_tol = options_.tolerance;

    while (true) {
      const int cnt = cur - fresh;
      OV_.middleCols(fresh, cnt) = ldlt_.solve(Eigen::MatrixXd(V_.middleCols(fresh, cnt)));
      H_.block(0, fresh, cur, cnt) = V_.leftCols(cur).transpose() * OV_.middleCols(fresh, cnt);
      H_.block(fresh, 0, cnt, fresh) = H_.block(0, fresh, fresh, cnt).transpose();
      fresh = cur;

      const bool full = cur + b > m_max;
      const bool check = full || (cur >= n_modes + b && since_check >= check_interval);
      Eigen::MatrixXd next;
      if (check) {
        since_check = 0;
        const Eigen::MatrixXd h = 0.5 * (H_.topLeftCorner(cur, cur) +
                                         H_.topLeftCorner(cur, cur).transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
        // Largest theta <-> smallest lambda.
        const Eigen::VectorXd theta = es.eigenvalues().reverse();
        const Eigen::MatrixXd y = es.eigenvectors().rowwise().reverse();
        // Residual of the shift-inverted problem, relative to theta.
        const Eigen::MatrixXd x = V_.leftCols(cur) * y.leftCols(n_modes);
        const Eigen::MatrixXd ox = OV_.leftCols(cur) * y.leftCols(n_modes);
        double worst_inv = 0.0;
        for (int c = 0; c < n_modes; ++c)
          worst_inv = std::max(worst_inv, (ox.col(c) - theta(c) * x.col(c)).norm() / theta(c));
        if (worst_inv <= inner_tol) {
          auto [lam, px] = polish(x);
          const double worst = true_residual(lam, px);
          last_residual = worst;
            if (worst <= options_.tolerance) return {lam, px};
          inner_tol = std::max(0.1 * inner_tol, 1e-15);
        } else {
          last_residual = worst_inv;
        }
        if (full) {
          if (++restarts > options_.max_restarts) {
            std::ostringstream os;
            os << "block Krylov did not converge: " << n_modes << " modes, subspace "
               << m_max << ", block " << b << ", restarts " << restarts - 1
               << ", worst relative residual " << last_residual << " > "
               << options_.tolerance;
            throw ConvergenceFailure(os.str());
          }
          const int keep = std::min(cur - b, n_modes + b);
          // Continuation block: the residual direction, orthogonal to the
          // whole current basis rather than only to the kept Ritz vectors.
          next = OV_.middleCols(cur - b, b);
          for (int pass = 0; pass < 2; ++pass)
            next -= V_.leftCols(cur) * (V_.leftCols(cur).transpose() * next);
          const Eigen::MatrixXd yk = y.leftCols(keep);
          const Eigen::MatrixXd vk = V_.leftCols(cur) * yk;
          const Eigen::MatrixXd ovk = OV_.leftCols(cur) * yk;
          V_.leftCols(keep) = vk;
          OV_.leftCols(keep) = ovk;
          H_.setZero();
          H_.topLeftCorner(keep, keep) = theta.head(keep).asDiagonal();
          cur = keep;
          fresh = keep;
        }
      }
      if (next.size() == 0) next = OV_.middleCols(cur - b, b);
      append(next, cur, b);
      ++since_check;
    }
  }

 private:
  // Subspace iteration steps on the converged Ritz block followed by
  // Rayleigh-Ritz with A itself. Each inverse application damps the
  // high-frequency rounding content that the Krylov Ritz vectors retain, which
  // otherwise dominates the residual of A.
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> polish(Eigen::MatrixXd x) {
    Eigen::VectorXd lam;
    for (int it = 0; it < 2; ++it) {
      const Eigen::MatrixXd z = ldlt_.solve(x);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(z.rows(), z.cols());
      const Eigen::MatrixXd g = q.transpose() * (a_ * q);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()));
      lam = es.eigenvalues();
      x = q * es.eigenvectors();
    }
    return {lam, x};
  }

  // Worst ||A x - lambda x|| / max(|lambda|, 1e-3 |lambda_N|).
  double true_residual(const Eigen::VectorXd& lam, const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd ax = a_ * x;
    const double floor = 1e-3 * std::abs(lam(lam.size() - 1));
    double worst = 0.0;
    for (int c = 0; c < lam.size(); ++c)
      worst = std::max(worst, (ax.col(c) - lam(c) * x.col(c)).norm() /
                                  std::max(std::abs(lam(c)), floor));
    return worst;
  }

  void fill_random(Eigen::MatrixXd& m) {
    std::normal_distribution<double> normal;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = normal(rng_);
  }

  // Orthonormalize `w` against V[:, :cur] and among itself, then append.
  void append(Eigen::MatrixXd w, int& cur, int b) {
    const int n = static_cast<int>(w.rows());
    for (int pass = 0; pass < 2; ++pass)
      if (cur > 0) w -= V_.leftCols(cur) * (V_.leftCols(cur).transpose() * w);
    for (int c = 0; c < b; ++c) {
      Eigen::VectorXd v = w.col(c);
      for (int attempt = 0;; ++attempt) {
        const double before = v.norm();
        for (int pass = 0; pass < 2; ++pass) {
          if (cur > 0) v -= V_.leftCols(cur) * (V_.leftCols(cur).transpose() * v);
        }
        const double after = v.norm();
        if (after > 1e-8 * before && after > 1e-300) {
          V_.col(cur++) = v / after;
          break;
        }
        if (attempt > 5) throw ConvergenceFailure("could not extend Krylov basis");
        Eigen::MatrixXd r(n, 1);
        fill_random(r);
        v = r.col(0);
      }
    }
  }

  const SparseMatrix& a_;
  Eigen::VectorXd constant_;
  EigensolveOptions options_;
  std::mt19937_64 rng_;
  double shift_ = 0.0;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  Eigen::MatrixXd V_, OV_, H_;
};

}  // namespace

EigenBasis eigensolve(const Operators& ops, int n_modes,
                      const EigensolveOptions& options) {
  const int nv = static_cast<int>(ops.mass.size());
  if (n_modes < 2) throw TooManyModes("need at least 2 modes");
  if (n_modes * 10 > nv) {
    throw TooManyModes("requested " + std::to_string(n_modes) +
                       " modes but the mesh has only " + std::to_string(nv) +
                       " vertices (limit nv/10)");
  }
  const SparseMatrix a = symmetric_form(ops);
  SolverMethod method = options.method;
  const int b = std::max(1, std::min(options.block_size, n_modes));
  if (method == SolverMethod::Auto)
    method = nv <= options.dense_limit ? SolverMethod::Dense : SolverMethod::ShiftInvert;
  if (method == SolverMethod::ShiftInvert && nv < n_modes + 3 * b) method = SolverMethod::Dense;
  if (method == SolverMethod::Dense) return dense_solve(ops, a, n_modes);

  Eigen::VectorXd constant = ops.mass.cwiseSqrt();
  constant /= constant.norm();
  BlockKrylov solver(a, constant, options);
  auto [lam, x] = solver.solve(n_modes);
  return finalize(ops, a, std::move(lam), std::move(x));
}

EigenBasis eigensolve(const surface::SurfaceMesh& mesh, int n_modes,
                      const EigensolveOptions& options) {
  EigenBasis basis = eigensolve(assemble(mesh), n_modes, options);
  basis.surface_kind = mesh.kind;
  basis.mesh_level = mesh.level;
  basis.area = mesh.area;
  return basis;
}

}  // namespace sclab::spectral
