#pragma once

#include "pelrec/image.hpp"

#include <Eigen/Dense>

#include <vector>

namespace pelrec {

/// Update vector u solving z = G u + n; length p (2 for motion).
using UpdateVector = Eigen::VectorXd;

enum class RegularizerKind { kNone, kScalarIdentity, kDiagonal };

/// Regularisation matrix: zero, lambda * I, or an explicit diagonal.
/// Used both in the ambient (RLS) and principal-component (PCR2) domains.
struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::kNone;
  double lambda = 0.0;
  std::vector<double> diagonal;

  static RegularizerSpec none() { return {}; }
  static RegularizerSpec scalar(double value) {
    return {RegularizerKind::kScalarIdentity, value, {}};
  }
  static RegularizerSpec diag(std::vector<double> values) {
    return {RegularizerKind::kDiagonal, 0.0, std::move(values)};
  }

  void validate() const;
  bool is_zero() const;

  /// Entry i of the diagonal (every form here is diagonal).
  double entry(Eigen::Index i) const;

  /// p x p matrix form. Diagonal specs must supply at least p values.
  Eigen::MatrixXd matrix(Eigen::Index p) const;
};

struct SolverTolerances {
  /// cond(G^T G) above which OLS (and unregularised RLS) refuse to solve.
  double max_condition = 1e12;
  /// PCR drops components whose eigenvalue is below this fraction of the largest.
  double eigenvalue_ratio_floor = 1e-8;
  /// Absolute eigenvalue floor; a retained component below it is degenerate.
  double eigenvalue_floor = 1e-12;
};

/// Principal component factorisation G ~= T P^T (+ column means when centred).
///
/// loadings (P, p x k) hold the eigenvectors of G^T G, scores (T, N x k) are
/// G P. Eigenvalues are the squared singular values, largest first. Every
/// loading column has its largest-magnitude entry made positive.
struct PcaFactors {
  Eigen::MatrixXd loadings;
  Eigen::MatrixXd scores;
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd column_means;
  /// Set when k exceeds the numerical rank of G.
  bool rank_deficient = false;

  Eigen::Index components() const { return loadings.cols(); }
};

UpdateVector ols(const ObservationSystem& system, const SolverTolerances& tol = {});

UpdateVector rls(const ObservationSystem& system, const RegularizerSpec& lambda,
                 const SolverTolerances& tol = {});

PcaFactors pca(const Eigen::MatrixXd& g, int k, bool center);

inline PcaFactors pca(const ObservationSystem& system, int k, bool center = false) {
  return pca(system.g, k, center);
}

/// Regression of z on the first k principal-component scores,
/// u = P (T^T T)^-1 T^T z. Components below the eigenvalue ratio floor are
/// truncated away.
UpdateVector pcr1(const ObservationSystem& system, int k, const SolverTolerances& tol = {});

/// PCR with a regulariser Xi in the component domain,
/// u = P (T^T T + Xi)^-1 T^T z.
UpdateVector pcr2(const ObservationSystem& system, int k, const RegularizerSpec& xi,
                  const SolverTolerances& tol = {});

}  // namespace pelrec
