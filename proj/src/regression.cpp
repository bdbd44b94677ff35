#include "pelrec/regression.hpp"

#include "pelrec/errors.hpp"

#include <cmath>
#include <string>

namespace pelrec {

namespace {

void check_system(const ObservationSystem& system) {
  if (system.g.rows() != system.z.size()) {
    throw ConfigError("observation matrix and vector have different row counts");
  }
  if (system.g.cols() < 1 || system.g.rows() < 1) {
    throw ConfigError("empty observation system");
  }
  if (!system.g.allFinite() || !system.z.allFinite()) {
    throw ConfigError("observation system contains non-finite entries");
  }
}

// Solves A x = b for symmetric A after rejecting singular or ill-conditioned A.
Eigen::VectorXd solve_symmetric(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                double max_condition, const char* what) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  const double largest = eig.eigenvalues().maxCoeff();
  const double smallest = eig.eigenvalues().minCoeff();
  if (!(largest > 0.0) || !(smallest > largest / max_condition)) {
    throw SingularityError(std::string(what) + " normal matrix is singular or ill-conditioned");
  }
  return a.ldlt().solve(b);
}

struct RetainedComponents {
  Eigen::MatrixXd loadings;
  Eigen::MatrixXd scores;
  std::vector<Eigen::Index> index;
};

RetainedComponents retain(const ObservationSystem& system, int k, const SolverTolerances& tol) {
  const PcaFactors f = pca(system.g, k, false);
  RetainedComponents kept;
  const double top = f.eigenvalues.size() > 0 ? f.eigenvalues(0) : 0.0;
  for (Eigen::Index i = 0; i < f.components(); ++i) {
    if (f.eigenvalues(i) >= tol.eigenvalue_ratio_floor * top && f.eigenvalues(i) > 0.0) {
      kept.index.push_back(i);
    }
  }
  for (Eigen::Index i : kept.index) {
    if (f.eigenvalues(i) < tol.eigenvalue_floor) {
      throw DegenerateComponentError("retained component " + std::to_string(i) +
                                     " has eigenvalue below the absolute floor");
    }
  }
  const auto n = static_cast<Eigen::Index>(kept.index.size());
  kept.loadings.resize(f.loadings.rows(), n);
  kept.scores.resize(f.scores.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    kept.loadings.col(c) = f.loadings.col(kept.index[c]);
    kept.scores.col(c) = f.scores.col(kept.index[c]);
  }
  return kept;
}

}  // namespace

void RegularizerSpec::validate() const {
  switch (kind) {
    case RegularizerKind::kNone:
      return;
    case RegularizerKind::kScalarIdentity:
      if (!std::isfinite(lambda) || lambda < 0.0) {
        throw ConfigError("regulariser must be finite and non-negative");
      }
      return;
    case RegularizerKind::kDiagonal:
      if (diagonal.empty()) {
        throw ConfigError("diagonal regulariser needs at least one entry");
      }
      for (double v : diagonal) {
        if (!std::isfinite(v) || v < 0.0) {
          throw ConfigError("regulariser must be finite and non-negative");
        }
      }
      return;
  }
}

bool RegularizerSpec::is_zero() const {
  switch (kind) {
    case RegularizerKind::kNone:
      return true;
    case RegularizerKind::kScalarIdentity:
      return lambda == 0.0;
    case RegularizerKind::kDiagonal:
      for (double v : diagonal) {
        if (v != 0.0) return false;
      }
      return true;
  }
  return true;
}

double RegularizerSpec::entry(Eigen::Index i) const {
  switch (kind) {
    case RegularizerKind::kNone:
      return 0.0;
    case RegularizerKind::kScalarIdentity:
      return lambda;
    case RegularizerKind::kDiagonal:
      if (i < 0 || static_cast<std::size_t>(i) >= diagonal.size()) {
        throw ConfigError("diagonal regulariser is shorter than the number of unknowns");
      }
      return diagonal[static_cast<std::size_t>(i)];
  }
  return 0.0;
}

Eigen::MatrixXd RegularizerSpec::matrix(Eigen::Index p) const {
  validate();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    m(i, i) = entry(i);
  }
  return m;
}

UpdateVector ols(const ObservationSystem& system, const SolverTolerances& tol) {
  check_system(system);
  const Eigen::MatrixXd gtg = system.g.transpose() * system.g;
  return solve_symmetric(gtg, system.g.transpose() * system.z, tol.max_condition, "OLS");
}

UpdateVector rls(const ObservationSystem& system, const RegularizerSpec& lambda,
                 const SolverTolerances& tol) {
  check_system(system);
  const Eigen::MatrixXd a = system.g.transpose() * system.g + lambda.matrix(system.unknowns());
  return solve_symmetric(a, system.g.transpose() * system.z, tol.max_condition, "RLS");
}

PcaFactors pca(const Eigen::MatrixXd& g, int k, bool center) {
  const Eigen::Index p = g.cols();
  if (k < 1 || k > p) {
    throw ConfigError("component count must lie in [1, " + std::to_string(p) + "]");
  }
  if (g.rows() < k) {
    throw ConfigError("need at least as many samples as components");
  }
  PcaFactors f;
  f.column_means = center ? Eigen::VectorXd(g.colwise().mean().transpose())
                          : Eigen::VectorXd::Zero(p);
  const Eigen::MatrixXd centered = g.rowwise() - f.column_means.transpose();

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  f.loadings = svd.matrixV().leftCols(k);
  f.eigenvalues = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k && i < sigma.size(); ++i) {
    f.eigenvalues(i) = sigma(i) * sigma(i);
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index argmax = 0;
    f.loadings.col(c).cwiseAbs().maxCoeff(&argmax);
    if (f.loadings(argmax, c) < 0.0) {
      f.loadings.col(c) *= -1.0;
    }
  }
  f.scores = centered * f.loadings;
  f.rank_deficient = k > svd.rank();
  return f;
}

UpdateVector pcr1(const ObservationSystem& system, int k, const SolverTolerances& tol) {
  check_system(system);
  const RetainedComponents kept = retain(system, k, tol);
  if (kept.index.empty()) {
    throw DegenerateComponentError("no principal component carries variance");
  }
  const Eigen::MatrixXd ttt = kept.scores.transpose() * kept.scores;
  const Eigen::VectorXd coeffs =
      solve_symmetric(ttt, kept.scores.transpose() * system.z, tol.max_condition, "PCR1");
  return kept.loadings * coeffs;
}

UpdateVector pcr2(const ObservationSystem& system, int k, const RegularizerSpec& xi,
                  const SolverTolerances& tol) {
  check_system(system);
  xi.validate();
  const RetainedComponents kept = retain(system, k, tol);
  if (kept.index.empty()) {
    if (xi.is_zero()) {
      throw DegenerateComponentError("no principal component carries variance");
    }
    // All scores vanish, so T^T z = 0.
    return UpdateVector::Zero(system.unknowns());
  }
  Eigen::MatrixXd a = kept.scores.transpose() * kept.scores;
  for (std::size_t c = 0; c < kept.index.size(); ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    a(i, i) += xi.entry(kept.index[c]);
  }
  const Eigen::VectorXd coeffs =
      solve_symmetric(a, kept.scores.transpose() * system.z, tol.max_condition, "PCR2");
  return kept.loadings * coeffs;
}

}  // namespace pelrec
