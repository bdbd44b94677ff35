#pragma once

#include "pelrec/image.hpp"

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

namespace pelrec {

/// Centred PCA of a set of displacement vectors, keeping m components.
struct PcProjection {
  Eigen::MatrixXd samples;             // N x 2, as supplied
  Eigen::MatrixXd basis;               // 2 x m, orthonormal columns
  Eigen::MatrixXd scores;              // N x m
  Eigen::Vector2d sample_mean;
  Eigen::VectorXd explained_variance;  // m entries, nonincreasing

  Eigen::Index components() const { return basis.cols(); }

  Eigen::VectorXd project(const DisplacementVector& dv) const;
  /// Norm of the part of (dv - mean) not spanned by the basis.
  double residual(const DisplacementVector& dv) const;
};

/// Throws ZeroVarianceError when every sample is identical.
PcProjection project_dvs(std::span<const DisplacementVector> samples, int m = 2);

struct ClassModel {
  Eigen::VectorXd center;
  Eigen::MatrixXd covariance;
  /// Mahalanobis distance (not squared) bounding the class ellipse.
  double mahalanobis_threshold = 0.0;
  double residual_threshold = 0.0;
  std::size_t members = 0;
};

struct ClusterModel {
  std::vector<ClassModel> classes;
};

struct ClusterOptions {
  /// Chi-square quantile (m degrees of freedom) for the ellipse boundary.
  double mahalanobis_quantile = 0.975;
  /// Empirical quantile of training residual norms.
  double residual_quantile = 0.975;
  double covariance_floor = 1e-9;
  /// Lower bound on the residual threshold, which is otherwise zero when m
  /// equals the feature dimension.
  double residual_floor = 1e-6;
};

/// Fits one multivariate normal per label in PC-score space. Labels must be
/// 0..C-1 and each class needs at least m + 1 members.
ClusterModel fit_classes(const PcProjection& projection, std::span<const int> labels,
                         const ClusterOptions& options = {});

double mahalanobis_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& center,
                            const Eigen::MatrixXd& covariance);

enum class Verdict { kSingleClass, kMultipleLoci, kOutlier };

std::string_view to_string(Verdict verdict);

struct ClassificationOutcome {
  /// Member classes in ascending index order.
  std::vector<int> memberships;
  Verdict verdict = Verdict::kOutlier;
  /// Least Mahalanobis distance class; ties go to the lower index.
  int nearest = -1;
  std::vector<double> distances;
  double residual = 0.0;
};

ClassificationOutcome classify(const DisplacementVector& dv, const PcProjection& projection,
                               const ClusterModel& model);

/// Ellipse of a 2-D class at its Mahalanobis threshold.
struct Ellipse {
  Eigen::Vector2d center;
  double semi_major = 0.0;
  double semi_minor = 0.0;
  /// Angle (radians, in (-pi/2, pi/2]) of the major axis from the pc1 axis.
  double orientation = 0.0;
};

Ellipse class_ellipse(const ClassModel& cls);

}  // namespace pelrec
