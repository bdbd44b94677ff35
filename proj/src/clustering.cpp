#include "pelrec/clustering.hpp"

#include "pelrec/errors.hpp"
#include "pelrec/regression.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pelrec {

Eigen::VectorXd PcProjection::project(const DisplacementVector& dv) const {
  const Eigen::Vector2d centered = Eigen::Vector2d(dv.dx, dv.dy) - sample_mean;
  return basis.transpose() * centered;
}

double PcProjection::residual(const DisplacementVector& dv) const {
  const Eigen::Vector2d centered = Eigen::Vector2d(dv.dx, dv.dy) - sample_mean;
  return (centered - basis * (basis.transpose() * centered)).norm();
}

PcProjection project_dvs(std::span<const DisplacementVector> samples, int m) {
  if (m < 1 || m > 2) {
    throw ConfigError("projection keeps 1 or 2 components");
  }
  if (samples.size() < static_cast<std::size_t>(m) + 1) {
    throw ConfigError("need at least m + 1 samples");
  }
  const bool identical = std::all_of(samples.begin(), samples.end(), [&](const auto& s) {
    return s == samples.front();
  });
  if (identical) {
    throw ZeroVarianceError("all displacement samples are identical");
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd data(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    data(i, 0) = samples[static_cast<std::size_t>(i)].dx;
    data(i, 1) = samples[static_cast<std::size_t>(i)].dy;
  }
  const PcaFactors f = pca(data, m, true);
  PcProjection proj;
  proj.samples = std::move(data);
  proj.basis = f.loadings;
  proj.scores = f.scores;
  proj.sample_mean = f.column_means;
  proj.explained_variance = f.eigenvalues / static_cast<double>(n - 1);
  return proj;
}

double mahalanobis_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& center,
                            const Eigen::MatrixXd& covariance) {
  const Eigen::VectorXd diff = x - center;
  return std::sqrt(std::max(0.0, diff.dot(covariance.ldlt().solve(diff))));
}

ClusterModel fit_classes(const PcProjection& projection, std::span<const int> labels,
                         const ClusterOptions& options) {
  const Eigen::Index n = projection.scores.rows();
  const Eigen::Index m = projection.components();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ConfigError("one label per sample is required");
  }
  if (!(options.mahalanobis_quantile > 0.0 && options.mahalanobis_quantile < 1.0) ||
      !(options.residual_quantile > 0.0 && options.residual_quantile <= 1.0)) {
    throw ConfigError("quantiles must lie in (0, 1)");
  }
  int class_count = 0;
  for (int l : labels) {
    if (l < 0) throw ConfigError("class labels must be non-negative");
    class_count = std::max(class_count, l + 1);
  }

  const boost::math::chi_squared chi2(static_cast<double>(m));
  const double threshold = std::sqrt(boost::math::quantile(chi2, options.mahalanobis_quantile));

  ClusterModel model;
  for (int c = 0; c < class_count; ++c) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)] == c) rows.push_back(i);
    }
    if (static_cast<Eigen::Index>(rows.size()) < m + 1) {
      throw InsufficientMembersError("class " + std::to_string(c) + " has " +
                                     std::to_string(rows.size()) + " members, needs " +
                                     std::to_string(m + 1));
    }
    const auto count = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd s(count, m);
    std::vector<double> residuals;
    residuals.reserve(rows.size());
    for (Eigen::Index i = 0; i < count; ++i) {
      const Eigen::Index row = rows[static_cast<std::size_t>(i)];
      s.row(i) = projection.scores.row(row);
      residuals.push_back(projection.residual(
          {projection.samples(row, 0), projection.samples(row, 1)}));
    }

    ClassModel cls;
    cls.members = rows.size();
    cls.center = s.colwise().mean().transpose();
    const Eigen::MatrixXd centered = s.rowwise() - cls.center.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(count - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd floored =
        eig.eigenvalues().cwiseMax(options.covariance_floor);
    cov = eig.eigenvectors() * floored.asDiagonal() * eig.eigenvectors().transpose();
    cls.covariance = 0.5 * (cov + cov.transpose());
    cls.mahalanobis_threshold = threshold;

    std::sort(residuals.begin(), residuals.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(options.residual_quantile * static_cast<double>(residuals.size())));
    const double empirical = residuals[std::clamp<std::size_t>(rank, 1, residuals.size()) - 1];
    cls.residual_threshold = std::max(empirical, options.residual_floor);
    model.classes.push_back(std::move(cls));
  }
  return model;
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kSingleClass:
      return "single-class";
    case Verdict::kMultipleLoci:
      return "multiple-loci";
    case Verdict::kOutlier:
      return "outlier";
  }
  return "unknown";
}

ClassificationOutcome classify(const DisplacementVector& dv, const PcProjection& projection,
                               const ClusterModel& model) {
  ClassificationOutcome out;
  const Eigen::VectorXd score = projection.project(dv);
  out.residual = projection.residual(dv);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    const ClassModel& cls = model.classes[c];
    const double dist = mahalanobis_distance(score, cls.center, cls.covariance);
    out.distances.push_back(dist);
    if (dist < best) {
      best = dist;
      out.nearest = static_cast<int>(c);
    }
    if (dist <= cls.mahalanobis_threshold && out.residual <= cls.residual_threshold) {
      out.memberships.push_back(static_cast<int>(c));
    }
  }
  switch (out.memberships.size()) {
    case 0:
      out.verdict = Verdict::kOutlier;
      break;
    case 1:
      out.verdict = Verdict::kSingleClass;
      break;
    default:
      out.verdict = Verdict::kMultipleLoci;
      break;
  }
  return out;
}

Ellipse class_ellipse(const ClassModel& cls) {
  Ellipse e;
  if (cls.center.size() == 1) {
    e.center = {cls.center(0), 0.0};
    e.semi_major = cls.mahalanobis_threshold * std::sqrt(cls.covariance(0, 0));
    return e;
  }
  e.center = cls.center.head<2>();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cls.covariance.topLeftCorner<2, 2>());
  // Eigenvalues ascend, so column 1 is the principal axis.
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  e.semi_major = cls.mahalanobis_threshold * std::sqrt(eig.eigenvalues()(1));
  e.semi_minor = cls.mahalanobis_threshold * std::sqrt(eig.eigenvalues()(0));
  double angle = std::atan2(major.y(), major.x());
  if (angle <= -std::numbers::pi / 2) angle += std::numbers::pi;
  if (angle > std::numbers::pi / 2) angle -= std::numbers::pi;
  e.orientation = angle;
  return e;
}

}  // namespace pelrec
