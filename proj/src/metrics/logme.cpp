#include "xferod/error.hpp"
#include "xferod/metrics.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace xferod {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2 pi)
constexpr double kRankCutoff = 1e-12;              // relative to the largest singular value
constexpr double kMaxPrecision = 1e300;

}  // namespace

EvidenceModel::EvidenceModel(const Eigen::MatrixXd& features)
    : n_(features.rows()), d_(features.cols()) {
  if (n_ < 1 || d_ < 1) throw InvalidData("LogME needs a non-empty feature matrix");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(features, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  const double cutoff = sv.size() > 0 ? sv(0) * kRankCutoff : 0.0;
  while (rank < sv.size() && sv(rank) > cutoff && sv(rank) > 0) ++rank;
  u_ = svd.matrixU().leftCols(rank);
  sigma_sq_ = sv.head(rank).array().square();
}

EvidenceModel::Projection EvidenceModel::project(const Eigen::VectorXd& target) const {
  Projection p;
  p.z = u_.transpose() * target;
  p.outside_sq = (target - u_ * p.z).squaredNorm();
  return p;
}

EvidenceModel::Terms EvidenceModel::terms(const Projection& p, double alpha, double beta) const {
  Terms t{0.0, 0.0, p.outside_sq, 0.0};
  double log_det = static_cast<double>(d_ - rank()) * std::log(alpha);
  for (Eigen::Index j = 0; j < rank(); ++j) {
    const double s = sigma_sq_(j);
    const double z2 = p.z(j) * p.z(j);
    const double denom = alpha + beta * s;
    t.gamma += beta * s / denom;
    t.m_norm_sq += beta * beta * s * z2 / (denom * denom);
    t.residual_sq += (alpha / denom) * (alpha / denom) * z2;
    log_det += std::log(denom);
  }
  const double n = static_cast<double>(n_), d = static_cast<double>(d_);
  // Prior normalizer and log|A| first: they cancel exactly when F = 0, which
  // leaves the plain Gaussian likelihood of the target.
  t.log_evidence = (0.5 * d * std::log(alpha) - 0.5 * log_det) + 0.5 * n * std::log(beta) -
                   0.5 * beta * t.residual_sq - 0.5 * alpha * t.m_norm_sq - 0.5 * n * kLog2Pi;
  return t;
}

double EvidenceModel::log_evidence_per_sample(const Eigen::VectorXd& target, double alpha,
                                              double beta) const {
  return terms(project(target), alpha, beta).log_evidence / static_cast<double>(n_);
}

EvidenceSolution EvidenceModel::solve(const Eigen::VectorXd& target,
                                      const EvidenceOptions& opts) const {
  if (target.size() != n_) throw DegenerateTarget("target length differs from sample count");
  if (n_ < 2) throw DegenerateTarget("LogME needs at least two samples");
  if (!target.allFinite()) throw DegenerateTarget("target contains NaN or Inf");
  if (target.maxCoeff() == target.minCoeff()) throw DegenerateTarget("target is constant");

  const double n = static_cast<double>(n_);
  const Projection proj = project(target);

  double alpha = 1.0, beta = 1.0;
  Terms t = terms(proj, alpha, beta);

  EvidenceSolution best;
  auto record = [&](int iteration) {
    if (iteration == 0 || t.log_evidence / n > best.log_evidence_per_sample) {
      best = {alpha, beta, t.gamma, t.m_norm_sq, t.residual_sq, t.log_evidence / n, iteration, false};
    }
  };
  record(0);

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const double previous = t.log_evidence;
    // An all-zero posterior mean leaves the evidence flat in alpha; keep it.
    if (t.m_norm_sq > 0 && t.gamma > 0) alpha = t.gamma / t.m_norm_sq;
    if (t.residual_sq > 0) beta = std::min((n - t.gamma) / t.residual_sq, kMaxPrecision);
    if (!(alpha > 0) || !std::isfinite(alpha) || !(beta > 0)) break;

    t = terms(proj, alpha, beta);
    if (!std::isfinite(t.log_evidence)) break;
    record(it);
    best.iterations = it;
    if (std::abs(t.log_evidence - previous) / n < opts.tolerance) {
      best.converged = true;
      break;
    }
  }
  return best;
}

EvidenceSolution logme_single(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                              const EvidenceOptions& opts) {
  return EvidenceModel(features).solve(target, opts);
}

}  // namespace xferod
