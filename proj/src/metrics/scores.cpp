#include "xferod/error.hpp"
#include "xferod/log.hpp"
#include "xferod/metrics.hpp"
#include "xferod/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <optional>

namespace xferod {

namespace {

constexpr double kPinvCutoff = 1e-10;  // relative to the largest eigenvalue
constexpr double kLog2Pi = 1.8378770664093454836;

// Mean of the selected rows, accumulated in index order. Global and per-class
// statistics share this routine so that a single-class input produces
// bit-identical global and conditional terms.
Eigen::RowVectorXd row_mean(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.cols());
  for (const auto r : rows) acc += x.row(r);
  return acc / static_cast<double>(rows.size());
}

Eigen::MatrixXd centered_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  const Eigen::RowVectorXd mean = row_mean(x, rows);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = x.row(rows[static_cast<std::size_t>(i)]) - mean;
  return out;
}

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

// Row indices of each class present in the labels, in class order.
std::vector<std::vector<Eigen::Index>> class_rows(const FeatureMatrix& fm) {
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(fm.num_classes));
  for (std::size_t i = 0; i < fm.labels.size(); ++i)
    by_class.at(static_cast<std::size_t>(fm.labels[i])).push_back(static_cast<Eigen::Index>(i));
  std::erase_if(by_class, [](const auto& rows) { return rows.empty(); });
  return by_class;
}

struct Covariances {
  Eigen::MatrixXd centered;   // globally centered features
  Eigen::MatrixXd sigma_f;    // (1/n) F~^T F~
  Eigen::MatrixXd sigma_z;    // (1/n) Z~^T Z~
};

Covariances covariances(const FeatureMatrix& fm, const MetricsConfig& cfg) {
  const Eigen::MatrixXd x = feature_values(fm, cfg);
  const Eigen::Index n = x.rows();
  if (n < 2) throw InvalidData("H-score needs at least two samples");

  const auto everything = all_rows(n);
  const Eigen::RowVectorXd mean = row_mean(x, everything);
  Covariances c;
  c.centered = x.rowwise() - mean;
  c.sigma_f = (c.centered.transpose() * c.centered) / static_cast<double>(n);

  Eigen::MatrixXd z(n, x.cols());
  for (const auto& rows : class_rows(fm)) {
    const Eigen::RowVectorXd shifted = row_mean(x, rows) - mean;
    for (const auto r : rows) z.row(r) = shifted;
  }
  c.sigma_z = (z.transpose() * z) / static_cast<double>(n);
  return c;
}

// tr(pinv(a) b) for symmetric PSD a, via the eigenbasis of a.
double trace_pinv_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const auto& values = eig.eigenvalues();
  const auto& vectors = eig.eigenvectors();
  const double cutoff = values.size() ? values.maxCoeff() * kPinvCutoff : 0.0;
  double trace = 0.0;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    if (!(values(j) > cutoff)) continue;
    trace += vectors.col(j).dot(b * vectors.col(j)) / values(j);
  }
  return trace;
}

}  // namespace

Eigen::MatrixXd feature_values(const FeatureMatrix& fm, const MetricsConfig& cfg) {
  Eigen::MatrixXd x = fm.features.cast<double>();
  if (!cfg.standardize) return x;
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).sum() / n;
    x.col(c).array() -= mean;
    const double sd = std::sqrt(x.col(c).squaredNorm() / n);
    if (sd > 0) x.col(c) /= sd;
  }
  return x;
}

namespace {

// Mean LogME over target columns sharing one decomposition; degenerate
// columns are skipped.
double mean_logme(const EvidenceModel& model, const std::vector<Eigen::VectorXd>& targets,
                  const std::vector<std::string>& names, const EvidenceOptions& opts,
                  const char* what) {
  std::vector<std::optional<double>> values(targets.size());
  std::vector<std::string> skipped(targets.size());
  parallel_for(targets.size(), [&](std::size_t k) {
    try {
      values[k] = model.solve(targets[k], opts).log_evidence_per_sample;
    } catch (const DegenerateTarget& e) {
      skipped[k] = e.what();
    }
  });
  double sum = 0.0;
  int used = 0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (values[k]) {
      sum += *values[k];
      ++used;
    } else {
      warn(std::string(what) + ": skipping " + names[k] + " (" + skipped[k] + ")");
    }
  }
  if (used == 0) throw DegenerateTarget(std::string(what) + ": every target column is degenerate");
  return sum / used;
}

std::vector<Eigen::VectorXd> class_targets(const FeatureMatrix& fm, std::vector<std::string>& names) {
  std::vector<Eigen::VectorXd> out;
  for (int k = 0; k < fm.num_classes; ++k) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(fm.labels.size()));
    for (std::size_t i = 0; i < fm.labels.size(); ++i)
      y(static_cast<Eigen::Index>(i)) = fm.labels[i] == k ? 1.0 : 0.0;
    out.push_back(std::move(y));
    names.push_back("class " + std::to_string(k));
  }
  return out;
}

std::vector<Eigen::VectorXd> box_targets(const FeatureMatrix& fm, std::vector<std::string>& names) {
  static const char* coord[] = {"x", "y", "w", "h"};
  std::vector<Eigen::VectorXd> out;
  for (int c = 0; c < 4; ++c) {
    out.emplace_back(fm.boxes.col(c));
    names.push_back(std::string("box ") + coord[c]);
  }
  return out;
}

}  // namespace

double logme_class(const EvidenceModel& model, const FeatureMatrix& fm, const EvidenceOptions& opts) {
  std::vector<std::string> names;
  const auto targets = class_targets(fm, names);
  return mean_logme(model, targets, names, opts, "logme_class");
}

double logme_pos(const EvidenceModel& model, const FeatureMatrix& fm, const EvidenceOptions& opts) {
  std::vector<std::string> names;
  const auto targets = box_targets(fm, names);
  return mean_logme(model, targets, names, opts, "logme_pos");
}

double logme_class(const FeatureMatrix& fm, const MetricsConfig& cfg) {
  return logme_class(EvidenceModel(feature_values(fm, cfg)), fm, cfg.evidence);
}

double logme_pos(const FeatureMatrix& fm, const MetricsConfig& cfg) {
  return logme_pos(EvidenceModel(feature_values(fm, cfg)), fm, cfg.evidence);
}

double tlogme(const FeatureMatrix& fm, const MetricsConfig& cfg) {
  const EvidenceModel model(feature_values(fm, cfg));
  return logme_pos(model, fm, cfg.evidence) + logme_class(model, fm, cfg.evidence);
}

double hscore(const FeatureMatrix& fm, const MetricsConfig& cfg) {
  const auto c = covariances(fm, cfg);
  return trace_pinv_product(c.sigma_f, c.sigma_z);
}

ShrinkageResult ledoit_wolf(const Eigen::MatrixXd& centered) {
  const Eigen::Index n = centered.rows(), d = centered.cols();
  if (n < 2 || d < 1) throw InvalidData("Ledoit-Wolf needs n >= 2 and D >= 1");
  const double nd = static_cast<double>(n);
  const Eigen::MatrixXd s = centered.transpose() * centered / nd;

  ShrinkageResult out;
  out.mu = s.trace() / static_cast<double>(d);
  const double d2 = (s - out.mu * Eigen::MatrixXd::Identity(d, d)).squaredNorm();
  if (!(d2 > 0)) {
    out.lambda = 1.0;
    return out;
  }

  // ||f f^T - S||_F^2 = ||f||^4 - 2 f^T S f + ||S||_F^2
  const double s_norm_sq = s.squaredNorm();
  double b_bar2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd f = centered.row(i).transpose();
    const double f2 = f.squaredNorm();
    b_bar2 += f2 * f2 - 2.0 * f.dot(s * f) + s_norm_sq;
  }
  b_bar2 /= nd * nd;
  const double b2 = std::min(std::max(b_bar2, 0.0), d2);
  out.lambda = b2 / d2;
  return out;
}

double hscore_regularized(const FeatureMatrix& fm, const MetricsConfig& cfg) {
  const auto c = covariances(fm, cfg);
  const auto shrink = ledoit_wolf(c.centered);
  const Eigen::Index d = c.sigma_f.rows();
  const Eigen::MatrixXd sigma =
      (1.0 - shrink.lambda) * c.sigma_f + shrink.lambda * shrink.mu * Eigen::MatrixXd::Identity(d, d);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  const auto& values = eig.eigenvalues();
  if (!(values.minCoeff() > values.maxCoeff() * kPinvCutoff))
    warn("hscore_reg: shrunk covariance is singular; using the pseudo-inverse");
  return (1.0 - shrink.lambda) * trace_pinv_product(sigma, c.sigma_z);
}

double coding_rate(const Eigen::MatrixXd& z, double eps) {
  if (!(eps > 0)) throw InvalidData("coding rate distortion eps must be > 0");
  const Eigen::Index m = z.rows(), d = z.cols();
  if (m < 1) throw InvalidData("coding rate needs at least one row");
  const double scale = static_cast<double>(d) / (static_cast<double>(m) * eps * eps);

  // logdet(I_D + c Z^T Z) = logdet(I_m + c Z Z^T); decompose the smaller Gram matrix.
  const Eigen::MatrixXd gram = m < d ? Eigen::MatrixXd(z * z.transpose())
                                     : Eigen::MatrixXd(z.transpose() * z);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  double log_det = 0.0;
  for (const double v : eig.eigenvalues()) log_det += std::log1p(scale * std::max(v, 0.0));
  return 0.5 * log_det;
}

double transrate(const FeatureMatrix& fm, const MetricsConfig& cfg) {
  const Eigen::MatrixXd x = feature_values(fm, cfg);
  const Eigen::Index n = x.rows();
  if (n < 2) throw InvalidData("TransRate needs at least two samples");
  const double eps = cfg.transrate.eps;

  const double total = coding_rate(centered_rows(x, all_rows(n)), eps);
  double conditional = 0.0;
  for (const auto& rows : class_rows(fm))
    conditional += static_cast<double>(rows.size()) / static_cast<double>(n) *
                   coding_rate(centered_rows(x, rows), eps);
  return total - conditional;
}

EvidenceBound prop1_gap(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                        const EvidenceOptions& opts) {
  const auto solution = logme_single(features, target, opts);
  const Eigen::VectorXd w = features.completeOrthogonalDecomposition().solve(target);
  const double n = static_cast<double>(target.size());
  const double rss = (target - features * w).squaredNorm();
  const double beta = solution.beta;

  EvidenceBound out;
  out.logme = solution.log_evidence_per_sample;
  out.mle_loglik_per_sample = (0.5 * n * std::log(beta) - 0.5 * beta * rss - 0.5 * n * kLog2Pi) / n;
  out.beta = beta;
  out.converged = solution.converged;
  return out;
}

EvidenceBound prop1_gap(const FeatureMatrix& fm, TargetColumn column, const MetricsConfig& cfg) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(fm.rows()));
  if (column.kind == TargetColumn::Kind::ClassIndicator) {
    for (std::size_t i = 0; i < fm.labels.size(); ++i)
      y(static_cast<Eigen::Index>(i)) = fm.labels[i] == column.index ? 1.0 : 0.0;
  } else {
    if (column.index < 0 || column.index > 3) throw std::out_of_range("box coordinate must be 0..3");
    y = fm.boxes.col(column.index);
  }
  return prop1_gap(feature_values(fm, cfg), y, cfg.evidence);
}

}  // namespace xferod
