#pragma once

#include "xferod/feature_matrix.hpp"
#include "xferod/scenario_table.hpp"

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

namespace xferod {

// ---------------------------------------------------------------------------
// LogME: maximum log-evidence of a Bayesian linear head on fixed features.
//
// Model: w ~ N(0, alpha^-1 I), target_i ~ N(w . f_i, beta^-1). The evidence
// is maximized over (alpha, beta) by the MacKay fixed point, evaluated in the
// singular basis of F so that one decomposition serves every target column.
// ---------------------------------------------------------------------------

struct EvidenceOptions {
  int max_iterations = 100;
  double tolerance = 1e-5;  // on the change of per-sample log evidence
};

struct EvidenceSolution {
  double alpha = 1.0;  // prior precision of the head weights
  double beta = 1.0;   // observation precision
  double gamma = 0.0;  // effective number of well-determined parameters
  double m_norm_sq = 0.0;
  double residual_sq = 0.0;
  double log_evidence_per_sample = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Thin SVD of a feature matrix, shared by all target columns scored on it.
class EvidenceModel {
 public:
  explicit EvidenceModel(const Eigen::MatrixXd& features);

  /// Throws DegenerateTarget when the target is constant or its length
  /// differs from the sample count. A run that hits max_iterations returns
  /// the best iterate with converged = false.
  EvidenceSolution solve(const Eigen::VectorXd& target, const EvidenceOptions& opts = {}) const;

  /// Per-sample log evidence at fixed (alpha, beta).
  double log_evidence_per_sample(const Eigen::VectorXd& target, double alpha, double beta) const;

  Eigen::Index samples() const { return n_; }
  Eigen::Index dims() const { return d_; }
  Eigen::Index rank() const { return sigma_sq_.size(); }

 private:
  struct Projection {
    Eigen::VectorXd z;  // U^T y
    double outside_sq;  // squared norm of y outside the column space of F
  };
  struct Terms {
    double gamma, m_norm_sq, residual_sq, log_evidence;
  };

  Projection project(const Eigen::VectorXd& target) const;
  Terms terms(const Projection& p, double alpha, double beta) const;

  Eigen::MatrixXd u_;         // n x r left singular vectors
  Eigen::VectorXd sigma_sq_;  // r squared non-zero singular values
  Eigen::Index n_ = 0;
  Eigen::Index d_ = 0;
};

EvidenceSolution logme_single(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                              const EvidenceOptions& opts = {});

// ---------------------------------------------------------------------------
// Scores on a FeatureMatrix
// ---------------------------------------------------------------------------

struct TransRateConfig {
  double eps = 1e-4;  // distortion of the coding-rate surrogate
};

struct MetricsConfig {
  TransRateConfig transrate;
  EvidenceOptions evidence;
  bool standardize = false;  // z-score every feature column before scoring
};

/// Features as doubles, z-scored per column when cfg.standardize is set.
Eigen::MatrixXd feature_values(const FeatureMatrix& fm, const MetricsConfig& cfg = {});

/// Mean LogME over the one-hot class indicator columns. Columns that are all
/// 0 or all 1 are skipped with a warning; throws DegenerateTarget when none
/// remain.
double logme_class(const FeatureMatrix& fm, const MetricsConfig& cfg = {});

/// Mean LogME over the four normalized box coordinates. Constant coordinates
/// are skipped with a warning; throws DegenerateTarget when none remain.
double logme_pos(const FeatureMatrix& fm, const MetricsConfig& cfg = {});

/// Same scores on a prebuilt model of feature_values(fm, ...), so one SVD
/// serves the class and box columns.
double logme_class(const EvidenceModel& model, const FeatureMatrix& fm, const EvidenceOptions& opts = {});
double logme_pos(const EvidenceModel& model, const FeatureMatrix& fm, const EvidenceOptions& opts = {});

/// logme_pos + logme_class.
double tlogme(const FeatureMatrix& fm, const MetricsConfig& cfg = {});

/// tr(pinv(Sigma_F) Sigma_z), with Sigma_z the covariance of class-mean
/// features. Covariances use 1/n. Exactly 0 for a single class.
double hscore(const FeatureMatrix& fm, const MetricsConfig& cfg = {});

struct ShrinkageResult {
  double lambda = 1.0;  // shrinkage intensity in [0, 1]
  double mu = 0.0;      // average eigenvalue tr(S) / D
};

/// Ledoit-Wolf shrinkage towards mu * I for already centered rows.
ShrinkageResult ledoit_wolf(const Eigen::MatrixXd& centered);

/// tr(Sigma_lambda^-1 (1 - lambda) Sigma_z) with
/// Sigma_lambda = (1 - lambda) Sigma_F + lambda mu I.
double hscore_regularized(const FeatureMatrix& fm, const MetricsConfig& cfg = {});

/// 0.5 logdet(I + D / (m eps^2) Z^T Z) for an m x D matrix Z.
double coding_rate(const Eigen::MatrixXd& z, double eps);

/// Coding rate of globally centered features minus the class-weighted coding
/// rates of each class re-centered on its own mean.
double transrate(const FeatureMatrix& fm, const MetricsConfig& cfg = {});

/// Evidence bound check: LogME of one target next to the Gaussian
/// log-likelihood of the least-squares head at the evidence optimum beta.
struct EvidenceBound {
  double logme = 0.0;
  double mle_loglik_per_sample = 0.0;
  double beta = 0.0;
  bool converged = false;
  double gap() const { return mle_loglik_per_sample - logme; }
};

EvidenceBound prop1_gap(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                        const EvidenceOptions& opts = {});

struct TargetColumn {
  enum class Kind { ClassIndicator, BoxCoordinate };
  Kind kind = Kind::ClassIndicator;
  int index = 0;  // class id, or box coordinate 0..3 (x, y, w, h)
};

EvidenceBound prop1_gap(const FeatureMatrix& fm, TargetColumn column, const MetricsConfig& cfg = {});

// ---------------------------------------------------------------------------
// Batch scoring
// ---------------------------------------------------------------------------

namespace metric_names {
inline constexpr const char* kLogme = "logme";  // classification LogME (logme_class)
inline constexpr const char* kTlogme = "tlogme";
inline constexpr const char* kLogmePos = "logme_pos";
inline constexpr const char* kHscore = "hscore";
inline constexpr const char* kHscoreReg = "hscore_reg";
inline constexpr const char* kTransrate = "transrate";
}  // namespace metric_names

/// All metric names in their canonical column order.
const std::vector<std::string>& all_metric_names();

struct MetricScore {
  std::string metric;
  std::string extractor;
  OptionalScore value;  // empty when the metric is undefined on this input
  std::string note;     // reason for an empty value
};

/// Scores the requested metrics (default: all six). Metrics that raise
/// DegenerateTarget are reported with an empty value instead of aborting.
/// Throws std::invalid_argument for an unknown metric name.
std::map<std::string, MetricScore> score_all(const FeatureMatrix& fm, const MetricsConfig& cfg = {},
                                             const std::vector<std::string>& metrics = {});

}  // namespace xferod
