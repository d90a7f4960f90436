#include "xferod/error.hpp"
#include "xferod/synth.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>

namespace xferod {

namespace {

struct Split {
  std::vector<Eigen::Index> train, test;
};

// Each class contributes round(0.7 n_c) rows to train, and at least one, so
// every class with objects is seen by the classifier.
Split stratified_split(const FeatureMatrix& fm, std::uint64_t seed) {
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(fm.num_classes));
  for (std::size_t i = 0; i < fm.labels.size(); ++i)
    by_class[static_cast<std::size_t>(fm.labels[i])].push_back(static_cast<Eigen::Index>(i));

  std::mt19937_64 rng(seed);
  Split split;
  for (auto& members : by_class) {
    if (members.empty()) continue;
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(kProbeTrainFraction * static_cast<double>(members.size()))),
        1, members.size());
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

// Ridge with an unpenalized intercept: fit on train rows centered by their
// own means, predict for any rows.
struct Ridge {
  Eigen::RowVectorXd x_mean, y_mean;
  Eigen::MatrixXd coef;

  Ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda)
      : x_mean(x.colwise().mean()), y_mean(y.colwise().mean()) {
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::MatrixXd yc = y.rowwise() - y_mean;
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += lambda;
    coef = gram.ldlt().solve(xc.transpose() * yc);
  }

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const {
    return ((x.rowwise() - x_mean) * coef).rowwise() + y_mean;
  }
};

}  // namespace

ProbeResult probe(const FeatureMatrix& fm, std::uint64_t split_seed) {
  fm.validate();
  if (fm.rows() < 10) throw ProbeError("probe needs at least 10 objects, got " + std::to_string(fm.rows()));
  const Split split = stratified_split(fm, split_seed);
  if (split.test.empty()) throw ProbeError("probe split left no held-out objects");

  const Eigen::MatrixXd x = fm.features.cast<double>();
  const Eigen::MatrixXd x_train = gather(x, split.train), x_test = gather(x, split.test);

  ProbeResult r;

  // One-vs-rest on 0/1 indicators; the argmax picks the smallest class on ties.
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(x.rows(), fm.num_classes);
  for (std::size_t i = 0; i < fm.labels.size(); ++i) onehot(static_cast<Eigen::Index>(i), fm.labels[i]) = 1.0;
  const Eigen::MatrixXd scores = Ridge(x_train, gather(onehot, split.train), kProbeRidge).predict(x_test);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    scores.row(i).maxCoeff(&best);
    if (best == fm.labels[static_cast<std::size_t>(split.test[static_cast<std::size_t>(i)])]) ++correct;
  }
  r.probe_accuracy = static_cast<double>(correct) / static_cast<double>(split.test.size());

  const Eigen::MatrixXd boxes = fm.boxes;
  const Eigen::MatrixXd y_test = gather(boxes, split.test);
  const Eigen::MatrixXd pred = Ridge(x_train, gather(boxes, split.train), kProbeRidge).predict(x_test);
  double r2_sum = 0.0;
  int used = 0;
  for (Eigen::Index j = 0; j < 4; ++j) {
    const double sst = (y_test.col(j).array() - y_test.col(j).mean()).square().sum();
    if (!(sst > 0)) continue;  // constant held-out coordinate: R^2 undefined
    const double sse = (y_test.col(j) - pred.col(j)).squaredNorm();
    r2_sum += 1.0 - sse / sst;
    ++used;
  }
  r.box_r2 = used ? r2_sum / used : 0.0;
  r.map_proxy = r.probe_accuracy * std::max(0.0, r.box_r2);
  return r;
}

}  // namespace xferod
