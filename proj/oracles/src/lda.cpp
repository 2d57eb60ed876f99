#include "nair/oracles/lda.hpp"

#include <stdexcept>

#include <Eigen/Dense>

namespace nair::oracles {

LdaProbe lda_probe(std::span<const std::vector<double>> features, std::span<const Label> labels, double ridge) {
  if (features.empty() || features.size() != labels.size()) throw std::invalid_argument("lda_probe: bad input");
  const auto d = static_cast<Eigen::Index>(features.front().size());
  Eigen::VectorXd mu[2] = {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  double count[2] = {0, 0};
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int k = labels[i] == Label::kHigh ? 1 : 0;
    mu[k] += Eigen::Map<const Eigen::VectorXd>(features[i].data(), d);
    count[k] += 1;
  }
  if (count[0] == 0 || count[1] == 0) throw std::invalid_argument("lda_probe: needs both classes");
  mu[0] /= count[0];
  mu[1] /= count[1];

  Eigen::MatrixXd sw = ridge * Eigen::MatrixXd::Identity(d, d);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int k = labels[i] == Label::kHigh ? 1 : 0;
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(features[i].data(), d) - mu[k];
    sw.noalias() += x * x.transpose();
  }
  const Eigen::VectorXd w = sw.ldlt().solve(mu[1] - mu[0]);
  const double m0 = w.dot(mu[0]), m1 = w.dot(mu[1]);
  const double threshold = 0.5 * (m0 + m1);

  double correct = 0, var = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double p = w.dot(Eigen::Map<const Eigen::VectorXd>(features[i].data(), d));
    const bool high = p >= threshold;
    const bool is_high = labels[i] == Label::kHigh;
    correct += high == is_high ? 1 : 0;
    const double m = is_high ? m1 : m0;
    var += (p - m) * (p - m);
  }
  LdaProbe out;
  out.train_accuracy = correct / static_cast<double>(features.size());
  var /= static_cast<double>(features.size());
  out.fisher_ratio = var > 0 ? (m1 - m0) * (m1 - m0) / var : 0.0;
  return out;
}

}  // namespace nair::oracles
