#include "lfil/svm.hpp"

#include "lfil/error.hpp"
#include "lfil/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lfil {

LinearSvm LinearSvm::fit(const Eigen::MatrixXd& X, std::span<const int> labels, const SvmConfig& config) {
  if (static_cast<std::size_t>(X.rows()) != labels.size()) throw Error(Errc::DimensionMismatch, "rows vs labels");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0) || config.l2 < 0.0)
    throw Error(Errc::InvalidParams, "SVM config must be positive");
  LinearSvm m;
  m.classes_.assign(labels.begin(), labels.end());
  std::sort(m.classes_.begin(), m.classes_.end());
  m.classes_.erase(std::unique(m.classes_.begin(), m.classes_.end()), m.classes_.end());
  if (m.classes_.size() < 2) throw Error(Errc::SingleClass, "SVM needs at least two classes");

  const auto K = static_cast<Eigen::Index>(m.classes_.size());
  // ±1 targets, one column per one-vs-rest problem.
  Eigen::MatrixXd Y = -Eigen::MatrixXd::Ones(X.rows(), K);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto k = std::lower_bound(m.classes_.begin(), m.classes_.end(), labels[i]) - m.classes_.begin();
    Y(static_cast<Eigen::Index>(i), k) = 1.0;
  }
  m.W_ = Eigen::MatrixXd::Zero(X.cols(), K);
  m.b_ = Eigen::VectorXd::Zero(K);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, 0x5f3, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = config.learning_rate / std::sqrt(static_cast<double>(epoch));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<Eigen::Index> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                      order.begin() + static_cast<std::ptrdiff_t>(end));
      const Eigen::MatrixXd Xb = X(batch, Eigen::all);
      const Eigen::MatrixXd Yb = Y(batch, Eigen::all);
      Eigen::MatrixXd S = Xb * m.W_;
      S.rowwise() += m.b_.transpose();
      // Sub-gradient of the hinge term: −y·x where the margin is violated.
      const Eigen::MatrixXd active = ((Yb.array() * S.array()) < 1.0).cast<double>().matrix().cwiseProduct(Yb);
      const double inv = 1.0 / static_cast<double>(batch.size());
      const Eigen::MatrixXd gW = config.l2 * m.W_ - inv * (Xb.transpose() * active);
      const Eigen::VectorXd gb = -inv * active.colwise().sum().transpose();
      m.W_ -= lr * gW;
      m.b_ -= lr * gb;
    }
    if (!m.W_.allFinite() || !m.b_.allFinite()) throw Error(Errc::Diverged, "SVM weights became non-finite");
  }
  return m;
}

Eigen::MatrixXd LinearSvm::decision_values(const Eigen::MatrixXd& X) const {
  if (X.cols() != W_.rows()) throw Error(Errc::DimensionMismatch, "SVM input width");
  Eigen::MatrixXd S = X * W_;
  S.rowwise() += b_.transpose();
  return S;
}

int LinearSvm::predict_one(std::span<const double> row) const {
  if (row.size() != input_dim()) throw Error(Errc::DimensionMismatch, "SVM input width");
  Eigen::Map<const Eigen::VectorXd> x(row.data(), static_cast<Eigen::Index>(row.size()));
  const Eigen::VectorXd s = W_.transpose() * x + b_;
  Eigen::Index k = 0;
  s.maxCoeff(&k);
  return classes_[static_cast<std::size_t>(k)];
}

std::vector<int> LinearSvm::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != W_.rows()) throw Error(Errc::DimensionMismatch, "SVM input width");
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  Eigen::VectorXd row(X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    row = X.row(r).transpose();
    out[static_cast<std::size_t>(r)] = predict_one({row.data(), static_cast<std::size_t>(row.size())});
  }
  return out;
}

nlohmann::json LinearSvm::to_json() const {
  std::vector<double> w(static_cast<std::size_t>(W_.size()));
  // Row-major: one hyperplane per row.
  for (Eigen::Index k = 0; k < W_.cols(); ++k)
    for (Eigen::Index f = 0; f < W_.rows(); ++f) w[static_cast<std::size_t>(k * W_.rows() + f)] = W_(f, k);
  return {{"classes", classes_},
          {"input_dim", W_.rows()},
          {"weights", w},
          {"biases", std::vector<double>(b_.data(), b_.data() + b_.size())}};
}

LinearSvm LinearSvm::from_json(const nlohmann::json& j) {
  LinearSvm m;
  m.classes_ = j.at("classes").get<std::vector<int>>();
  const auto F = j.at("input_dim").get<Eigen::Index>();
  const auto w = j.at("weights").get<std::vector<double>>();
  const auto b = j.at("biases").get<std::vector<double>>();
  const auto K = static_cast<Eigen::Index>(m.classes_.size());
  if (K < 2 || static_cast<Eigen::Index>(w.size()) != F * K || static_cast<Eigen::Index>(b.size()) != K)
    throw Error(Errc::CorruptModel, "SVM dimensions");
  m.W_.resize(F, K);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index f = 0; f < F; ++f) m.W_(f, k) = w[static_cast<std::size_t>(k * F + f)];
  m.b_ = Eigen::Map<const Eigen::VectorXd>(b.data(), K);
  return m;
}

}  // namespace lfil
