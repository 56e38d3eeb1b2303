#include "lfil/preprocess.hpp"

#include "lfil/error.hpp"
#include "lfil/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace lfil {

namespace {

// Beyond this width a direct covariance eigendecomposition is too slow, and
// when rows < features the Gram matrix yields the same nonzero spectrum.
constexpr Eigen::Index kDirectCovarianceLimit = 2048;

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Eigen::MatrixXd to_matrix(const Dataset& dataset) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(dataset.rows()), static_cast<Eigen::Index>(dataset.feature_count));
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    auto row = dataset.row(r);
    for (std::size_t f = 0; f < dataset.feature_count; ++f)
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) = static_cast<double>(row[f]);
  }
  return X;
}

Eigen::MatrixXd Preprocessor::normalize(const Eigen::MatrixXd& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != input_dim())
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(input_dim()) + " columns, got " +
                                             std::to_string(rows.cols()));
  return (rows.rowwise() - offset.transpose()).array().rowwise() / scale.transpose().array();
}

Eigen::MatrixXd Preprocessor::transform(const Eigen::MatrixXd& rows) const {
  return (normalize(rows).rowwise() - center.transpose()) * components.transpose();
}

Eigen::MatrixXd Preprocessor::inverse_transform(const Eigen::MatrixXd& projected) const {
  if (projected.cols() != components.rows()) throw Error(Errc::DimensionMismatch, "projected width");
  Eigen::MatrixXd z = (projected * components).rowwise() + center.transpose();
  return (z.array().rowwise() * scale.transpose().array()).matrix().rowwise() + offset.transpose();
}

Eigen::VectorXd Preprocessor::transform_one(std::span<const double> row) const {
  if (row.size() != input_dim()) throw Error(Errc::DimensionMismatch, "row width");
  Eigen::Map<const Eigen::VectorXd> x(row.data(), static_cast<Eigen::Index>(row.size()));
  Eigen::VectorXd z = (x - offset).cwiseQuotient(scale) - center;
  return components * z;
}

nlohmann::json Preprocessor::to_json() const {
  nlohmann::json j;
  const bool z = normalization == Normalization::ZScore;
  j["normalization"] = z ? "zscore" : "minmax";
  j[z ? "means" : "mins"] = to_vector(offset);
  j[z ? "stds" : "ranges"] = to_vector(scale);
  j["center"] = to_vector(center);
  std::vector<double> data(static_cast<std::size_t>(components.size()));
  for (Eigen::Index r = 0; r < components.rows(); ++r)
    for (Eigen::Index c = 0; c < components.cols(); ++c)
      data[static_cast<std::size_t>(r * components.cols() + c)] = components(r, c);
  j["components"] = {{"rows", components.rows()}, {"cols", components.cols()}, {"data", data}};
  j["explained_variance_ratio"] = explained_variance_ratio;
  j["retained"] = components.rows();
  j["variance_to_retain"] = variance_to_retain;
  j["topology_fingerprint"] = topology_fingerprint;
  return j;
}

Preprocessor Preprocessor::from_json(const nlohmann::json& j) {
  try {
    Preprocessor p;
    const bool z = j.at("normalization").get<std::string>() == "zscore";
    p.normalization = z ? Normalization::ZScore : Normalization::MinMax;
    p.offset = from_vector(j.at(z ? "means" : "mins").get<std::vector<double>>());
    p.scale = from_vector(j.at(z ? "stds" : "ranges").get<std::vector<double>>());
    p.center = from_vector(j.at("center").get<std::vector<double>>());
    const auto& c = j.at("components");
    const auto rows = c.at("rows").get<Eigen::Index>();
    const auto cols = c.at("cols").get<Eigen::Index>();
    const auto data = c.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols || cols != p.offset.size() ||
        p.scale.size() != cols || p.center.size() != cols || j.at("retained").get<Eigen::Index>() != rows)
      throw Error(Errc::CorruptModel, "preprocessor dimensions disagree");
    p.components.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index k = 0; k < cols; ++k) p.components(r, k) = data[static_cast<std::size_t>(r * cols + k)];
    p.explained_variance_ratio = j.at("explained_variance_ratio").get<std::vector<double>>();
    p.variance_to_retain = j.at("variance_to_retain").get<double>();
    p.topology_fingerprint = j.at("topology_fingerprint").get<std::string>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptModel, std::string("preprocessor: ") + e.what());
  }
}

std::string Preprocessor::fingerprint() const { return fingerprint_hex(to_json().dump()); }

Preprocessor fit_preprocessor(const Eigen::MatrixXd& train, double variance_to_retain, Normalization normalization) {
  if (train.rows() < 1 || train.cols() < 1) throw Error(Errc::InvalidParams, "empty training matrix");
  if (!(variance_to_retain > 0.0 && variance_to_retain <= 1.0))
    throw Error(Errc::InvalidParams, "variance_to_retain must lie in (0, 1]");
  const Eigen::Index n = train.rows();
  const Eigen::Index F = train.cols();

  Preprocessor p;
  p.normalization = normalization;
  p.variance_to_retain = variance_to_retain;
  if (normalization == Normalization::ZScore) {
    p.offset = train.colwise().mean().transpose();
    p.scale.resize(F);
    for (Eigen::Index f = 0; f < F; ++f) {
      const double ss = (train.col(f).array() - p.offset(f)).square().sum();
      const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      // Zero-variance columns keep std := 1.
      p.scale(f) = sd > 1e-12 ? sd : 1.0;
    }
  } else {
    p.offset = train.colwise().minCoeff().transpose();
    p.scale = train.colwise().maxCoeff().transpose() - p.offset;
    for (Eigen::Index f = 0; f < F; ++f)
      if (!(p.scale(f) > 1e-12)) p.scale(f) = 1.0;
  }
  p.center = Eigen::VectorXd::Zero(F);
  p.components = Eigen::MatrixXd::Identity(F, F);
  Eigen::MatrixXd Z = p.normalize(train);
  if (normalization == Normalization::MinMax) {
    p.center = Z.colwise().mean().transpose();
    Z = Z.rowwise() - p.center.transpose();
  }

  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd vectors;  // columns
  if (F <= kDirectCovarianceLimit || n >= F) {
    const Eigen::MatrixXd cov = (Z.transpose() * Z) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    eigenvalues = es.eigenvalues().reverse();
    vectors = es.eigenvectors().rowwise().reverse();
  } else {
    const Eigen::MatrixXd gram = (Z * Z.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    Eigen::VectorXd lam = es.eigenvalues().reverse();
    Eigen::MatrixXd U = es.eigenvectors().rowwise().reverse();
    Eigen::Index rank = 0;
    while (rank < lam.size() && lam(rank) > 1e-12 * std::max(1.0, lam(0))) ++rank;
    eigenvalues = lam.head(rank);
    vectors.resize(F, rank);
    for (Eigen::Index i = 0; i < rank; ++i)
      vectors.col(i) = (Z.transpose() * U.col(i)).normalized();
  }
  if (vectors.cols() == 0) {
    eigenvalues = Eigen::VectorXd::Zero(1);
    vectors = Eigen::MatrixXd::Identity(F, 1);
  }
  eigenvalues = eigenvalues.cwiseMax(0.0);
  const double total = eigenvalues.sum();

  Eigen::Index keep = eigenvalues.size();
  if (total > 0.0 && variance_to_retain < 1.0) {
    double cumulative = 0.0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
      cumulative += eigenvalues(i) / total;
      if (cumulative >= variance_to_retain - 1e-12) {
        keep = i + 1;
        break;
      }
    }
  }
  keep = std::max<Eigen::Index>(keep, 1);

  p.components.resize(keep, F);
  p.explained_variance_ratio.clear();
  for (Eigen::Index i = 0; i < keep; ++i) {
    Eigen::VectorXd v = vectors.col(i);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.components.row(i) = v.transpose();
    p.explained_variance_ratio.push_back(total > 0.0 ? eigenvalues(i) / total : 0.0);
  }
  return p;
}

Preprocessor fit_preprocessor(const Dataset& train, double variance_to_retain, Normalization normalization) {
  if (train.rows() == 0) throw Error(Errc::InvalidParams, "empty training dataset");
  Preprocessor p = fit_preprocessor(to_matrix(train), variance_to_retain, normalization);
  p.topology_fingerprint = train.fingerprint;
  return p;
}

}  // namespace lfil
