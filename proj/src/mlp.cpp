#include "lfil/mlp.hpp"

#include "lfil/error.hpp"
#include "lfil/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lfil {

namespace {

void relu_inplace(Eigen::MatrixXd& Z) { Z = Z.cwiseMax(0.0); }

void softmax_rows(Eigen::MatrixXd& Z) {
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    const double m = Z.row(r).maxCoeff();
    Z.row(r) = (Z.row(r).array() - m).exp();
    Z.row(r) /= Z.row(r).sum();
  }
}

struct ValidationSplit {
  std::vector<Eigen::Index> train, validation;
};

ValidationSplit split_rows(Eigen::Index n, double fraction, std::uint64_t seed) {
  ValidationSplit s;
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Eigen::Index n_val = 0;
  if (fraction > 0.0 && n >= 10) {
    Rng rng(derive_seed(seed, 0x7a1));
    std::shuffle(perm.begin(), perm.end(), rng);
    n_val = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * fraction)));
  }
  s.validation.assign(perm.begin(), perm.begin() + n_val);
  s.train.assign(perm.begin() + n_val, perm.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

double pooled_r2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& actual) {
  const double mean = actual.mean();
  const double ss_tot = (actual.array() - mean).square().sum();
  const double ss_res = (pred - actual).squaredNorm();
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
}

double accuracy(const Eigen::MatrixXd& proba, const Eigen::MatrixXd& onehot) {
  if (proba.rows() == 0) return 0.0;
  Eigen::Index hits = 0;
  for (Eigen::Index r = 0; r < proba.rows(); ++r) {
    Eigen::Index a = 0, b = 0;
    proba.row(r).maxCoeff(&a);
    onehot.row(r).maxCoeff(&b);
    hits += a == b;
  }
  return static_cast<double>(hits) / static_cast<double>(proba.rows());
}

std::vector<double> flatten(const Eigen::MatrixXd& M) {
  std::vector<double> out(static_cast<std::size_t>(M.size()));
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) out[static_cast<std::size_t>(r * M.cols() + c)] = M(r, c);
  return out;
}

Eigen::MatrixXd unflatten(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw Error(Errc::CorruptModel, "matrix size");
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  return M;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, OutputHead head, std::uint64_t seed) : sizes_(std::move(layer_sizes)), head_(head) {
  if (sizes_.size() < 2) throw Error(Errc::InvalidParams, "MLP needs input and output sizes");
  for (int s : sizes_)
    if (s < 1) throw Error(Errc::InvalidParams, "layer sizes must be positive");
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / sizes_[l]));
    Eigen::MatrixXd W(sizes_[l], sizes_[l + 1]);
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = init(rng);
    W_.push_back(std::move(W));
    b_.push_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& X) const {
  if (X.cols() != sizes_.front()) throw Error(Errc::DimensionMismatch, "MLP input width");
  Eigen::MatrixXd A = X;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    Eigen::MatrixXd Z = A * W_[l];
    Z.rowwise() += b_[l].transpose();
    if (l + 1 < W_.size()) relu_inplace(Z);
    A = std::move(Z);
  }
  if (head_ == OutputHead::Softmax) softmax_rows(A);
  return A;
}

Eigen::VectorXd Mlp::forward_one(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(sizes_.front())) throw Error(Errc::DimensionMismatch, "MLP input width");
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < W_.size(); ++l) {
    Eigen::VectorXd z = W_[l].transpose() * a + b_[l];
    if (l + 1 < W_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  if (head_ == OutputHead::Softmax) {
    a = (a.array() - a.maxCoeff()).exp();
    a /= a.sum();
  }
  return a;
}

namespace {

// Data term of the loss from output-layer pre-activations; fills the
// gradient with respect to them when `delta` is given.
double data_loss(OutputHead head, const Eigen::MatrixXd& out, const Eigen::MatrixXd& targets,
                 Eigen::MatrixXd* delta) {
  const auto n = static_cast<double>(out.rows());
  if (head == OutputHead::Softmax) {
    Eigen::MatrixXd logp = out;
    for (Eigen::Index r = 0; r < logp.rows(); ++r) {
      const double m = logp.row(r).maxCoeff();
      const double lse = m + std::log((logp.row(r).array() - m).exp().sum());
      logp.row(r).array() -= lse;
    }
    if (delta) *delta = (logp.array().exp().matrix() - targets) / n;
    return -(targets.array() * logp.array()).sum() / n;
  }
  const double m = n * static_cast<double>(out.cols());
  const Eigen::MatrixXd diff = out - targets;
  if (delta) *delta = diff / m;
  return 0.5 * diff.squaredNorm() / m;
}

}  // namespace

double Mlp::loss(const Eigen::MatrixXd& X, const Eigen::MatrixXd& targets, double l2) const {
  if (X.cols() != sizes_.front() || targets.cols() != sizes_.back() || X.rows() != targets.rows())
    throw Error(Errc::DimensionMismatch, "MLP batch shape");
  Eigen::MatrixXd A = X;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    Eigen::MatrixXd Z = A * W_[l];
    Z.rowwise() += b_[l].transpose();
    if (l + 1 < W_.size()) relu_inplace(Z);
    A = std::move(Z);
  }
  double reg = 0.0;
  for (const auto& W : W_) reg += W.squaredNorm();
  return data_loss(head_, A, targets, nullptr) + 0.5 * l2 * reg;
}

double Mlp::loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& targets, double l2,
                              MlpGradients& grads) const {
  if (X.cols() != sizes_.front() || targets.cols() != sizes_.back() || X.rows() != targets.rows())
    throw Error(Errc::DimensionMismatch, "MLP batch shape");
  const std::size_t L = W_.size();
  std::vector<Eigen::MatrixXd> inputs(L);  // activation entering layer l
  std::vector<Eigen::MatrixXd> pre(L);     // pre-activation of layer l
  Eigen::MatrixXd A = X;
  for (std::size_t l = 0; l < L; ++l) {
    inputs[l] = A;
    Eigen::MatrixXd Z = A * W_[l];
    Z.rowwise() += b_[l].transpose();
    pre[l] = Z;
    if (l + 1 < L) relu_inplace(Z);
    A = std::move(Z);
  }

  Eigen::MatrixXd delta;
  double reg = 0.0;
  for (const auto& W : W_) reg += W.squaredNorm();
  const double total = data_loss(head_, A, targets, &delta) + 0.5 * l2 * reg;

  grads.weights.resize(L);
  grads.biases.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    grads.weights[l] = inputs[l].transpose() * delta + l2 * W_[l];
    grads.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd back = delta * W_[l].transpose();
      delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return total;
}

bool Mlp::all_finite() const {
  for (const auto& W : W_)
    if (!W.allFinite()) return false;
  for (const auto& b : b_)
    if (!b.allFinite()) return false;
  return true;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json weights = nlohmann::json::array(), biases = nlohmann::json::array();
  for (const auto& W : W_) weights.push_back(flatten(W));
  for (const auto& b : b_) biases.push_back(to_std(b));
  return {{"sizes", sizes_},
          {"head", head_ == OutputHead::Softmax ? "softmax" : "linear"},
          {"activation", "relu"},
          {"weights", weights},
          {"biases", biases}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp net;
  net.sizes_ = j.at("sizes").get<std::vector<int>>();
  const std::string head = j.at("head").get<std::string>();
  if (head != "softmax" && head != "linear") throw Error(Errc::CorruptModel, "unknown MLP head");
  net.head_ = head == "softmax" ? OutputHead::Softmax : OutputHead::Linear;
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  if (net.sizes_.size() < 2 || weights.size() + 1 != net.sizes_.size() || biases.size() != weights.size())
    throw Error(Errc::CorruptModel, "MLP layer count");
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
    net.W_.push_back(unflatten(weights[l].get<std::vector<double>>(), net.sizes_[l], net.sizes_[l + 1]));
    auto b = biases[l].get<std::vector<double>>();
    if (static_cast<int>(b.size()) != net.sizes_[l + 1]) throw Error(Errc::CorruptModel, "MLP bias size");
    net.b_.push_back(to_eigen(b));
  }
  if (!net.all_finite()) throw Error(Errc::CorruptModel, "non-finite MLP weights");
  return net;
}

void train_mlp(Mlp& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& targets, const MlpConfig& config,
               std::vector<CurvePoint>* curve) {
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0))
    throw Error(Errc::InvalidParams, "MLP training config must be positive");
  const ValidationSplit split = split_rows(X.rows(), config.validation_fraction, config.seed);
  const Eigen::MatrixXd Xt = X(split.train, Eigen::all), Tt = targets(split.train, Eigen::all);
  const Eigen::MatrixXd Xv = X(split.validation, Eigen::all), Tv = targets(split.validation, Eigen::all);
  const bool has_val = Xv.rows() > 0;

  std::vector<Eigen::MatrixXd> vW;
  std::vector<Eigen::VectorXd> vb;
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    vW.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
    vb.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
  }

  Mlp best = net;
  double best_loss = std::numeric_limits<double>::infinity();
  int waited = 0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(Xt.rows()));
  std::iota(order.begin(), order.end(), 0);
  MlpGradients g;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, 0xe90c, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    Eigen::Index seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<Eigen::Index> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                      order.begin() + static_cast<std::ptrdiff_t>(end));
      const double l = net.loss_and_gradient(Xt(batch, Eigen::all), Tt(batch, Eigen::all), config.l2, g);
      epoch_loss += l * static_cast<double>(batch.size());
      seen += static_cast<Eigen::Index>(batch.size());
      for (std::size_t k = 0; k < vW.size(); ++k) {
        vW[k] = config.momentum * vW[k] - config.learning_rate * g.weights[k];
        vb[k] = config.momentum * vb[k] - config.learning_rate * g.biases[k];
        net.weights()[k] += vW[k];
        net.biases()[k] += vb[k];
      }
    }
    epoch_loss /= static_cast<double>(std::max<Eigen::Index>(seen, 1));
    if (!std::isfinite(epoch_loss) || !net.all_finite())
      throw Error(Errc::Diverged, "loss became non-finite at epoch " + std::to_string(epoch));

    const double monitored = has_val ? net.loss(Xv, Tv, 0.0) : epoch_loss;
    if (curve) {
      const Eigen::MatrixXd& Xm = has_val ? Xv : Xt;
      const Eigen::MatrixXd& Tm = has_val ? Tv : Tt;
      const Eigen::MatrixXd out = net.forward(Xm);
      const double metric = net.head() == OutputHead::Softmax ? accuracy(out, Tm) : pooled_r2(out, Tm);
      curve->push_back({epoch, epoch_loss, metric});
    }
    if (monitored < best_loss - 1e-12) {
      best_loss = monitored;
      best = net;
      waited = 0;
    } else if (config.patience > 0 && ++waited >= config.patience) {
      break;
    }
  }
  net = std::move(best);
}

MlpClassifier MlpClassifier::fit(const Eigen::MatrixXd& X, std::span<const int> labels, const MlpConfig& config,
                                 std::vector<CurvePoint>* curve) {
  if (static_cast<std::size_t>(X.rows()) != labels.size()) throw Error(Errc::DimensionMismatch, "rows vs labels");
  MlpClassifier m;
  m.classes_.assign(labels.begin(), labels.end());
  std::sort(m.classes_.begin(), m.classes_.end());
  m.classes_.erase(std::unique(m.classes_.begin(), m.classes_.end()), m.classes_.end());
  if (m.classes_.size() < 2) throw Error(Errc::SingleClass, "MLP classifier needs at least two classes");
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(X.rows(), static_cast<Eigen::Index>(m.classes_.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto k = std::lower_bound(m.classes_.begin(), m.classes_.end(), labels[i]) - m.classes_.begin();
    T(static_cast<Eigen::Index>(i), k) = 1.0;
  }
  std::vector<int> sizes{static_cast<int>(X.cols())};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(static_cast<int>(m.classes_.size()));
  m.net_ = Mlp(sizes, OutputHead::Softmax, config.seed);
  train_mlp(m.net_, X, T, config, curve);
  return m;
}

int MlpClassifier::predict_one(std::span<const double> row) const {
  const Eigen::VectorXd p = net_.forward_one(row);
  Eigen::Index k = 0;
  p.maxCoeff(&k);  // first maximum, i.e. lowest class id on ties
  return classes_[static_cast<std::size_t>(k)];
}

std::vector<int> MlpClassifier::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != input_dim()) throw Error(Errc::DimensionMismatch, "MLP input width");
  // Row-at-a-time so batch and single-row results agree bit for bit.
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  Eigen::VectorXd row(X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    row = X.row(r).transpose();
    out[static_cast<std::size_t>(r)] = predict_one({row.data(), static_cast<std::size_t>(row.size())});
  }
  return out;
}

nlohmann::json MlpClassifier::to_json() const { return {{"classes", classes_}, {"network", net_.to_json()}}; }

MlpClassifier MlpClassifier::from_json(const nlohmann::json& j) {
  MlpClassifier m;
  m.classes_ = j.at("classes").get<std::vector<int>>();
  m.net_ = Mlp::from_json(j.at("network"));
  if (m.net_.head() != OutputHead::Softmax || static_cast<int>(m.classes_.size()) != m.net_.layer_sizes().back())
    throw Error(Errc::CorruptModel, "MLP classifier head");
  return m;
}

MlpRegressor MlpRegressor::fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const MlpConfig& config,
                               std::vector<CurvePoint>* curve) {
  if (X.rows() != Y.rows()) throw Error(Errc::DimensionMismatch, "rows vs targets");
  if (X.rows() < 2) throw Error(Errc::InvalidParams, "regressor needs at least two rows");
  if (!Y.allFinite()) throw Error(Errc::InvalidParams, "targets must be finite");
  if ((Y.array() - Y.mean()).square().sum() == 0.0) throw Error(Errc::ConstantTarget, "targets are constant");

  MlpRegressor m;
  auto standardize = [](const Eigen::MatrixXd& M, Eigen::VectorXd& mean, Eigen::VectorXd& scale) {
    mean = M.colwise().mean().transpose();
    scale.resize(M.cols());
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      const double sd = std::sqrt((M.col(c).array() - mean(c)).square().sum() / static_cast<double>(M.rows()));
      scale(c) = sd > 1e-12 ? sd : 1.0;
    }
    return Eigen::MatrixXd((M.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array());
  };
  const Eigen::MatrixXd Xs = standardize(X, m.x_mean_, m.x_scale_);
  const Eigen::MatrixXd Ys = standardize(Y, m.y_mean_, m.y_scale_);

  std::vector<int> sizes{static_cast<int>(X.cols())};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(static_cast<int>(Y.cols()));
  m.net_ = Mlp(sizes, OutputHead::Linear, config.seed);
  train_mlp(m.net_, Xs, Ys, config, curve);

  const ValidationSplit split = split_rows(X.rows(), config.validation_fraction, config.seed);
  const Eigen::MatrixXd pred = m.predict(X);
  m.train_r2_ = pooled_r2(pred(split.train, Eigen::all), Y(split.train, Eigen::all));
  m.validation_r2_ = split.validation.empty()
                         ? m.train_r2_
                         : pooled_r2(pred(split.validation, Eigen::all), Y(split.validation, Eigen::all));
  return m;
}

Eigen::MatrixXd MlpRegressor::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != input_dim()) throw Error(Errc::DimensionMismatch, "regressor input width");
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(output_dim()));
  Eigen::VectorXd row(X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    row = X.row(r).transpose();
    out.row(r) = predict_one({row.data(), static_cast<std::size_t>(row.size())}).transpose();
  }
  return out;
}

Eigen::VectorXd MlpRegressor::predict_one(std::span<const double> x) const {
  if (x.size() != input_dim()) throw Error(Errc::DimensionMismatch, "regressor input width");
  Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd xs = (v - x_mean_).cwiseQuotient(x_scale_);
  const Eigen::VectorXd out = net_.forward_one({xs.data(), static_cast<std::size_t>(xs.size())});
  return out.cwiseProduct(y_scale_) + y_mean_;
}

nlohmann::json MlpRegressor::to_json() const {
  return {{"network", net_.to_json()},
          {"x_mean", to_std(x_mean_)},
          {"x_scale", to_std(x_scale_)},
          {"y_mean", to_std(y_mean_)},
          {"y_scale", to_std(y_scale_)},
          {"train_r2", train_r2_},
          {"validation_r2", validation_r2_}};
}

MlpRegressor MlpRegressor::from_json(const nlohmann::json& j) {
  MlpRegressor m;
  m.net_ = Mlp::from_json(j.at("network"));
  m.x_mean_ = to_eigen(j.at("x_mean").get<std::vector<double>>());
  m.x_scale_ = to_eigen(j.at("x_scale").get<std::vector<double>>());
  m.y_mean_ = to_eigen(j.at("y_mean").get<std::vector<double>>());
  m.y_scale_ = to_eigen(j.at("y_scale").get<std::vector<double>>());
  m.train_r2_ = j.at("train_r2").get<double>();
  m.validation_r2_ = j.at("validation_r2").get<double>();
  const auto& sizes = m.net_.layer_sizes();
  if (m.net_.head() != OutputHead::Linear || m.x_mean_.size() != sizes.front() || m.x_scale_.size() != sizes.front() ||
      m.y_mean_.size() != sizes.back() || m.y_scale_.size() != sizes.back())
    throw Error(Errc::CorruptModel, "regressor dimensions");
  return m;
}

}  // namespace lfil
