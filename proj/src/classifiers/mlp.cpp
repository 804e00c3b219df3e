#include <cmath>

#include "cmr/classifiers.hpp"
#include "cmr/error.hpp"
#include "cmr/rng.hpp"

namespace cmr {

MlpClassifier init_mlp(int d, int hidden, int n_classes, std::uint64_t seed) {
  if (d < 1 || hidden < 1 || n_classes < 2) throw UsageError("invalid MLP shape");
  Rng rng(seed);
  MlpClassifier m;
  const double s1 = std::sqrt(6.0 / (d + hidden)), s2 = std::sqrt(6.0 / (hidden + n_classes));
  m.W1.resize(d, hidden);
  for (Eigen::Index c = 0; c < m.W1.cols(); ++c)
    for (Eigen::Index r = 0; r < m.W1.rows(); ++r) m.W1(r, c) = rng.uniform(-s1, s1);
  m.W2.resize(hidden, n_classes);
  for (Eigen::Index c = 0; c < m.W2.cols(); ++c)
    for (Eigen::Index r = 0; r < m.W2.rows(); ++r) m.W2(r, c) = rng.uniform(-s2, s2);
  m.b1 = Eigen::VectorXd::Zero(hidden);
  m.b2 = Eigen::VectorXd::Zero(n_classes);
  return m;
}

std::vector<double> mlp_flatten(const MlpClassifier& m) {
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(m.W1.size() + m.b1.size() + m.W2.size() + m.b2.size()));
  t.insert(t.end(), m.W1.data(), m.W1.data() + m.W1.size());
  t.insert(t.end(), m.b1.data(), m.b1.data() + m.b1.size());
  t.insert(t.end(), m.W2.data(), m.W2.data() + m.W2.size());
  t.insert(t.end(), m.b2.data(), m.b2.data() + m.b2.size());
  return t;
}

MlpClassifier mlp_unflatten(const std::vector<double>& theta, int d, int hidden, int n_classes) {
  const std::size_t need = static_cast<std::size_t>((d + 1) * hidden + (hidden + 1) * n_classes);
  if (theta.size() != need) throw DataError("MLP parameter vector has the wrong length");
  MlpClassifier m;
  const double* p = theta.data();
  m.W1 = Eigen::Map<const Eigen::MatrixXd>(p, d, hidden);
  p += d * hidden;
  m.b1 = Eigen::Map<const Eigen::VectorXd>(p, hidden);
  p += hidden;
  m.W2 = Eigen::Map<const Eigen::MatrixXd>(p, hidden, n_classes);
  p += hidden * n_classes;
  m.b2 = Eigen::Map<const Eigen::VectorXd>(p, n_classes);
  return m;
}

namespace {

struct Forward {
  Eigen::MatrixXd hidden;  // N x H, post-activation
  Eigen::MatrixXd log_p;   // N x K
};

Forward forward(const MlpClassifier& m, const Eigen::MatrixXd& X) {
  Forward f;
  Eigen::MatrixXd a = X * m.W1;
  a.rowwise() += m.b1.transpose();
  f.hidden = a.array().tanh();
  Eigen::MatrixXd s = f.hidden * m.W2;
  s.rowwise() += m.b2.transpose();
  const Eigen::MatrixXd shifted = s.colwise() - s.rowwise().maxCoeff();
  const Eigen::VectorXd log_z = shifted.array().exp().rowwise().sum().log();
  f.log_p = shifted.colwise() - log_z;
  return f;
}

}  // namespace

double mlp_objective(const MlpClassifier& m, const Eigen::MatrixXd& X, const std::vector<int>& labels, double l2,
                     std::vector<double>* grad) {
  const Eigen::Index n = X.rows();
  const Forward f = forward(m, X);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) loss -= f.log_p(i, labels[static_cast<std::size_t>(i)]);
  loss = loss / static_cast<double>(n) + 0.5 * l2 * (m.W1.squaredNorm() + m.W2.squaredNorm());
  if (grad) {
    Eigen::MatrixXd d_out = f.log_p.array().exp();
    for (Eigen::Index i = 0; i < n; ++i) d_out(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    d_out /= static_cast<double>(n);
    MlpClassifier g;
    g.W2 = f.hidden.transpose() * d_out + l2 * m.W2;
    g.b2 = d_out.colwise().sum().transpose();
    const Eigen::MatrixXd d_hidden =
        (d_out * m.W2.transpose()).array() * (1.0 - f.hidden.array().square());
    g.W1 = X.transpose() * d_hidden + l2 * m.W1;
    g.b1 = d_hidden.colwise().sum().transpose();
    *grad = mlp_flatten(g);
  }
  return loss;
}

MlpClassifier train_mlp(const Eigen::MatrixXd& X, const std::vector<int>& labels, int n_classes,
                        const MlpParams& params) {
  check_class_labels(labels, n_classes, X.rows());
  if (!X.allFinite()) throw DataError("MLP input contains non-finite values");
  if (params.epochs < 1 || !(params.learning_rate > 0.0) || params.momentum < 0.0 || params.momentum >= 1.0) {
    throw UsageError("invalid MLP training parameters");
  }
  const int d = static_cast<int>(X.cols());
  MlpClassifier m = init_mlp(d, params.hidden, n_classes, params.seed);
  std::vector<double> theta = mlp_flatten(m), velocity(theta.size(), 0.0), grad;
  double loss = 0.0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    loss = mlp_objective(m, X, labels, params.l2, &grad);
    if (!std::isfinite(loss)) {
      throw ConvergenceError("MLP training diverged at epoch " + std::to_string(epoch));
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      velocity[i] = params.momentum * velocity[i] - params.learning_rate * grad[i];
      theta[i] += velocity[i];
    }
    m = mlp_unflatten(theta, d, params.hidden, n_classes);
  }
  m.final_loss = mlp_objective(m, X, labels, params.l2);
  if (!std::isfinite(m.final_loss)) throw ConvergenceError("MLP training diverged");
  return m;
}

Eigen::MatrixXd predict_proba(const MlpClassifier& m, const Eigen::MatrixXd& X) {
  if (X.cols() != m.W1.rows()) throw DataError("MLP expects " + std::to_string(m.W1.rows()) + " features");
  return forward(m, X).log_p.array().exp();
}

}  // namespace cmr
