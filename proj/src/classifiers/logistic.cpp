#include <ceres/ceres.h>

#include <cmath>

#include "cmr/classifiers.hpp"
#include "cmr/error.hpp"

namespace cmr {

Standardizer fit_standardizer(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
  if (X.rows() < 2) throw DataError("standardizer needs at least two rows");
  if (!X.allFinite()) throw DataError("standardizer input contains non-finite values");
  Standardizer s;
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean[j]).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])))) {
      const std::string name =
          static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)] : "column " + std::to_string(j);
      throw DataError("zero-variance feature '" + name + "' cannot be standardized");
    }
    s.scale[j] = sd;
  }
  return s;
}

Eigen::MatrixXd apply_standardizer(const Standardizer& s, const Eigen::MatrixXd& X) {
  if (X.cols() != s.mean.size()) {
    throw DataError("expected " + std::to_string(s.mean.size()) + " features, got " + std::to_string(X.cols()));
  }
  return (X.rowwise() - s.mean.transpose()).array().rowwise() / s.scale.transpose().array();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd p = scores.colwise() - scores.rowwise().maxCoeff();
  p = p.array().exp();
  return p.array().colwise() / p.rowwise().sum().array();
}

void check_class_labels(const std::vector<int>& labels, int n_classes, Eigen::Index rows) {
  if (n_classes < 2) throw UsageError("need at least two classes");
  if (static_cast<Eigen::Index>(labels.size()) != rows) throw DataError("label count does not match rows");
  std::vector<int> seen(static_cast<std::size_t>(n_classes), 0);
  for (int l : labels) {
    if (l < 0 || l >= n_classes) throw DataError("class label " + std::to_string(l) + " out of range");
    ++seen[static_cast<std::size_t>(l)];
  }
  for (int k = 0; k < n_classes; ++k) {
    if (seen[static_cast<std::size_t>(k)] == 0) throw DataError("class " + std::to_string(k) + " has no training rows");
  }
}

double lr_objective(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                    int n_classes, double l2, Eigen::VectorXd* grad) {
  const Eigen::Index n = X.rows(), d = X.cols(), K = n_classes;
  const Eigen::Map<const Eigen::MatrixXd> W(theta.data(), d, K);
  const Eigen::Map<const Eigen::VectorXd> b(theta.data() + d * K, K);
  Eigen::MatrixXd scores = X * W;
  scores.rowwise() += b.transpose();
  const Eigen::VectorXd row_max = scores.rowwise().maxCoeff();
  const Eigen::MatrixXd shifted = scores.colwise() - row_max;
  const Eigen::VectorXd log_z = shifted.array().exp().rowwise().sum().log();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) loss += log_z[i] - shifted(i, labels[static_cast<std::size_t>(i)]);
  loss = loss / static_cast<double>(n) + 0.5 * l2 * W.squaredNorm();
  if (grad) {
    Eigen::MatrixXd delta = (shifted.colwise() - log_z).array().exp();
    for (Eigen::Index i = 0; i < n; ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    delta /= static_cast<double>(n);
    grad->resize(theta.size());
    Eigen::Map<Eigen::MatrixXd>(grad->data(), d, K) = X.transpose() * delta + l2 * W;
    grad->tail(K) = delta.colwise().sum().transpose();
  }
  return loss;
}

namespace {

class LrCost final : public ceres::FirstOrderFunction {
 public:
  LrCost(const Eigen::MatrixXd& X, const std::vector<int>& labels, int k, double l2)
      : X_(X), labels_(labels), k_(k), l2_(l2) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    const Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(parameters, NumParameters());
    Eigen::VectorXd g;
    *cost = lr_objective(theta, X_, labels_, k_, l2_, gradient ? &g : nullptr);
    if (gradient) Eigen::Map<Eigen::VectorXd>(gradient, NumParameters()) = g;
    return std::isfinite(*cost);
  }
  int NumParameters() const override { return static_cast<int>((X_.cols() + 1) * k_); }

 private:
  const Eigen::MatrixXd& X_;
  const std::vector<int>& labels_;
  int k_;
  double l2_;
};

}  // namespace

LogisticClassifier train_logistic(const Eigen::MatrixXd& X, const std::vector<int>& labels, int n_classes,
                                  const LrParams& params) {
  check_class_labels(labels, n_classes, X.rows());
  if (!X.allFinite()) throw DataError("logistic regression input contains non-finite values");
  const Eigen::Index d = X.cols(), K = n_classes;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero((d + 1) * K);

  ceres::GradientProblem problem(new LrCost(X, labels, n_classes, params.l2));
  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::LBFGS;
  options.max_num_iterations = params.max_iter;
  // Ceres tests the max-norm; this bound implies the Euclidean one.
  options.gradient_tolerance = params.gradient_tol / std::sqrt(static_cast<double>(theta.size()));
  options.function_tolerance = 0.0;
  options.parameter_tolerance = 0.0;
  options.logging_type = ceres::SILENT;
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(options, problem, theta.data(), &summary);

  LogisticClassifier m;
  Eigen::VectorXd g;
  lr_objective(theta, X, labels, n_classes, params.l2, &g);
  m.W = Eigen::Map<const Eigen::MatrixXd>(theta.data(), d, K);
  m.b = theta.tail(K);
  m.iterations = static_cast<int>(summary.iterations.size());
  m.gradient_norm = g.norm();
  m.converged = m.gradient_norm < params.gradient_tol;
  return m;
}

Eigen::MatrixXd predict_proba(const LogisticClassifier& m, const Eigen::MatrixXd& X) {
  if (X.cols() != m.W.rows()) throw DataError("logistic model expects " + std::to_string(m.W.rows()) + " features");
  Eigen::MatrixXd scores = X * m.W;
  scores.rowwise() += m.b.transpose();
  return softmax_rows(scores);
}

}  // namespace cmr
