#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace cmr {

/// Per-column mean and population std learned on training rows.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
};

/// Throws DataError naming the first zero-variance column (names optional).
Standardizer fit_standardizer(const Eigen::MatrixXd& X, const std::vector<std::string>& names = {});
Eigen::MatrixXd apply_standardizer(const Standardizer& s, const Eigen::MatrixXd& X);

/// Row-wise numerically stable softmax.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores);

/// Checks labels are in [0, K) and every class has a member.
void check_class_labels(const std::vector<int>& labels, int n_classes, Eigen::Index rows);

// ------------------------------------------------------------- logistic

struct LrParams {
  double l2 = 1e-4;
  double gradient_tol = 1e-6;
  int max_iter = 5000;
};

struct LogisticClassifier {
  Eigen::MatrixXd W;  // d x K
  Eigen::VectorXd b;  // K
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

/// Mean multinomial cross-entropy plus (l2/2)||W||^2. theta packs W
/// column-major followed by b; `grad` (optional) receives the gradient.
double lr_objective(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X,
                    const std::vector<int>& labels, int n_classes, double l2,
                    Eigen::VectorXd* grad = nullptr);

/// Quasi-Newton fit to gradient norm < gradient_tol; `converged` is false when
/// the iteration budget runs out first.
LogisticClassifier train_logistic(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                  int n_classes, const LrParams& params = {});
Eigen::MatrixXd predict_proba(const LogisticClassifier& m, const Eigen::MatrixXd& X);

// ------------------------------------------------------------------ MLP

struct MlpParams {
  int hidden = 10;
  int epochs = 2000;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

struct MlpClassifier {
  Eigen::MatrixXd W1;  // d x H
  Eigen::VectorXd b1;  // H
  Eigen::MatrixXd W2;  // H x K
  Eigen::VectorXd b2;  // K
  double final_loss = 0.0;
};

/// Glorot-uniform weights, zero biases.
MlpClassifier init_mlp(int d, int hidden, int n_classes, std::uint64_t seed);

std::vector<double> mlp_flatten(const MlpClassifier& m);
MlpClassifier mlp_unflatten(const std::vector<double>& theta, int d, int hidden, int n_classes);

/// Mean cross-entropy plus (l2/2)(||W1||^2 + ||W2||^2); backprop gradient in
/// the mlp_flatten layout.
double mlp_objective(const MlpClassifier& m, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                     double l2, std::vector<double>* grad = nullptr);

/// Full-batch gradient descent with momentum. Throws ConvergenceError if the
/// loss becomes non-finite.
MlpClassifier train_mlp(const Eigen::MatrixXd& X, const std::vector<int>& labels, int n_classes,
                        const MlpParams& params = {});
Eigen::MatrixXd predict_proba(const MlpClassifier& m, const Eigen::MatrixXd& X);

// --------------------------------------------------------------- Nu-SVC

struct SvmParams {
  double nu = 0.25;
  /// <= 0 selects 1 / d.
  double gamma = 0.0;
  double coef0 = 0.0;
  double eps = 1e-3;
};

/// One binary nu-SVC (+1 vs -1) with sigmoid kernel tanh(gamma <x, x'> + coef0).
struct BinarySvm {
  /// Training rows with non-zero dual.
  Eigen::MatrixXd support;
  /// Signed decision weights y_i alpha_i / r.
  Eigen::VectorXd coef;
  double rho = 0.0;
  /// Duals in the 0 <= alpha <= 1/N, sum alpha y = 0, sum alpha >= nu form,
  /// one per training row.
  Eigen::VectorXd alpha;
  /// Largest in-class gradient gap at termination.
  double kkt_gap = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Platt parameters: P(+1 | f) = 1 / (1 + exp(a f + b)).
  double platt_a = 0.0;
  double platt_b = 0.0;
};

struct NuSvmClassifier {
  double gamma = 0.0;
  double coef0 = 0.0;
  double nu = 0.0;
  /// One-vs-rest, one per class.
  std::vector<BinarySvm> machines;
};

double sigmoid_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma, double coef0);

/// nu must lie in (0, 2 min(N+, N-) / N]; otherwise DataError.
BinarySvm train_binary_nusvm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double nu,
                             double gamma, double coef0, double eps = 1e-3);
Eigen::VectorXd decision_values(const BinarySvm& m, const Eigen::MatrixXd& X, double gamma, double coef0);

/// Newton fit of (a, b) on decision values with smoothed targets.
std::pair<double, double> platt_fit(const Eigen::VectorXd& f, const Eigen::VectorXd& y);
double platt_probability(double f, double a, double b);

NuSvmClassifier train_nusvm(const Eigen::MatrixXd& X, const std::vector<int>& labels, int n_classes,
                            const SvmParams& params = {});
/// Per-class Platt probabilities renormalized to sum to one.
Eigen::MatrixXd predict_proba(const NuSvmClassifier& m, const Eigen::MatrixXd& X);

// ------------------------------------------------------------- ensemble

struct VoteResult {
  int label = 0;
  Eigen::VectorXd combined;
};

/// Weighted mean of distributions; argmax ties go to the lowest index.
VoteResult ensemble_vote(const std::vector<Eigen::VectorXd>& distributions,
                         const std::vector<double>& weights);

struct EnsembleParams {
  LrParams lr;
  MlpParams mlp;
  SvmParams svm;
  /// LR, MLP, SVM.
  std::vector<double> weights = {1.0, 1.0, 2.0};
};

struct TrainedEnsemble {
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  Standardizer standardizer;
  LogisticClassifier lr;
  MlpClassifier mlp;
  NuSvmClassifier svm;
  std::vector<double> weights;
  std::uint64_t seed = 0;

  int n_classes() const { return static_cast<int>(class_names.size()); }
};

/// Standardizes X, then trains the three members on identical columns.
TrainedEnsemble train_ensemble(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                               const std::vector<std::string>& feature_names,
                               const std::vector<std::string>& class_names, const EnsembleParams& params);

struct EnsemblePrediction {
  std::vector<int> labels;
  Eigen::MatrixXd combined;
  Eigen::MatrixXd lr, mlp, svm;
};

/// X holds raw (unstandardized) rows in feature_names order.
EnsemblePrediction predict(const TrainedEnsemble& model, const Eigen::MatrixXd& X);

nlohmann::json ensemble_to_json(const TrainedEnsemble& model);
TrainedEnsemble ensemble_from_json(const nlohmann::json& j);

}  // namespace cmr
