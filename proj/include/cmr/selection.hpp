#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cmr/features.hpp"

namespace cmr {

/// Subjects x features table with column metadata.
struct FeatureMatrix {
  Eigen::MatrixXd X;
  std::vector<std::string> feature_names;
  /// Aligned with columns; drives the two-stage split.
  std::vector<FeatureGroup> groups;
  std::vector<std::string> subject_ids;
  bool standardized = false;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }

  /// Rows in the given order; metadata is carried along.
  FeatureMatrix select_rows(const std::vector<int>& rows) const;
  /// Columns in the given order.
  FeatureMatrix select_cols(const std::vector<int>& cols) const;
};

/// Throws DataError unless X is non-empty, finite, and metadata sizes line up.
void validate_matrix(const FeatureMatrix& data);

/// Zero-mean, unit-variance columns (population std). Columns with zero
/// variance become all-zero and keep scale 1.
struct ColumnScaling {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  std::vector<bool> constant;
};

ColumnScaling fit_column_scaling(const Eigen::MatrixXd& X);
Eigen::MatrixXd apply_column_scaling(const ColumnScaling& s, const Eigen::MatrixXd& X);

// --------------------------------------------------------------------- LASSO

struct LassoOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

struct LassoModel {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double lambda = 0.0;
  int sweeps = 0;
  bool converged = false;
  /// Largest coefficient change in the final sweep.
  double final_change = 0.0;
};

/// Minimizes ||y - X beta - intercept||^2 + lambda * ||beta||_1 by cyclic
/// coordinate descent; the intercept is unpenalized. `warm_start` (length p)
/// seeds the coefficients.
LassoModel lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                     const LassoOptions& options = {},
                     const Eigen::VectorXd* warm_start = nullptr);

/// ||y - X beta - intercept||^2 + lambda * ||beta||_1.
double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double intercept, double lambda);

/// Smallest lambda with an all-zero solution: 2 max_j |x_j' (y - mean y)| over
/// centered columns.
double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// ---------------------------------------------------------- L1 logistic

struct LogisticOptions {
  double objective_tol = 1e-10;
  double gradient_tol = 1e-7;
  int max_iter = 20000;
  /// Bound on |v| for single-class problems.
  double intercept_cap = 30.0;
};

struct L1LogisticModel {
  Eigen::VectorXd w;
  double v = 0.0;
  double lambda = 0.0;
  int iterations = 0;
  bool converged = false;
  /// All labels equal: w = 0 and v saturated at the cap.
  bool degenerate = false;
};

/// (1/N) sum log(1 + exp(-b_i (w'x_i + v))) with b in {-1, +1}.
double logistic_smooth_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& w, double v);

/// Gradient of logistic_smooth_loss; the last entry is d/dv.
Eigen::VectorXd logistic_smooth_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& b,
                                         const Eigen::VectorXd& w, double v);

/// Smooth loss plus lambda * sum_j penalty_j |w_j| (penalty_j = 1 when empty).
double l1_logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& b,
                             const Eigen::VectorXd& w, double v, double lambda,
                             const Eigen::VectorXd& penalty = {});

/// Proximal gradient with backtracking; the objective never increases.
/// Optional per-column penalty weights and a starting point.
L1LogisticModel l1_logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& b, double lambda,
                                const LogisticOptions& options = {},
                                const Eigen::VectorXd& penalty = {},
                                const L1LogisticModel* warm_start = nullptr,
                                std::vector<double>* objective_trace = nullptr);

/// Smallest lambda at which w = 0 is optimal (intercept at log(N+/N-)).
double logistic_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& b);

// ---------------------------------------------------- stability selection

struct RandomizedParams {
  int n_resamples = 50;
  double subsample_fraction = 0.75;
  double weakness = 0.5;
  std::uint64_t seed = 0;
  LogisticOptions solver;
};

/// Fraction of (resample, lambda) fits in which each coefficient is non-zero
/// (|w_j| > 1e-9). Each resample draws floor(fraction * N) rows without
/// replacement and scales each column's penalty by U[weakness, 1].
std::vector<double> randomized_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& b,
                                        const std::vector<double>& lambda_grid,
                                        const RandomizedParams& params);

// --------------------------------------------------------- one-vs-rest

enum class SelectionMethod { kLasso, kL1Logistic, kRandomized };

const char* method_name(SelectionMethod method);
SelectionMethod parse_method(const std::string& name);

struct SelectionParams {
  SelectionMethod method = SelectionMethod::kLasso;
  /// Logarithmic grid over [lambda_min_ratio * lambda_max, lambda_max] per
  /// one-vs-rest problem, unless `lambda_ratios` lists explicit fractions of lambda_max.
  int n_lambdas = 20;
  double lambda_min_ratio = 1e-4;
  std::vector<double> lambda_ratios;
  RandomizedParams randomized;
  /// Solver budget for each grid fit; only the support is used here.
  LassoOptions lasso{1e-6, 2000};
  LogisticOptions logistic;
  int stage1_keep = 30;
  int stage2_keep = 20;
};

/// Fractions of lambda_max, largest first.
std::vector<double> lambda_ratio_grid(const SelectionParams& params);

/// For each class k: recode (+1 for k, -1 otherwise), fit the method along the
/// lambda grid on standardized columns and take the per-feature fraction of
/// fits selecting it. The result is the mean over the K classes.
std::vector<double> ovr_frequencies(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                    int n_classes, const SelectionParams& params);

/// Indices sorted by descending frequency, ties by ascending index; first `keep`.
std::vector<int> top_by_frequency(const std::vector<double>& frequencies, int keep);

struct StageReport {
  /// Column indices (into the full matrix) considered in this stage.
  std::vector<int> candidates;
  /// Aligned with `candidates`.
  std::vector<double> frequencies;
  /// Full-matrix column indices, descending frequency then ascending index.
  std::vector<int> selected;
};

struct SelectionReport {
  StageReport stage1;
  StageReport stage2;
  std::vector<std::string> feature_names;

  /// Final subset (stage 2 selection).
  const std::vector<int>& selected() const { return stage2.selected; }
};

/// Stage 1 ranks thickness and shape columns and keeps `stage1_keep`; stage 2
/// pools those with every volumetric column and keeps `stage2_keep`.
SelectionReport two_stage_select(const FeatureMatrix& data, const std::vector<int>& labels,
                                 int n_classes, const SelectionParams& params);

}  // namespace cmr
