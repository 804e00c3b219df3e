#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "cmr/classifiers.hpp"
#include "cmr/selection.hpp"

namespace cmr {

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  bool stratified = true;
  /// Ascending subject indices per fold.
  std::vector<std::vector<int>> folds;

  /// Every subject not in fold f, ascending.
  std::vector<int> train_indices(int f) const;
};

/// Shuffles subjects (within each class when stratified), lays them out class
/// after class and deals them round-robin, so fold sizes and per-class counts
/// differ by at most one.
FoldPlan kfold_split(int n_subjects, const std::vector<int>& labels, int k, std::uint64_t seed,
                     bool stratified = true);

struct PipelineParams {
  SelectionParams selection;
  EnsembleParams ensemble;
  /// Run the two-stage selection; otherwise every column is used.
  bool select_features = true;
  /// Select once on all subjects before splitting (reproduces the published
  /// protocol's likely ordering; leaks test subjects into selection).
  bool paper_order = false;
};

struct FoldModel {
  std::vector<int> selected;  // column indices into the full matrix
  TrainedEnsemble ensemble;
};

/// Selection (unless `fixed_columns` is given) and ensemble training on the
/// rows of `train` only. Fixed columns that are constant on `train` are dropped.
FoldModel fit_fold(const FeatureMatrix& train, const std::vector<int>& labels,
                   const std::vector<std::string>& class_names, const PipelineParams& params,
                   std::uint64_t seed, const std::vector<int>* fixed_columns = nullptr);

struct FoldResult {
  int repeat = 0;
  int fold = 0;
  int n_test = 0;
  int n_correct = 0;
  double accuracy = 0.0;
  std::vector<std::string> selected_features;
};

struct CvReport {
  int k = 0;
  int n_repeats = 0;
  std::uint64_t seed = 0;
  bool paper_order = false;
  std::vector<std::string> class_names;
  std::vector<FoldResult> folds;
  double mean = 0.0;
  /// Population standard deviation of the fold accuracies.
  double std = 0.0;
  /// Rows = true class, columns = predicted, summed over repeats.
  std::vector<std::vector<int>> confusion;
  /// Fraction of folds in which each feature was selected.
  std::vector<std::pair<std::string, double>> selection_counts;
};

/// Called after every fold with the fitted model and the held-out indices.
using FoldHook = std::function<void(int repeat, int fold, const FoldModel&, const std::vector<int>& test)>;

/// Repeated stratified k-fold CV of the full pipeline. Fold plans use
/// derive_seed(seed, repeat); fold models use derive_seed(seed, repeat, fold).
CvReport run_cv(const FeatureMatrix& data, const std::vector<int>& labels,
                const std::vector<std::string>& class_names, const PipelineParams& params, int k,
                int n_repeats, std::uint64_t seed, const FoldHook& hook = {});

struct GridPoint {
  std::string label;
  PipelineParams params;
};

struct GridRow {
  std::string label;
  double mean = 0.0;
  double std = 0.0;
};

struct GridResult {
  std::vector<GridRow> table;
  int best = -1;
};

/// Highest mean accuracy, then lowest std, then earliest point.
int pick_best(const std::vector<GridRow>& rows);

GridResult grid_search(const FeatureMatrix& data, const std::vector<int>& labels,
                       const std::vector<std::string>& class_names, const std::vector<GridPoint>& grid,
                       int k, int n_repeats, std::uint64_t seed);

nlohmann::json cv_report_json(const CvReport& report);
/// repeat,fold,n_test,n_correct,accuracy
std::string cv_folds_csv(const CvReport& report);
/// Header row of predicted class names; one row per true class.
std::string confusion_csv(const CvReport& report);
nlohmann::json grid_result_json(const GridResult& result);

}  // namespace cmr
