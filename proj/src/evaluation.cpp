#include "cmr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cmr/error.hpp"
#include "cmr/io.hpp"
#include "cmr/rng.hpp"

namespace cmr {

using nlohmann::json;

std::vector<int> FoldPlan::train_indices(int f) const {
  std::vector<int> out;
  for (int g = 0; g < k; ++g) {
    if (g == f) continue;
    out.insert(out.end(), folds[static_cast<std::size_t>(g)].begin(), folds[static_cast<std::size_t>(g)].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan kfold_split(int n_subjects, const std::vector<int>& labels, int k, std::uint64_t seed, bool stratified) {
  if (k < 2) throw UsageError("k must be at least 2");
  if (k > n_subjects) {
    throw DataError("cannot split " + std::to_string(n_subjects) + " subjects into " + std::to_string(k) + " folds");
  }
  if (stratified && static_cast<int>(labels.size()) != n_subjects) {
    throw DataError("stratified split needs one label per subject");
  }
  Rng rng(seed);
  std::vector<int> order;
  if (stratified) {
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < n_subjects; ++i) by_class[labels[static_cast<std::size_t>(i)]].push_back(i);
    for (auto& [cls, members] : by_class) {
      rng.shuffle(members);
      order.insert(order.end(), members.begin(), members.end());
    }
  } else {
    order.resize(static_cast<std::size_t>(n_subjects));
    for (int i = 0; i < n_subjects; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.stratified = stratified;
  plan.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < order.size(); ++i) plan.folds[i % static_cast<std::size_t>(k)].push_back(order[i]);
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

FoldModel fit_fold(const FeatureMatrix& train, const std::vector<int>& labels,
                   const std::vector<std::string>& class_names, const PipelineParams& params, std::uint64_t seed,
                   const std::vector<int>* fixed_columns) {
  FoldModel out;
  const int K = static_cast<int>(class_names.size());
  if (fixed_columns) {
    // Columns chosen on all subjects can be constant on a small training fold.
    for (int c : *fixed_columns) {
      if (train.X.col(c).maxCoeff() > train.X.col(c).minCoeff()) out.selected.push_back(c);
    }
    if (out.selected.empty()) throw DataError("every preselected feature is constant on the training rows");
  } else if (params.select_features) {
    SelectionParams sp = params.selection;
    sp.randomized.seed = derive_seed(seed, 1);
    out.selected = two_stage_select(train, labels, K, sp).selected();
  } else {
    out.selected.resize(static_cast<std::size_t>(train.cols()));
    for (int j = 0; j < train.cols(); ++j) out.selected[static_cast<std::size_t>(j)] = j;
  }
  const FeatureMatrix sub = train.select_cols(out.selected);
  EnsembleParams ep = params.ensemble;
  ep.mlp.seed = derive_seed(seed, 2);
  out.ensemble = train_ensemble(sub.X, labels, sub.feature_names, class_names, ep);
  return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

CvReport run_cv(const FeatureMatrix& data, const std::vector<int>& labels,
                const std::vector<std::string>& class_names, const PipelineParams& params, int k, int n_repeats,
                std::uint64_t seed, const FoldHook& hook) {
  validate_matrix(data);
  const int K = static_cast<int>(class_names.size());
  check_class_labels(labels, K, data.rows());
  if (n_repeats < 1) throw UsageError("n_repeats must be at least 1");

  CvReport report;
  report.k = k;
  report.n_repeats = n_repeats;
  report.seed = seed;
  report.paper_order = params.paper_order;
  report.class_names = class_names;
  report.confusion.assign(static_cast<std::size_t>(K), std::vector<int>(static_cast<std::size_t>(K), 0));

  std::vector<int> global_selection;
  if (params.paper_order && params.select_features) {
    SelectionParams sp = params.selection;
    sp.randomized.seed = derive_seed(seed, 0x5e1ec7);
    global_selection = two_stage_select(data, labels, K, sp).selected();
  }

  std::map<std::string, int> chosen;
  std::vector<double> accuracies;
  for (int r = 0; r < n_repeats; ++r) {
    const FoldPlan plan = kfold_split(static_cast<int>(data.rows()), labels, k, derive_seed(seed, static_cast<std::uint64_t>(r)));
    for (int f = 0; f < k; ++f) {
      const auto& test = plan.folds[static_cast<std::size_t>(f)];
      const auto train = plan.train_indices(f);
      std::vector<int> train_labels;
      for (int i : train) train_labels.push_back(labels[static_cast<std::size_t>(i)]);

      FoldModel model;
      try {
        model = fit_fold(data.select_rows(train), train_labels, class_names, params,
                         derive_seed(seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(f)),
                         global_selection.empty() ? nullptr : &global_selection);
      } catch (const DataError& e) {
        throw DataError("repeat " + std::to_string(r) + ", fold " + std::to_string(f) + ": " + e.what());
      } catch (const ConvergenceError& e) {
        throw ConvergenceError("repeat " + std::to_string(r) + ", fold " + std::to_string(f) + ": " + e.what());
      }

      const FeatureMatrix test_data = data.select_rows(test).select_cols(model.selected);
      const auto pred = predict(model.ensemble, test_data.X);
      FoldResult res;
      res.repeat = r;
      res.fold = f;
      res.n_test = static_cast<int>(test.size());
      for (std::size_t i = 0; i < test.size(); ++i) {
        const int truth = labels[static_cast<std::size_t>(test[i])];
        res.n_correct += pred.labels[i] == truth;
        ++report.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred.labels[i])];
      }
      res.accuracy = static_cast<double>(res.n_correct) / res.n_test;
      res.selected_features = model.ensemble.feature_names;
      for (const auto& name : res.selected_features) ++chosen[name];
      accuracies.push_back(res.accuracy);
      report.folds.push_back(std::move(res));
      if (hook) hook(r, f, model, test);
    }
  }
  report.mean = mean_of(accuracies);
  report.std = pop_std(accuracies);
  for (const auto& [name, count] : chosen) {
    report.selection_counts.emplace_back(name, static_cast<double>(count) / static_cast<double>(accuracies.size()));
  }
  std::stable_sort(report.selection_counts.begin(), report.selection_counts.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return report;
}

int pick_best(const std::vector<GridRow>& rows) {
  if (rows.empty()) throw UsageError("grid search needs at least one grid point");
  int best = 0;
  for (int i = 1; i < static_cast<int>(rows.size()); ++i) {
    const auto& a = rows[static_cast<std::size_t>(i)];
    const auto& b = rows[static_cast<std::size_t>(best)];
    if (a.mean > b.mean || (a.mean == b.mean && a.std < b.std)) best = i;
  }
  return best;
}

GridResult grid_search(const FeatureMatrix& data, const std::vector<int>& labels,
                       const std::vector<std::string>& class_names, const std::vector<GridPoint>& grid, int k,
                       int n_repeats, std::uint64_t seed) {
  if (grid.empty()) throw UsageError("grid search needs at least one grid point");
  GridResult out;
  for (const auto& point : grid) {
    // Same root seed for every point, so all points see the same folds.
    const auto rep = run_cv(data, labels, class_names, point.params, k, n_repeats, seed);
    out.table.push_back({point.label, rep.mean, rep.std});
  }
  out.best = pick_best(out.table);
  return out;
}

json cv_report_json(const CvReport& report) {
  json folds = json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"repeat", f.repeat},
                     {"fold", f.fold},
                     {"n_test", f.n_test},
                     {"n_correct", f.n_correct},
                     {"accuracy", f.accuracy},
                     {"selected_features", f.selected_features}});
  }
  json counts = json::array();
  for (const auto& [name, frac] : report.selection_counts) counts.push_back({{"feature", name}, {"fraction", frac}});
  return json{{"k", report.k},
              {"n_repeats", report.n_repeats},
              {"seed", report.seed},
              {"selection_order", report.paper_order ? "non-nested selection" : "nested selection"},
              {"class_names", report.class_names},
              {"mean_accuracy", report.mean},
              {"std_accuracy", report.std},
              {"confusion", report.confusion},
              {"feature_selection_frequency", counts},
              {"folds", folds}};
}

std::string cv_folds_csv(const CvReport& report) {
  io::CsvTable t;
  t.header = {"repeat", "fold", "n_test", "n_correct", "accuracy"};
  for (const auto& f : report.folds) {
    t.rows.push_back({std::to_string(f.repeat), std::to_string(f.fold), std::to_string(f.n_test),
                      std::to_string(f.n_correct), io::format_double(f.accuracy)});
  }
  return io::to_csv(t);
}

std::string confusion_csv(const CvReport& report) {
  io::CsvTable t;
  t.header.push_back("true\\predicted");
  t.header.insert(t.header.end(), report.class_names.begin(), report.class_names.end());
  for (std::size_t i = 0; i < report.confusion.size(); ++i) {
    std::vector<std::string> row = {report.class_names[i]};
    for (int c : report.confusion[i]) row.push_back(std::to_string(c));
    t.rows.push_back(std::move(row));
  }
  return io::to_csv(t);
}

json grid_result_json(const GridResult& result) {
  json rows = json::array();
  for (const auto& r : result.table) rows.push_back({{"label", r.label}, {"mean_accuracy", r.mean}, {"std_accuracy", r.std}});
  return json{{"best", result.best}, {"best_label", result.table.at(static_cast<std::size_t>(result.best)).label}, {"table", rows}};
}

}  // namespace cmr
