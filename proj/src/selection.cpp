#include "cmr/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmr/error.hpp"
#include "cmr/rng.hpp"

namespace cmr {

FeatureMatrix FeatureMatrix::select_rows(const std::vector<int>& rows) const {
  FeatureMatrix out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.X.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  out.feature_names = feature_names;
  out.groups = groups;
  if (!subject_ids.empty()) {
    for (int r : rows) out.subject_ids.push_back(subject_ids[r]);
  }
  out.standardized = false;
  return out;
}

FeatureMatrix FeatureMatrix::select_cols(const std::vector<int>& cols) const {
  FeatureMatrix out;
  out.X.resize(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.X.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
    if (!feature_names.empty()) out.feature_names.push_back(feature_names[cols[j]]);
    if (!groups.empty()) out.groups.push_back(groups[cols[j]]);
  }
  out.subject_ids = subject_ids;
  out.standardized = standardized;
  return out;
}

void validate_matrix(const FeatureMatrix& data) {
  if (data.rows() < 2) throw DataError("feature matrix needs at least two subjects");
  if (data.cols() < 1) throw DataError("feature matrix has no features");
  if (!data.X.allFinite()) throw DataError("feature matrix contains non-finite values");
  const auto p = static_cast<std::size_t>(data.cols());
  if ((!data.feature_names.empty() && data.feature_names.size() != p) ||
      (!data.groups.empty() && data.groups.size() != p)) {
    throw DataError("feature metadata does not match the column count");
  }
  if (!data.subject_ids.empty() && data.subject_ids.size() != static_cast<std::size_t>(data.rows())) {
    throw DataError("subject ids do not match the row count");
  }
}

ColumnScaling fit_column_scaling(const Eigen::MatrixXd& X) {
  ColumnScaling s;
  const auto n = static_cast<double>(X.rows());
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  s.constant.assign(static_cast<std::size_t>(X.cols()), false);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean[j]).square().sum() / n;
    const double sd = std::sqrt(var);
    // Relative threshold: a column of identical values can leave round-off.
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])))) {
      s.scale[j] = 1.0;
      s.constant[static_cast<std::size_t>(j)] = true;
    } else {
      s.scale[j] = sd;
    }
  }
  return s;
}

Eigen::MatrixXd apply_column_scaling(const ColumnScaling& s, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out = (X.rowwise() - s.mean.transpose()).array().rowwise() /
                        s.scale.transpose().array();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (s.constant[static_cast<std::size_t>(j)]) out.col(j).setZero();
  }
  return out;
}

// ---------------------------------------------------------------------- LASSO

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

void require_finite(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw DataError("X and y row counts differ");
  if (X.rows() < 2) throw DataError("need at least two observations");
  if (!X.allFinite() || !y.allFinite()) throw DataError("non-finite input");
}

}  // namespace

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta, double intercept, double lambda) {
  const Eigen::VectorXd r = y - X * beta - Eigen::VectorXd::Constant(y.size(), intercept);
  return r.squaredNorm() + lambda * beta.lpNorm<1>();
}

double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  return 2.0 * (Xc.transpose() * yc).cwiseAbs().maxCoeff();
}

LassoModel lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                     const LassoOptions& options, const Eigen::VectorXd* warm_start) {
  require_finite(X, y);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lasso lambda must be >= 0");
  const Eigen::Index n = X.rows(), p = X.cols();

  // Centering absorbs the unpenalized intercept.
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  const Eigen::VectorXd col_sq = Xc.colwise().squaredNorm().transpose();

  LassoModel m;
  m.lambda = lambda;
  m.beta = warm_start ? *warm_start : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = yc - Xc * m.beta;
  const double half_lambda = 0.5 * lambda;

  auto update = [&](Eigen::Index j) {
    if (col_sq[j] <= 0.0) {
      m.beta[j] = 0.0;
      return 0.0;
    }
    const double old = m.beta[j];
    // x_j' (partial residual) = x_j' r + ||x_j||^2 beta_j
    const double rho = Xc.col(j).dot(r) + col_sq[j] * old;
    const double updated = soft_threshold(rho, half_lambda) / col_sq[j];
    if (updated == old) return 0.0;
    r.noalias() -= (updated - old) * Xc.col(j);
    m.beta[j] = updated;
    return std::abs(updated - old);
  };

  // Full sweeps admit new coefficients and certify convergence; in between,
  // only the non-zero coordinates are cycled.
  std::vector<Eigen::Index> active;
  m.sweeps = 0;
  while (m.sweeps < options.max_iter) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) max_change = std::max(max_change, update(j));
    ++m.sweeps;
    m.final_change = max_change;
    if (max_change < options.tol) {
      m.converged = true;
      break;
    }
    active.clear();
    for (Eigen::Index j = 0; j < p; ++j)
      if (m.beta[j] != 0.0) active.push_back(j);
    while (m.sweeps < options.max_iter) {
      double change = 0.0;
      for (Eigen::Index j : active) change = std::max(change, update(j));
      ++m.sweeps;
      m.final_change = change;
      if (change < options.tol) break;
    }
  }
  m.sweeps = std::min(m.sweeps, options.max_iter);
  m.intercept = y_mean - x_mean.dot(m.beta);
  (void)n;
  return m;
}

// ---------------------------------------------------------------- logistic

namespace {

// log(1 + exp(-z)) without overflow.
double softplus_neg(double z) {
  if (z > 0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

// 1 / (1 + exp(z)) without overflow.
double sigmoid_neg(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

void check_labels(const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (b[i] != 1.0 && b[i] != -1.0) throw DataError("logistic labels must be -1 or +1");
  }
}

}  // namespace

double logistic_smooth_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& w, double v) {
  const Eigen::VectorXd margin = (X * w).array() + v;
  double total = 0.0;
  for (Eigen::Index i = 0; i < b.size(); ++i) total += softplus_neg(b[i] * margin[i]);
  return total / static_cast<double>(b.size());
}

Eigen::VectorXd logistic_smooth_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& b,
                                         const Eigen::VectorXd& w, double v) {
  const Eigen::Index n = X.rows(), p = X.cols();
  const Eigen::VectorXd margin = (X * w).array() + v;
  // d/dz log(1 + exp(-z)) = -1 / (1 + exp(z))
  Eigen::VectorXd coef(n);
  for (Eigen::Index i = 0; i < n; ++i) coef[i] = -b[i] * sigmoid_neg(b[i] * margin[i]);
  Eigen::VectorXd g(p + 1);
  g.head(p) = X.transpose() * coef / static_cast<double>(n);
  g[p] = coef.sum() / static_cast<double>(n);
  return g;
}

double l1_logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& b,
                             const Eigen::VectorXd& w, double v, double lambda,
                             const Eigen::VectorXd& penalty) {
  const double l1 = penalty.size() ? penalty.cwiseProduct(w.cwiseAbs()).sum() : w.lpNorm<1>();
  return logistic_smooth_loss(X, b, w, v) + lambda * l1;
}

double logistic_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& b) {
  check_labels(b);
  const auto n_pos = (b.array() > 0).count();
  const auto n_neg = b.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.0;
  const double v0 = std::log(static_cast<double>(n_pos) / static_cast<double>(n_neg));
  const Eigen::VectorXd g = logistic_smooth_gradient(X, b, Eigen::VectorXd::Zero(X.cols()), v0);
  return g.head(X.cols()).cwiseAbs().maxCoeff();
}

L1LogisticModel l1_logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& b, double lambda,
                                const LogisticOptions& options, const Eigen::VectorXd& penalty,
                                const L1LogisticModel* warm_start,
                                std::vector<double>* objective_trace) {
  require_finite(X, b);
  check_labels(b);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("logistic lambda must be >= 0");
  const Eigen::Index p = X.cols();
  if (penalty.size() != 0 && penalty.size() != p) throw UsageError("penalty length mismatch");
  const Eigen::VectorXd pen = penalty.size() ? penalty : Eigen::VectorXd::Ones(p);

  L1LogisticModel m;
  m.lambda = lambda;
  const auto n_pos = (b.array() > 0).count();
  if (n_pos == 0 || n_pos == b.size()) {
    m.w = Eigen::VectorXd::Zero(p);
    m.v = n_pos ? options.intercept_cap : -options.intercept_cap;
    m.degenerate = true;
    m.converged = true;
    return m;
  }

  if (warm_start && warm_start->w.size() == p) {
    m.w = warm_start->w;
    m.v = warm_start->v;
  } else {
    m.w = Eigen::VectorXd::Zero(p);
    m.v = std::log(static_cast<double>(n_pos) / static_cast<double>(b.size() - n_pos));
  }

  double smooth = logistic_smooth_loss(X, b, m.w, m.v);
  double objective = smooth + lambda * pen.cwiseProduct(m.w.cwiseAbs()).sum();
  if (objective_trace) objective_trace->push_back(objective);
  double step = 1.0;

  for (m.iterations = 1; m.iterations <= options.max_iter; ++m.iterations) {
    const Eigen::VectorXd g = logistic_smooth_gradient(X, b, m.w, m.v);
    Eigen::VectorXd w_new(p);
    double v_new = 0.0, smooth_new = 0.0;
    // Backtracking on the quadratic upper bound of the smooth part.
    for (int tries = 0;; ++tries) {
      for (Eigen::Index j = 0; j < p; ++j) {
        w_new[j] = soft_threshold(m.w[j] - step * g[j], step * lambda * pen[j]);
      }
      v_new = m.v - step * g[p];
      smooth_new = logistic_smooth_loss(X, b, w_new, v_new);
      const Eigen::VectorXd dw = w_new - m.w;
      const double dv = v_new - m.v;
      const double bound = smooth + g.head(p).dot(dw) + g[p] * dv +
                           (dw.squaredNorm() + dv * dv) / (2.0 * step);
      if (smooth_new <= bound + 1e-15 * std::abs(bound) || tries > 60) break;
      step *= 0.5;
    }
    const double objective_new = smooth_new + lambda * pen.cwiseProduct(w_new.cwiseAbs()).sum();
    const double grad_map =
        std::sqrt((w_new - m.w).squaredNorm() + (v_new - m.v) * (v_new - m.v)) / step;
    if (objective_new > objective) {
      // Round-off at the optimum; keep the current point.
      m.converged = true;
      break;
    }
    const double decrease = objective - objective_new;
    m.w = w_new;
    m.v = v_new;
    smooth = smooth_new;
    objective = objective_new;
    if (objective_trace) objective_trace->push_back(objective);
    if (decrease < options.objective_tol || grad_map < options.gradient_tol) {
      m.converged = true;
      break;
    }
    step *= 1.25;
  }
  m.iterations = std::min(m.iterations, options.max_iter);
  return m;
}

// ---------------------------------------------------- stability selection

std::vector<double> randomized_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& b,
                                        const std::vector<double>& lambda_grid,
                                        const RandomizedParams& params) {
  require_finite(X, b);
  check_labels(b);
  if (lambda_grid.empty()) throw UsageError("randomized logistic needs a non-empty lambda grid");
  if (params.n_resamples < 1) throw UsageError("n_resamples must be >= 1");
  if (!(params.subsample_fraction > 0.0 && params.subsample_fraction <= 1.0)) {
    throw UsageError("subsample_fraction must be in (0, 1]");
  }
  if (!(params.weakness > 0.0 && params.weakness <= 1.0)) {
    throw UsageError("weakness must be in (0, 1]");
  }
  const auto n = static_cast<int>(X.rows());
  const Eigen::Index p = X.cols();
  const int m = static_cast<int>(std::floor(params.subsample_fraction * n));
  if (m < 2) throw UsageError("subsample fraction leaves fewer than two rows");

  std::vector<double> lambdas = lambda_grid;
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());

  std::vector<double> counts(static_cast<std::size_t>(p), 0.0);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int r = 0; r < params.n_resamples; ++r) {
    // Independent stream per resample so the result does not depend on
    // evaluation order.
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(r)));
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < m; ++i) {
      const int k = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
      std::swap(order[i], order[k]);
    }
    Eigen::MatrixXd Xs(m, p);
    Eigen::VectorXd bs(m);
    for (int i = 0; i < m; ++i) {
      Xs.row(i) = X.row(order[i]);
      bs[i] = b[order[i]];
    }
    Eigen::VectorXd penalty(p);
    for (Eigen::Index j = 0; j < p; ++j) penalty[j] = rng.uniform(params.weakness, 1.0);

    L1LogisticModel prev;
    bool have_prev = false;
    for (double lambda : lambdas) {
      auto fit = l1_logistic_fit(Xs, bs, lambda, params.solver, penalty, have_prev ? &prev : nullptr);
      for (Eigen::Index j = 0; j < p; ++j) {
        if (std::abs(fit.w[j]) > 1e-9) counts[static_cast<std::size_t>(j)] += 1.0;
      }
      prev = std::move(fit);
      have_prev = true;
    }
  }
  const double total = static_cast<double>(params.n_resamples) * static_cast<double>(lambdas.size());
  for (auto& c : counts) c /= total;
  return counts;
}

// ------------------------------------------------------------- one-vs-rest

const char* method_name(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::kLasso:
      return "lasso";
    case SelectionMethod::kL1Logistic:
      return "l1_logistic";
    case SelectionMethod::kRandomized:
      return "randomized";
  }
  return "?";
}

SelectionMethod parse_method(const std::string& name) {
  if (name == "lasso") return SelectionMethod::kLasso;
  if (name == "l1_logistic") return SelectionMethod::kL1Logistic;
  if (name == "randomized") return SelectionMethod::kRandomized;
  throw UsageError("unknown selection method '" + name + "'");
}

std::vector<double> lambda_ratio_grid(const SelectionParams& params) {
  std::vector<double> ratios = params.lambda_ratios;
  if (ratios.empty()) {
    if (params.n_lambdas < 1) throw UsageError("n_lambdas must be >= 1");
    if (!(params.lambda_min_ratio > 0.0 && params.lambda_min_ratio <= 1.0)) {
      throw UsageError("lambda_min_ratio must be in (0, 1]");
    }
    if (params.n_lambdas == 1) return {1.0};
    const double log_min = std::log(params.lambda_min_ratio);
    for (int i = 0; i < params.n_lambdas; ++i) {
      ratios.push_back(std::exp(log_min * i / (params.n_lambdas - 1)));
    }
  }
  for (double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw UsageError("lambda ratios must be positive");
  }
  std::sort(ratios.begin(), ratios.end(), std::greater<>());
  return ratios;
}

std::vector<double> ovr_frequencies(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                    int n_classes, const SelectionParams& params) {
  if (n_classes < 2) throw UsageError("one-vs-rest needs at least two classes");
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) {
    throw DataError("label count does not match rows");
  }
  std::vector<int> class_count(static_cast<std::size_t>(n_classes), 0);
  for (int l : labels) {
    if (l < 0 || l >= n_classes) throw DataError("class label out of range");
    ++class_count[static_cast<std::size_t>(l)];
  }
  for (int k = 0; k < n_classes; ++k) {
    if (class_count[static_cast<std::size_t>(k)] < 2) {
      throw DataError("class " + std::to_string(k) + " has fewer than two members");
    }
  }

  const Eigen::MatrixXd Xs = apply_column_scaling(fit_column_scaling(X), X);
  const auto ratios = lambda_ratio_grid(params);
  const Eigen::Index p = X.cols();
  std::vector<double> freq(static_cast<std::size_t>(p), 0.0);

  for (int k = 0; k < n_classes; ++k) {
    Eigen::VectorXd b(X.rows());
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = labels[static_cast<std::size_t>(i)] == k ? 1.0 : -1.0;
    std::vector<double> class_freq(static_cast<std::size_t>(p), 0.0);

    switch (params.method) {
      case SelectionMethod::kLasso: {
        const double lmax = lasso_lambda_max(Xs, b);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
        for (double r : ratios) {
          const auto fit = lasso_fit(Xs, b, r * lmax, params.lasso, &beta);
          beta = fit.beta;
          for (Eigen::Index j = 0; j < p; ++j) class_freq[static_cast<std::size_t>(j)] += beta[j] != 0.0;
        }
        for (auto& f : class_freq) f /= static_cast<double>(ratios.size());
        break;
      }
      case SelectionMethod::kL1Logistic: {
        const double lmax = logistic_lambda_max(Xs, b);
        L1LogisticModel prev;
        bool have_prev = false;
        for (double r : ratios) {
          auto fit = l1_logistic_fit(Xs, b, r * lmax, params.logistic, {}, have_prev ? &prev : nullptr);
          for (Eigen::Index j = 0; j < p; ++j) class_freq[static_cast<std::size_t>(j)] += std::abs(fit.w[j]) > 1e-9;
          prev = std::move(fit);
          have_prev = true;
        }
        for (auto& f : class_freq) f /= static_cast<double>(ratios.size());
        break;
      }
      case SelectionMethod::kRandomized: {
        const double lmax = logistic_lambda_max(Xs, b);
        std::vector<double> grid;
        for (double r : ratios) grid.push_back(r * lmax);
        RandomizedParams rp = params.randomized;
        rp.seed = derive_seed(params.randomized.seed, static_cast<std::uint64_t>(k));
        class_freq = randomized_logistic(Xs, b, grid, rp);
        break;
      }
    }
    for (Eigen::Index j = 0; j < p; ++j) freq[static_cast<std::size_t>(j)] += class_freq[static_cast<std::size_t>(j)];
  }
  for (auto& f : freq) f /= static_cast<double>(n_classes);
  return freq;
}

std::vector<int> top_by_frequency(const std::vector<double>& frequencies, int keep) {
  std::vector<int> idx(frequencies.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return frequencies[static_cast<std::size_t>(a)] > frequencies[static_cast<std::size_t>(b)];
  });
  if (keep >= 0 && static_cast<std::size_t>(keep) < idx.size()) idx.resize(static_cast<std::size_t>(keep));
  return idx;
}

namespace {

StageReport run_stage(const FeatureMatrix& data, const std::vector<int>& candidates,
                      const std::vector<int>& labels, int n_classes, const SelectionParams& params,
                      int keep, std::uint64_t stage_seed) {
  StageReport stage;
  stage.candidates = candidates;
  Eigen::MatrixXd sub(data.rows(), static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t j = 0; j < candidates.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = data.X.col(candidates[j]);
  SelectionParams sp = params;
  sp.randomized.seed = stage_seed;
  stage.frequencies = ovr_frequencies(sub, labels, n_classes, sp);
  for (int local : top_by_frequency(stage.frequencies, keep)) {
    stage.selected.push_back(candidates[static_cast<std::size_t>(local)]);
  }
  return stage;
}

}  // namespace

SelectionReport two_stage_select(const FeatureMatrix& data, const std::vector<int>& labels,
                                 int n_classes, const SelectionParams& params) {
  validate_matrix(data);
  if (data.groups.size() != static_cast<std::size_t>(data.cols())) {
    throw DataError("two-stage selection needs a feature group for every column");
  }
  std::vector<int> volumetric, other;
  for (int j = 0; j < data.cols(); ++j) {
    (data.groups[static_cast<std::size_t>(j)] == FeatureGroup::kVolumetric ? volumetric : other).push_back(j);
  }
  if (static_cast<int>(other.size()) < params.stage1_keep) {
    throw DataError("stage 1 needs at least " + std::to_string(params.stage1_keep) +
                    " thickness and shape columns, found " + std::to_string(other.size()));
  }
  SelectionReport report;
  report.feature_names = data.feature_names;
  report.stage1 = run_stage(data, other, labels, n_classes, params, params.stage1_keep,
                            derive_seed(params.randomized.seed, 1));

  std::vector<int> pool = report.stage1.selected;
  pool.insert(pool.end(), volumetric.begin(), volumetric.end());
  std::sort(pool.begin(), pool.end());
  if (static_cast<int>(pool.size()) < params.stage2_keep) {
    throw DataError("stage 2 needs at least " + std::to_string(params.stage2_keep) +
                    " candidates, found " + std::to_string(pool.size()));
  }
  report.stage2 = run_stage(data, pool, labels, n_classes, params, params.stage2_keep,
                            derive_seed(params.randomized.seed, 2));
  return report;
}

}  // namespace cmr
