#include <cmath>

#include "cmr/classifiers.hpp"
#include "cmr/error.hpp"
#include "cmr/rng.hpp"

namespace cmr {

using nlohmann::json;

VoteResult ensemble_vote(const std::vector<Eigen::VectorXd>& distributions, const std::vector<double>& weights) {
  if (distributions.empty()) throw UsageError("vote needs at least one distribution");
  if (distributions.size() != weights.size()) throw UsageError("one weight per distribution is required");
  const Eigen::Index K = distributions.front().size();
  VoteResult out;
  out.combined = Eigen::VectorXd::Zero(K);
  double total = 0.0;
  for (std::size_t m = 0; m < distributions.size(); ++m) {
    const auto& p = distributions[m];
    if (p.size() != K) throw DataError("vote distributions have different lengths");
    if (!(weights[m] > 0.0) || !std::isfinite(weights[m])) throw UsageError("vote weights must be positive");
    if (!p.allFinite() || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-6) {
      throw DataError("vote input is not a probability distribution");
    }
    out.combined += weights[m] * p;
    total += weights[m];
  }
  out.combined /= total;
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < K; ++k)
    if (out.combined[k] > out.combined[best]) best = k;
  out.label = static_cast<int>(best);
  return out;
}

TrainedEnsemble train_ensemble(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                               const std::vector<std::string>& feature_names,
                               const std::vector<std::string>& class_names, const EnsembleParams& params) {
  const int K = static_cast<int>(class_names.size());
  check_class_labels(labels, K, X.rows());
  if (params.weights.size() != 3) throw UsageError("ensemble needs three voting weights");
  for (double w : params.weights)
    if (!(w > 0.0)) throw UsageError("ensemble weights must be positive");
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != X.cols()) {
    throw DataError("feature names do not match columns");
  }
  TrainedEnsemble m;
  m.feature_names = feature_names;
  m.class_names = class_names;
  m.weights = params.weights;
  m.seed = params.mlp.seed;
  m.standardizer = fit_standardizer(X, feature_names);
  const Eigen::MatrixXd Z = apply_standardizer(m.standardizer, X);
  m.lr = train_logistic(Z, labels, K, params.lr);
  m.mlp = train_mlp(Z, labels, K, params.mlp);
  m.svm = train_nusvm(Z, labels, K, params.svm);
  return m;
}

EnsemblePrediction predict(const TrainedEnsemble& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd Z = apply_standardizer(model.standardizer, X);
  EnsemblePrediction out;
  out.lr = predict_proba(model.lr, Z);
  out.mlp = predict_proba(model.mlp, Z);
  out.svm = predict_proba(model.svm, Z);
  out.combined.resize(X.rows(), model.n_classes());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto vote = ensemble_vote({out.lr.row(i).transpose(), out.mlp.row(i).transpose(), out.svm.row(i).transpose()},
                                    model.weights);
    out.labels.push_back(vote.label);
    out.combined.row(i) = vote.combined.transpose();
  }
  return out;
}

// ---------------------------------------------------------------- JSON

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// Row-major nested arrays.
json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd json_mat(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw DataError("matrix row count mismatch in model file");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto v = json_vec(data.at(static_cast<std::size_t>(r)));
    if (v.size() != cols) throw DataError("matrix column count mismatch in model file");
    m.row(r) = v.transpose();
  }
  return m;
}

}  // namespace

json ensemble_to_json(const TrainedEnsemble& model) {
  json svm_machines = json::array();
  for (const auto& b : model.svm.machines) {
    svm_machines.push_back({{"support", mat_json(b.support)},
                            {"coef", vec_json(b.coef)},
                            {"rho", b.rho},
                            {"platt_a", b.platt_a},
                            {"platt_b", b.platt_b}});
  }
  return json{
      {"format", "cmr-ensemble-1"},
      {"feature_names", model.feature_names},
      {"class_names", model.class_names},
      {"weights", model.weights},
      {"seed", model.seed},
      {"standardizer", {{"mean", vec_json(model.standardizer.mean)}, {"scale", vec_json(model.standardizer.scale)}}},
      {"lr", {{"W", mat_json(model.lr.W)}, {"b", vec_json(model.lr.b)}}},
      {"mlp",
       {{"W1", mat_json(model.mlp.W1)},
        {"b1", vec_json(model.mlp.b1)},
        {"W2", mat_json(model.mlp.W2)},
        {"b2", vec_json(model.mlp.b2)}}},
      {"svm", {{"gamma", model.svm.gamma}, {"coef0", model.svm.coef0}, {"nu", model.svm.nu}, {"machines", svm_machines}}},
  };
}

TrainedEnsemble ensemble_from_json(const json& j) {
  try {
    if (j.at("format") != "cmr-ensemble-1") throw DataError("unsupported model format");
    TrainedEnsemble m;
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.standardizer.mean = json_vec(j.at("standardizer").at("mean"));
    m.standardizer.scale = json_vec(j.at("standardizer").at("scale"));
    m.lr.W = json_mat(j.at("lr").at("W"));
    m.lr.b = json_vec(j.at("lr").at("b"));
    const auto& mlp = j.at("mlp");
    m.mlp.W1 = json_mat(mlp.at("W1"));
    m.mlp.b1 = json_vec(mlp.at("b1"));
    m.mlp.W2 = json_mat(mlp.at("W2"));
    m.mlp.b2 = json_vec(mlp.at("b2"));
    const auto& svm = j.at("svm");
    m.svm.gamma = svm.at("gamma").get<double>();
    m.svm.coef0 = svm.at("coef0").get<double>();
    m.svm.nu = svm.at("nu").get<double>();
    for (const auto& b : svm.at("machines")) {
      BinarySvm bin;
      bin.support = json_mat(b.at("support"));
      bin.coef = json_vec(b.at("coef"));
      bin.rho = b.at("rho").get<double>();
      bin.platt_a = b.at("platt_a").get<double>();
      bin.platt_b = b.at("platt_b").get<double>();
      m.svm.machines.push_back(std::move(bin));
    }
    const auto d = static_cast<Eigen::Index>(m.feature_names.size());
    const auto K = static_cast<Eigen::Index>(m.class_names.size());
    if (m.standardizer.mean.size() != d || m.standardizer.scale.size() != d || m.lr.W.rows() != d ||
        m.lr.W.cols() != K || m.mlp.W1.rows() != d || m.mlp.W2.cols() != K ||
        static_cast<Eigen::Index>(m.svm.machines.size()) != K || m.weights.size() != 3) {
      throw DataError("model file has inconsistent dimensions");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace cmr
