#include "config.hpp"

#include <set>

#include "cmr/error.hpp"
#include "cmr/io.hpp"

namespace cmr::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw UsageError("config " + (where.empty() ? std::string("root") : where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw UsageError("unknown config key " + (where.empty() ? key : where + "." + key));
  }
}

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

template <class T>
void read(const json& j, const std::string& key, T& out, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key " + join(where, key) + ": wrong type");
  }
}

void read_path(const json& j, const std::string& key, fs::path& out, const std::string& where, const fs::path& base) {
  std::string s;
  if (!j.contains(key)) return;
  read(j, key, s, where);
  out = (s.empty() || base.empty() || fs::path(s).is_absolute()) ? fs::path(s) : base / s;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw UsageError("config key " + key + ": " + what);
}

void read_selection(const json& j, SelectionParams& s, bool& enabled, const std::string& where) {
  check_keys(j,
             {"enabled", "method", "n_lambdas", "lambda_min_ratio", "lambda_ratios", "stage1_keep", "stage2_keep",
              "lasso", "logistic", "randomized"},
             where);
  read(j, "enabled", enabled, where);
  if (j.contains("method")) {
    std::string m;
    read(j, "method", m, where);
    s.method = parse_method(m);
  }
  read(j, "n_lambdas", s.n_lambdas, where);
  read(j, "lambda_min_ratio", s.lambda_min_ratio, where);
  read(j, "lambda_ratios", s.lambda_ratios, where);
  read(j, "stage1_keep", s.stage1_keep, where);
  read(j, "stage2_keep", s.stage2_keep, where);
  require(s.n_lambdas >= 1, join(where, "n_lambdas"), "must be >= 1");
  require(s.lambda_min_ratio > 0 && s.lambda_min_ratio <= 1, join(where, "lambda_min_ratio"), "must be in (0, 1]");
  require(s.stage1_keep >= 1 && s.stage2_keep >= 1, join(where, "stage*_keep"), "must be >= 1");
  if (j.contains("lasso")) {
    const std::string w = join(where, "lasso");
    check_keys(j["lasso"], {"tol", "max_iter"}, w);
    read(j["lasso"], "tol", s.lasso.tol, w);
    read(j["lasso"], "max_iter", s.lasso.max_iter, w);
  }
  if (j.contains("logistic")) {
    const std::string w = join(where, "logistic");
    check_keys(j["logistic"], {"objective_tol", "gradient_tol", "max_iter"}, w);
    read(j["logistic"], "objective_tol", s.logistic.objective_tol, w);
    read(j["logistic"], "gradient_tol", s.logistic.gradient_tol, w);
    read(j["logistic"], "max_iter", s.logistic.max_iter, w);
    s.randomized.solver = s.logistic;
  }
  if (j.contains("randomized")) {
    const std::string w = join(where, "randomized");
    check_keys(j["randomized"], {"n_resamples", "subsample_fraction", "weakness"}, w);
    read(j["randomized"], "n_resamples", s.randomized.n_resamples, w);
    read(j["randomized"], "subsample_fraction", s.randomized.subsample_fraction, w);
    read(j["randomized"], "weakness", s.randomized.weakness, w);
  }
}

void read_classifier(const json& j, EnsembleParams& e, const std::string& where) {
  check_keys(j, {"weights", "lr", "mlp", "svm"}, where);
  read(j, "weights", e.weights, where);
  require(e.weights.size() == 3, join(where, "weights"), "needs three entries (lr, mlp, svm)");
  if (j.contains("lr")) {
    const std::string w = join(where, "lr");
    check_keys(j["lr"], {"l2", "gradient_tol", "max_iter"}, w);
    read(j["lr"], "l2", e.lr.l2, w);
    read(j["lr"], "gradient_tol", e.lr.gradient_tol, w);
    read(j["lr"], "max_iter", e.lr.max_iter, w);
  }
  if (j.contains("mlp")) {
    const std::string w = join(where, "mlp");
    check_keys(j["mlp"], {"hidden", "epochs", "learning_rate", "momentum", "l2"}, w);
    read(j["mlp"], "hidden", e.mlp.hidden, w);
    read(j["mlp"], "epochs", e.mlp.epochs, w);
    read(j["mlp"], "learning_rate", e.mlp.learning_rate, w);
    read(j["mlp"], "momentum", e.mlp.momentum, w);
    read(j["mlp"], "l2", e.mlp.l2, w);
  }
  if (j.contains("svm")) {
    const std::string w = join(where, "svm");
    check_keys(j["svm"], {"nu", "gamma", "coef0", "eps"}, w);
    read(j["svm"], "nu", e.svm.nu, w);
    read(j["svm"], "gamma", e.svm.gamma, w);
    read(j["svm"], "coef0", e.svm.coef0, w);
    read(j["svm"], "eps", e.svm.eps, w);
  }
}

json selection_json(const PipelineParams& p) {
  const auto& s = p.selection;
  return {{"enabled", p.select_features},
          {"method", method_name(s.method)},
          {"n_lambdas", s.n_lambdas},
          {"lambda_min_ratio", s.lambda_min_ratio},
          {"lambda_ratios", s.lambda_ratios},
          {"stage1_keep", s.stage1_keep},
          {"stage2_keep", s.stage2_keep},
          {"lasso", {{"tol", s.lasso.tol}, {"max_iter", s.lasso.max_iter}}},
          {"logistic",
           {{"objective_tol", s.logistic.objective_tol},
            {"gradient_tol", s.logistic.gradient_tol},
            {"max_iter", s.logistic.max_iter}}},
          {"randomized",
           {{"n_resamples", s.randomized.n_resamples},
            {"subsample_fraction", s.randomized.subsample_fraction},
            {"weakness", s.randomized.weakness}}}};
}

json classifier_json(const EnsembleParams& e) {
  return {{"weights", e.weights},
          {"lr", {{"l2", e.lr.l2}, {"gradient_tol", e.lr.gradient_tol}, {"max_iter", e.lr.max_iter}}},
          {"mlp",
           {{"hidden", e.mlp.hidden},
            {"epochs", e.mlp.epochs},
            {"learning_rate", e.mlp.learning_rate},
            {"momentum", e.mlp.momentum},
            {"l2", e.mlp.l2}}},
          {"svm", {{"nu", e.svm.nu}, {"gamma", e.svm.gamma}, {"coef0", e.svm.coef0}, {"eps", e.svm.eps}}}};
}

}  // namespace

Config default_config() {
  Config c;
  for (const auto& pc : default_phantom_classes()) c.class_names.push_back(pc.name);
  return c;
}

Config parse_config(const json& j, const fs::path& base_dir) {
  Config c = default_config();
  check_keys(j, {"seed", "paths", "class_names", "postprocess", "phantom", "selection", "classifier", "cv", "grid"}, "");
  read(j, "seed", c.seed, "");
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    check_keys(p,
               {"output_dir", "study_manifest", "features", "feature_manifest", "model", "predicted_manifest",
                "truth_manifest"},
               "paths");
    read_path(p, "output_dir", c.paths.output_dir, "paths", base_dir);
    read_path(p, "study_manifest", c.paths.study_manifest, "paths", base_dir);
    read_path(p, "features", c.paths.features, "paths", base_dir);
    read_path(p, "feature_manifest", c.paths.feature_manifest, "paths", base_dir);
    read_path(p, "model", c.paths.model, "paths", base_dir);
    read_path(p, "predicted_manifest", c.paths.predicted_manifest, "paths", base_dir);
    read_path(p, "truth_manifest", c.paths.truth_manifest, "paths", base_dir);
  }
  read(j, "class_names", c.class_names, "");
  require(c.class_names.size() >= 2, "class_names", "needs at least two classes");
  if (j.contains("postprocess")) {
    check_keys(j["postprocess"], {"enabled", "connectivity"}, "postprocess");
    read(j["postprocess"], "enabled", c.postprocess, "postprocess");
    int conn = static_cast<int>(c.connectivity);
    read(j["postprocess"], "connectivity", conn, "postprocess");
    c.connectivity = connectivity_from_int(conn);
  }
  if (j.contains("phantom")) {
    const auto& p = j["phantom"];
    check_keys(p, {"per_class", "dims", "spacing_mm", "perturb"}, "phantom");
    read(p, "per_class", c.phantom.per_class, "phantom");
    read(p, "dims", c.phantom.dims, "phantom");
    read(p, "spacing_mm", c.phantom.spacing, "phantom");
    require(c.phantom.per_class >= 1, "phantom.per_class", "must be >= 1");
    if (p.contains("perturb")) {
      const auto& q = p["perturb"];
      const std::string w = "phantom.perturb";
      check_keys(q, {"boundary_noise_voxels", "flip_probability", "spurious_blob_rate", "blob_size"}, w);
      read(q, "boundary_noise_voxels", c.phantom.perturb.boundary_noise_voxels, w);
      read(q, "flip_probability", c.phantom.perturb.flip_probability, w);
      read(q, "spurious_blob_rate", c.phantom.perturb.spurious_blob_rate, w);
      read(q, "blob_size", c.phantom.perturb.blob_size, w);
    }
  }
  if (j.contains("selection")) read_selection(j["selection"], c.pipeline.selection, c.pipeline.select_features, "selection");
  if (j.contains("classifier")) read_classifier(j["classifier"], c.pipeline.ensemble, "classifier");
  if (j.contains("cv")) {
    check_keys(j["cv"], {"k", "repeats", "paper_order"}, "cv");
    read(j["cv"], "k", c.cv.k, "cv");
    read(j["cv"], "repeats", c.cv.repeats, "cv");
    read(j["cv"], "paper_order", c.pipeline.paper_order, "cv");
    require(c.cv.k >= 2, "cv.k", "must be >= 2");
    require(c.cv.repeats >= 1, "cv.repeats", "must be >= 1");
  }
  if (j.contains("grid")) {
    if (!j["grid"].is_array()) throw UsageError("config key grid: expected an array");
    for (std::size_t i = 0; i < j["grid"].size(); ++i) {
      const auto& g = j["grid"][i];
      const std::string w = "grid[" + std::to_string(i) + "]";
      check_keys(g, {"label", "selection", "classifier"}, w);
      // Each point starts from the top-level settings and overrides what it lists.
      GridPoint point{w, c.pipeline};
      read(g, "label", point.label, w);
      if (g.contains("selection")) {
        read_selection(g["selection"], point.params.selection, point.params.select_features, w + ".selection");
      }
      if (g.contains("classifier")) read_classifier(g["classifier"], point.params.ensemble, w + ".classifier");
      c.grid.push_back(std::move(point));
    }
  }
  return c;
}

Config load_config(const fs::path& path) {
  const std::string text = io::read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

json config_to_json(const Config& c) {
  json grid = json::array();
  for (const auto& g : c.grid) {
    grid.push_back({{"label", g.label},
                    {"selection", selection_json(g.params)},
                    {"classifier", classifier_json(g.params.ensemble)}});
  }
  const auto& pp = c.phantom.perturb;
  return {{"seed", c.seed},
          {"paths",
           {{"output_dir", c.paths.output_dir.string()},
            {"study_manifest", c.paths.study_manifest.string()},
            {"features", c.paths.features.string()},
            {"feature_manifest", c.paths.feature_manifest.string()},
            {"model", c.paths.model.string()},
            {"predicted_manifest", c.paths.predicted_manifest.string()},
            {"truth_manifest", c.paths.truth_manifest.string()}}},
          {"class_names", c.class_names},
          {"postprocess", {{"enabled", c.postprocess}, {"connectivity", static_cast<int>(c.connectivity)}}},
          {"phantom",
           {{"per_class", c.phantom.per_class},
            {"dims", c.phantom.dims},
            {"spacing_mm", c.phantom.spacing},
            {"perturb",
             {{"boundary_noise_voxels", pp.boundary_noise_voxels},
              {"flip_probability", pp.flip_probability},
              {"spurious_blob_rate", pp.spurious_blob_rate},
              {"blob_size", pp.blob_size}}}}},
          {"selection", selection_json(c.pipeline)},
          {"classifier", classifier_json(c.pipeline.ensemble)},
          {"cv", {{"k", c.cv.k}, {"repeats", c.cv.repeats}, {"paper_order", c.pipeline.paper_order}}},
          {"grid", grid}};
}

}  // namespace cmr::cli
