#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "cmr/classifiers.hpp"
#include "cmr/dataset.hpp"
#include "cmr/error.hpp"
#include "cmr/evaluation.hpp"
#include "cmr/features.hpp"
#include "cmr/io.hpp"
#include "cmr/phantom.hpp"
#include "cmr/postprocess.hpp"
#include "cmr/rng.hpp"
#include "cmr/seg_metrics.hpp"
#include "config.hpp"

namespace cmr::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::uint64_t seed = 0;
  std::string out, studies, features, model, predicted, truth;
  bool paper_order = false;
};

struct Context {
  std::string command;
  Config cfg;
  std::ostream& out;
};

void write_json(const fs::path& path, const json& j) { io::atomic_write(path, j.dump(2) + "\n"); }

/// Every command leaves <command>_run.json with its name, the effective
/// configuration and a summary of what it wrote.
json report_base(const Context& ctx) { return {{"command", ctx.command}, {"config", config_to_json(ctx.cfg)}}; }

void write_report(const Context& ctx, json report) {
  write_json(ctx.cfg.paths.output_dir / (ctx.command + "_run.json"), report);
}

const fs::path& need(const fs::path& p, const char* key) {
  if (p.empty()) throw UsageError(std::string("no ") + key + " given (config paths." + key + ")");
  return p;
}

/// Rethrows with the stage name prefixed, keeping the error category.
template <class F>
auto stage(const char* name, F&& f) {
  const std::string prefix = std::string("stage ") + name + ": ";
  try {
    return f();
  } catch (const UsageError& e) {
    throw UsageError(prefix + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  }
}

FeatureManifest feature_manifest(const Config& cfg) {
  return cfg.paths.feature_manifest.empty() ? default_manifest() : read_manifest(cfg.paths.feature_manifest);
}

std::vector<SubjectStudy> load_studies(const Config& cfg) {
  std::vector<SubjectStudy> studies;
  for (const auto& e : read_study_manifest(need(cfg.paths.study_manifest, "study_manifest"))) {
    auto s = load_study(e);
    if (cfg.postprocess) {
      s.ed = keep_largest_component(s.ed, cfg.connectivity);
      s.es = keep_largest_component(s.es, cfg.connectivity);
    }
    studies.push_back(std::move(s));
  }
  if (studies.empty()) throw DataError("study manifest lists no subjects");
  return studies;
}

std::vector<int> manifest_labels(const Config& cfg, const FeatureMatrix& data) {
  const auto entries = read_study_manifest(need(cfg.paths.study_manifest, "study_manifest"));
  return labels_by_subject(data.subject_ids, entries, static_cast<int>(cfg.class_names.size()));
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> names_of(const FeatureMatrix& data, const std::vector<int>& cols) {
  std::vector<std::string> out;
  for (int c : cols) out.push_back(data.feature_names[static_cast<std::size_t>(c)]);
  return out;
}

// ------------------------------------------------------------------ phantom

std::vector<StudyEntry> save_studies(const std::vector<SubjectStudy>& studies, const fs::path& dir) {
  std::vector<StudyEntry> entries;
  for (const auto& s : studies) {
    StudyEntry e{s.subject_id, dir / "volumes" / (s.subject_id + "_ED.json"),
                 dir / "volumes" / (s.subject_id + "_ES.json"), s.class_label};
    save_volume(s.ed, e.ed_path);
    save_volume(s.es, e.es_path);
    entries.push_back(std::move(e));
  }
  write_study_manifest(entries, dir / "studies.csv");
  return entries;
}

int cmd_phantom(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& pc = cfg.phantom;
  const auto classes = default_phantom_classes();
  const auto cohort = generate_cohort(classes, pc.per_class, cfg.seed, pc.dims, pc.spacing);
  const fs::path dir = cfg.paths.output_dir;
  save_studies(cohort, dir);
  json report = report_base(ctx);
  report["n_subjects"] = cohort.size();
  report["study_manifest"] = (dir / "studies.csv").generic_string();

  const auto& pp = pc.perturb;
  if (pp.boundary_noise_voxels > 0 || pp.spurious_blob_rate > 0) {
    std::vector<SubjectStudy> noisy = cohort;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      PerturbParams p = pp;
      p.seed = derive_seed(cfg.seed, 0x9e27, i, 0);
      noisy[i].ed = perturb_segmentation(cohort[i].ed, p);
      p.seed = derive_seed(cfg.seed, 0x9e27, i, 1);
      noisy[i].es = perturb_segmentation(cohort[i].es, p);
    }
    save_studies(noisy, dir / "perturbed");
    report["perturbed_manifest"] = (dir / "perturbed" / "studies.csv").generic_string();
  }
  write_report(ctx, report);
  ctx.out << "wrote " << cohort.size() << " phantoms to " << dir.generic_string() << "\n";
  return kOk;
}

// -------------------------------------------------------------- postprocess

int cmd_postprocess(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto entries = read_study_manifest(need(cfg.paths.study_manifest, "study_manifest"));
  const fs::path dir = cfg.paths.output_dir / "postprocessed";
  std::vector<SubjectStudy> cleaned;
  json subjects = json::array();
  for (const auto& e : entries) {
    auto s = load_study(e);
    const auto ed = keep_largest_component(s.ed, cfg.connectivity);
    const auto es = keep_largest_component(s.es, cfg.connectivity);
    auto removed = [](const LabeledVolume& before, const LabeledVolume& after) {
      return foreground_mask(before).count() - foreground_mask(after).count();
    };
    subjects.push_back({{"subject_id", s.subject_id},
                        {"removed_voxels_ed", removed(s.ed, ed)},
                        {"removed_voxels_es", removed(s.es, es)}});
    s.ed = ed;
    s.es = es;
    cleaned.push_back(std::move(s));
  }
  save_studies(cleaned, dir);
  json report = report_base(ctx);
  report["study_manifest"] = (dir / "studies.csv").generic_string();
  report["subjects"] = subjects;
  write_report(ctx, report);
  ctx.out << "post-processed " << cleaned.size() << " subjects into " << dir.generic_string() << "\n";
  return kOk;
}

// ------------------------------------------------------------- evaluate-seg

struct Stats {
  double mean = 0.0, std = 0.0;
  std::size_t n = 0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(v.size()));
  return s;
}

int cmd_evaluate_seg(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto predicted = read_study_manifest(need(cfg.paths.predicted_manifest, "predicted_manifest"));
  const auto truth = read_study_manifest(need(cfg.paths.truth_manifest, "truth_manifest"));
  std::map<std::string, const StudyEntry*> pred_by_id;
  for (const auto& e : predicted) pred_by_id[e.subject_id] = &e;
  std::map<std::string, bool> truth_ids;
  for (const auto& e : truth) truth_ids[e.subject_id] = true;
  for (const auto& e : predicted) {
    if (!truth_ids.count(e.subject_id)) throw DataError("subject " + e.subject_id + " has no ground truth");
  }

  const Label structures[] = {Label::kLV, Label::kRV, Label::kMC};
  io::CsvTable t;
  t.header = {"subject_id", "phase", "structure", "dice", "hausdorff_mm"};
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> pooled;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& te : truth) {
    const auto it = pred_by_id.find(te.subject_id);
    if (it == pred_by_id.end()) throw DataError("subject " + te.subject_id + " has no prediction");
    const auto truth_study = load_study(te);
    const auto pred_study = load_study(*it->second);
    for (const char* phase : {"ED", "ES"}) {
      const auto& tv = phase[1] == 'D' ? truth_study.ed : truth_study.es;
      const auto& pv = phase[1] == 'D' ? pred_study.ed : pred_study.es;
      if (!(tv.grid() == pv.grid())) throw DataError("subject " + te.subject_id + ": " + phase + " grids differ");
      for (Label s : structures) {
        const auto score = score_masks(extract_mask(pv, s), extract_mask(tv, s));
        const std::pair<std::string, std::string> key{phase, label_name(s)};
        if (!pooled.count(key)) order.push_back(key);
        auto& slot = pooled[key];
        slot.first.push_back(score.dice);
        if (score.hausdorff_mm) slot.second.push_back(*score.hausdorff_mm);
        t.rows.push_back({te.subject_id, phase, label_name(s), io::format_double(score.dice),
                          score.hausdorff_mm ? io::format_double(*score.hausdorff_mm) : std::string()});
      }
    }
  }
  json summary = json::array();
  std::vector<std::vector<std::string>> mean_rows, std_rows;
  ctx.out << "structure phase  Dice             Hausdorff (mm)\n";
  for (const auto& key : order) {
    const auto d = stats_of(pooled[key].first), h = stats_of(pooled[key].second);
    mean_rows.push_back({"mean", key.first, key.second, io::format_double(d.mean), io::format_double(h.mean)});
    std_rows.push_back({"std", key.first, key.second, io::format_double(d.std), io::format_double(h.std)});
    summary.push_back({{"phase", key.first},
                       {"structure", key.second},
                       {"dice_mean", d.mean},
                       {"dice_std", d.std},
                       {"hausdorff_mean_mm", h.mean},
                       {"hausdorff_std_mm", h.std},
                       {"n_hausdorff", h.n}});
    ctx.out << key.second << "        " << key.first << "     " << fixed(d.mean, 3) << " ± " << fixed(d.std, 3)
            << "    " << fixed(h.mean, 2) << " ± " << fixed(h.std, 2) << "\n";
  }
  t.rows.insert(t.rows.end(), mean_rows.begin(), mean_rows.end());
  t.rows.insert(t.rows.end(), std_rows.begin(), std_rows.end());
  io::atomic_write(cfg.paths.output_dir / "seg_metrics.csv", io::to_csv(t));
  json report = report_base(ctx);
  report["n_subjects"] = truth.size();
  report["summary"] = summary;
  write_report(ctx, report);
  return kOk;
}

// ------------------------------------------------------------------ extract

FeatureMatrix extract_all(const Context& ctx) {
  const auto studies = load_studies(ctx.cfg);
  return extract_feature_matrix(studies, feature_manifest(ctx.cfg));
}

int cmd_extract(Context& ctx) {
  const auto data = extract_all(ctx);
  const fs::path path = ctx.cfg.paths.output_dir / "features.csv";
  io::atomic_write(path, feature_table_csv(data));
  json report = report_base(ctx);
  report["features"] = path.generic_string();
  report["n_subjects"] = data.rows();
  report["n_features"] = data.cols();
  write_report(ctx, report);
  ctx.out << "wrote " << data.rows() << " x " << data.cols() << " features to " << path.generic_string() << "\n";
  return kOk;
}

// -------------------------------------------------- select / train / classify

FeatureMatrix load_features(const Config& cfg) {
  return read_feature_table(need(cfg.paths.features, "features"), feature_manifest(cfg));
}

json stage_json(const FeatureMatrix& data, const StageReport& s) {
  json cands = json::array();
  for (std::size_t i = 0; i < s.candidates.size(); ++i) {
    cands.push_back({{"feature", data.feature_names[static_cast<std::size_t>(s.candidates[i])]},
                     {"frequency", s.frequencies[i]}});
  }
  return {{"candidates", cands}, {"selected", names_of(data, s.selected)}};
}

int cmd_select(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto data = load_features(cfg);
  const auto labels = manifest_labels(cfg, data);
  SelectionParams sp = cfg.pipeline.selection;
  sp.randomized.seed = derive_seed(cfg.seed, 1);
  const auto rep = two_stage_select(data, labels, static_cast<int>(cfg.class_names.size()), sp);
  json report = report_base(ctx);
  report["stage1"] = stage_json(data, rep.stage1);
  report["stage2"] = stage_json(data, rep.stage2);
  report["selected"] = names_of(data, rep.selected());
  write_json(cfg.paths.output_dir / "selection.json", report);
  ctx.out << "selected " << rep.selected().size() << " features:";
  for (const auto& n : names_of(data, rep.selected())) ctx.out << " " << n;
  ctx.out << "\n";
  return kOk;
}

json train_model(const Context& ctx, const FeatureMatrix& data, const std::vector<int>& labels) {
  const auto model = fit_fold(data, labels, ctx.cfg.class_names, ctx.cfg.pipeline, ctx.cfg.seed);
  json j = report_base(ctx);
  j["format"] = "cmr-model-1";
  j["selected_features"] = names_of(data, model.selected);
  j["ensemble"] = ensemble_to_json(model.ensemble);
  return j;
}

int cmd_train(Context& ctx) {
  const auto data = load_features(ctx.cfg);
  const auto labels = manifest_labels(ctx.cfg, data);
  const auto model = train_model(ctx, data, labels);
  const fs::path path = ctx.cfg.paths.output_dir / "model.json";
  write_json(path, model);
  ctx.out << "trained on " << data.rows() << " subjects, " << model["selected_features"].size()
          << " features; model in " << path.generic_string() << "\n";
  return kOk;
}

int cmd_classify(Context& ctx) {
  const auto& cfg = ctx.cfg;
  json mj;
  try {
    mj = json::parse(io::read_text(need(cfg.paths.model, "model")));
  } catch (const json::exception& e) {
    throw DataError("model " + cfg.paths.model.string() + ": " + e.what());
  }
  if (!mj.is_object() || mj.value("format", "") != "cmr-model-1" || !mj.contains("ensemble")) {
    throw DataError("model " + cfg.paths.model.string() + ": not a cmr-model-1 file");
  }
  const auto ensemble = ensemble_from_json(mj["ensemble"]);
  const auto data = load_features(cfg);
  std::vector<int> cols;
  for (const auto& name : ensemble.feature_names) {
    const auto it = std::find(data.feature_names.begin(), data.feature_names.end(), name);
    if (it == data.feature_names.end()) throw DataError("feature table lacks model feature " + name);
    cols.push_back(static_cast<int>(it - data.feature_names.begin()));
  }
  const auto pred = predict(ensemble, data.select_cols(cols).X);
  io::CsvTable t;
  t.header = {"subject_id", "predicted"};
  for (const auto& c : ensemble.class_names) t.header.push_back("p_" + c);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    std::vector<std::string> row{data.subject_ids[static_cast<std::size_t>(i)],
                                 ensemble.class_names[static_cast<std::size_t>(pred.labels[static_cast<std::size_t>(i)])]};
    for (Eigen::Index k = 0; k < pred.combined.cols(); ++k) row.push_back(io::format_double(pred.combined(i, k)));
    t.rows.push_back(std::move(row));
  }
  io::atomic_write(cfg.paths.output_dir / "predictions.csv", io::to_csv(t));
  json report = report_base(ctx);
  report["n_subjects"] = data.rows();
  if (!cfg.paths.study_manifest.empty()) {
    const auto labels = labels_by_subject(data.subject_ids, read_study_manifest(cfg.paths.study_manifest),
                                          ensemble.n_classes());
    int correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += labels[i] == pred.labels[i];
    const double acc = static_cast<double>(correct) / static_cast<double>(labels.size());
    report["accuracy"] = acc;
    ctx.out << "accuracy " << percent(acc) << "%\n";
  }
  write_report(ctx, report);
  ctx.out << "classified " << data.rows() << " subjects\n";
  return kOk;
}

// ----------------------------------------------------------------- cv, pipeline

std::string order_label(bool paper_order) { return paper_order ? "non-nested selection" : "nested selection"; }

/// Grid search when a grid is configured, then CV of the chosen settings.
/// Returns the settings used.
PipelineParams cross_validate(const Context& ctx, const FeatureMatrix& data, const std::vector<int>& labels,
                              json& report) {
  const auto& cfg = ctx.cfg;
  PipelineParams params = cfg.pipeline;
  if (!cfg.grid.empty()) {
    const auto grid = grid_search(data, labels, cfg.class_names, cfg.grid, cfg.cv.k, cfg.cv.repeats, cfg.seed);
    params = cfg.grid[static_cast<std::size_t>(grid.best)].params;
    report["grid"] = grid_result_json(grid);
    ctx.out << "grid search: best point " << cfg.grid[static_cast<std::size_t>(grid.best)].label << "\n";
  }
  const auto cv = run_cv(data, labels, cfg.class_names, params, cfg.cv.k, cfg.cv.repeats, cfg.seed);
  json cj = cv_report_json(cv);
  cj["config"] = config_to_json(cfg);
  write_json(cfg.paths.output_dir / "cv_report.json", cj);
  io::atomic_write(cfg.paths.output_dir / "cv_folds.csv", cv_folds_csv(cv));
  io::atomic_write(cfg.paths.output_dir / "confusion.csv", confusion_csv(cv));
  report["selection_order"] = order_label(params.paper_order);
  report["mean_accuracy"] = cv.mean;
  report["std_accuracy"] = cv.std;
  report["n_folds"] = cv.folds.size();
  ctx.out << cfg.cv.repeats << "x" << cfg.cv.k << "-fold CV, " << order_label(params.paper_order)
          << ": accuracy " << percent(cv.mean) << " ± " << percent(cv.std) << " %\n";
  return params;
}

int cmd_cv(Context& ctx) {
  const auto data = load_features(ctx.cfg);
  const auto labels = manifest_labels(ctx.cfg, data);
  json report = report_base(ctx);
  cross_validate(ctx, data, labels, report);
  write_report(ctx, report);
  return kOk;
}

int cmd_pipeline(Context& ctx) {
  auto& cfg = ctx.cfg;
  FeatureMatrix data;
  json report = report_base(ctx);
  if (cfg.paths.features.empty()) {
    data = stage("extract", [&] { return extract_all(ctx); });
    const fs::path path = cfg.paths.output_dir / "features.csv";
    io::atomic_write(path, feature_table_csv(data));
    report["features"] = path.generic_string();
  } else {
    data = stage("load features", [&] { return load_features(cfg); });
  }
  const auto labels = stage("labels", [&] { return manifest_labels(cfg, data); });
  const auto params = stage("cv", [&] { return cross_validate(ctx, data, labels, report); });
  Context final_ctx{ctx.command, cfg, ctx.out};
  final_ctx.cfg.pipeline = params;
  const auto model = stage("train", [&] { return train_model(final_ctx, data, labels); });
  write_json(cfg.paths.output_dir / "model.json", model);
  report["final_model_features"] = model["selected_features"];
  write_report(ctx, report);
  return kOk;
}

// ------------------------------------------------------------------ driver

struct Command {
  const char* name;
  const char* help;
  int (*fn)(Context&);
  bool paper_order_flag;
};

const Command kCommands[] = {
    {"phantom", "Generate a synthetic phantom cohort (CQV1 volumes + study manifest)", cmd_phantom, false},
    {"postprocess", "Keep the largest connected component of every segmentation", cmd_postprocess, false},
    {"evaluate-seg", "Dice and Hausdorff of predicted vs ground-truth segmentations", cmd_evaluate_seg, false},
    {"extract", "Compute the feature table for every study", cmd_extract, false},
    {"select", "Two-stage feature selection on a feature table", cmd_select, false},
    {"train", "Select features and train the ensemble on all subjects", cmd_train, false},
    {"classify", "Apply a trained model to a feature table", cmd_classify, false},
    {"cv", "Repeated stratified k-fold cross-validation (with optional grid search)", cmd_cv, true},
    {"pipeline", "Extract, cross-validate and train end to end", cmd_pipeline, true},
};

void apply(Config& cfg, const Overrides& o, const CLI::App& sub) {
  if (sub.count("--seed")) cfg.seed = o.seed;
  if (!o.out.empty()) cfg.paths.output_dir = o.out;
  if (!o.studies.empty()) cfg.paths.study_manifest = o.studies;
  if (!o.features.empty()) cfg.paths.features = o.features;
  if (!o.model.empty()) cfg.paths.model = o.model;
  if (!o.predicted.empty()) cfg.paths.predicted_manifest = o.predicted;
  if (!o.truth.empty()) cfg.paths.truth_manifest = o.truth;
  if (o.paper_order) {
    cfg.pipeline.paper_order = true;
    for (auto& g : cfg.grid) g.params.paper_order = true;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cardiac segmentation post-processing, feature extraction and classification", "cmrclass"};
  app.require_subcommand(1);
  Overrides o;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : kCommands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("-c,--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Root seed (overrides the config)");
    sub->add_option("-o,--out", o.out, "Output directory (overrides the config)");
    sub->add_option("--studies", o.studies, "Study manifest CSV");
    sub->add_option("--features", o.features, "Feature table CSV");
    sub->add_option("--model", o.model, "Trained model JSON");
    sub->add_option("--predicted", o.predicted, "Study manifest of predicted segmentations");
    sub->add_option("--truth", o.truth, "Study manifest of ground-truth segmentations");
    if (c.paper_order_flag) {
      sub->add_flag("--paper-order", o.paper_order, "Select features once on all subjects before splitting");
    }
    subs.emplace_back(sub, &c);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    try {
      Context ctx{cmd->name, o.config.empty() ? default_config() : load_config(o.config), out};
      apply(ctx.cfg, o, *sub);
      return cmd->fn(ctx);
    } catch (const UsageError& e) {
      err << "cmrclass " << cmd->name << ": usage error: " << e.what() << "\n";
      return kUsage;
    } catch (const ConvergenceError& e) {
      err << "cmrclass " << cmd->name << ": convergence failure: " << e.what() << "\n";
      return kConvergence;
    } catch (const DataError& e) {
      err << "cmrclass " << cmd->name << ": data error: " << e.what() << "\n";
      return kData;
    } catch (const fs::filesystem_error& e) {
      err << "cmrclass " << cmd->name << ": data error: " << e.what() << "\n";
      return kData;
    }
  }
  return kUsage;
}

}  // namespace cmr::cli
