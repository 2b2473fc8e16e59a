#include "tailfuse/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tailfuse/errors.hpp"
#include "json_detail.hpp"
#include "text_io.hpp"

namespace tailfuse {

using nlohmann::json;
namespace fs = std::filesystem;

ModalityChoice modality_choice_from_string(std::string_view name) {
  if (name == "rgb") return ModalityChoice::rgb;
  if (name == "depth") return ModalityChoice::depth;
  if (name == "both") return ModalityChoice::both;
  throw ConfigError("unknown modality choice: " + std::string(name));
}

std::string to_string(ModalityChoice m) {
  switch (m) {
    case ModalityChoice::rgb: return "rgb";
    case ModalityChoice::depth: return "depth";
    default: return "both";
  }
}

void ExperimentConfig::validate() const {
  if (!generator.has_value() && feature_table.empty()) {
    throw ConfigError("config needs a generator or a feature_table source");
  }
  if (generator.has_value()) generator->validate();
  if (hidden_dims.empty()) {
    // A head-only pathway is legal; hidden_dims may be empty.
  }
  for (int d : hidden_dims) {
    if (d < 1) throw ConfigError("hidden_dims entries must be positive");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  schedule.validate();
  if (fusion && modality != ModalityChoice::both) {
    throw ConfigError("fusion requires both modalities");
  }
  if (seeds.empty()) throw ConfigError("config needs at least one seed");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (!feature_table.empty() && !fs::exists(feature_table)) {
    throw ConfigError("feature_table does not exist: " + feature_table);
  }
}

// ---------------------------------------------------------------------------
// Config (de)serialization and fingerprint
// ---------------------------------------------------------------------------

namespace {

json config_to_json_obj(const ExperimentConfig& c, bool with_output_dir) {
  json dataset;
  if (!c.feature_table.empty()) {
    dataset = json{{"feature_table", c.feature_table}};
  } else {
    dataset = json{{"generator", detail::generator_to_json(*c.generator)}};
  }
  json j{
      {"dataset", std::move(dataset)},
      {"model",
       {{"hidden_dims", c.hidden_dims}, {"freeze_encoder", c.freeze_encoder}}},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps},
        {"weight_decay", c.optimizer.weight_decay}}},
      {"loss", {{"kind", to_string(c.loss)}, {"literal_eq2", c.literal_eq2}}},
      {"schedule",
       {{"mode", to_string(c.schedule.mode)},
        {"gamma_init", c.schedule.gamma_init},
        {"gamma_fin", c.schedule.gamma_fin},
        {"total_epochs", c.schedule.total_epochs}}},
      {"train",
       {{"batch_size", c.batch_size}, {"merge_train_val", c.merge_train_val}}},
      {"modality", to_string(c.modality)},
      {"fusion", c.fusion},
      {"seeds", c.seeds}};
  if (with_output_dir) j["output_dir"] = c.output_dir;
  return j;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    if (d.contains("feature_table")) {
      c.feature_table = d.at("feature_table").get<std::string>();
      c.generator.reset();
    } else if (d.contains("generator")) {
      c.generator = detail::generator_from_json(d.at("generator"));
    }
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    if (m.contains("hidden_dims")) {
      c.hidden_dims = m.at("hidden_dims").get<std::vector<int>>();
    }
    c.freeze_encoder = m.value("freeze_encoder", c.freeze_encoder);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    c.optimizer.lr = o.value("lr", c.optimizer.lr);
    c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
    c.optimizer.eps = o.value("eps", c.optimizer.eps);
    c.optimizer.weight_decay =
        o.value("weight_decay", c.optimizer.weight_decay);
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    if (l.contains("kind")) {
      c.loss = loss_kind_from_string(l.at("kind").get<std::string>());
    }
    c.literal_eq2 = l.value("literal_eq2", c.literal_eq2);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    if (s.contains("mode")) {
      c.schedule.mode = gamma_mode_from_string(s.at("mode").get<std::string>());
    }
    c.schedule.gamma_init = s.value("gamma_init", c.schedule.gamma_init);
    c.schedule.gamma_fin = s.value("gamma_fin", c.schedule.gamma_fin);
    c.schedule.total_epochs = s.value("total_epochs", c.schedule.total_epochs);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    c.batch_size = t.value("batch_size", c.batch_size);
    c.merge_train_val = t.value("merge_train_val", c.merge_train_val);
  }
  if (j.contains("modality")) {
    c.modality =
        modality_choice_from_string(j.at("modality").get<std::string>());
  }
  c.fusion = j.value("fusion", c.fusion);
  if (j.contains("seeds")) {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } else if (j.contains("seed")) {
    c.seeds = {j.at("seed").get<std::uint64_t>()};
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  return config_from_json(detail::read_file(path));
}

std::string canonical_config_json(const ExperimentConfig& config) {
  // The output directory has no effect on any computed number and is left
  // out, so moving a run elsewhere keeps the fingerprint.
  return config_to_json_obj(config, false).dump();  // objects sort keys
}

std::string config_fingerprint(const ExperimentConfig& config) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(canonical_config_json(config))));
  return buf;
}

void write_config(const ExperimentConfig& config, const std::string& path) {
  detail::write_file(path, config_to_json_obj(config).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Shared run plumbing
// ---------------------------------------------------------------------------

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

Dataset dataset_for_seed(const ExperimentConfig& config, std::uint64_t seed) {
  if (!config.feature_table.empty()) {
    return load_feature_table(config.feature_table);
  }
  GeneratorConfig gen = *config.generator;
  gen.seed = derive_seed(seed, "data");
  return generate_synthetic(gen);
}

std::vector<int> model_dims(const ExperimentConfig& config,
                            const Dataset& data) {
  std::vector<int> dims;
  dims.push_back(data.feature_dim);
  dims.insert(dims.end(), config.hidden_dims.begin(),
              config.hidden_dims.end());
  return dims;
}

struct PathwayRun {
  TrainResult result;
  PredictionTable test_predictions;
  EvalReport report;
};

PathwayRun run_pathway(const ExperimentConfig& config, const Dataset& data,
                       Modality modality, std::uint64_t seed,
                       const std::string& fingerprint) {
  const std::string tag = to_string(modality);
  PathwayModel model = init_model(model_dims(config, data), data.num_classes,
                                  derive_seed(seed, "model_" + tag));
  model.frozen_encoder = config.freeze_encoder;

  TrainConfig tc;
  tc.batch_size = config.batch_size;
  tc.optimizer = config.optimizer;
  tc.loss = config.loss;
  tc.focal_form =
      config.literal_eq2 ? FocalForm::all_class : FocalForm::ground_truth;
  tc.merge_train_val = config.merge_train_val;
  tc.seed = derive_seed(seed, "train_" + tag);

  PathwayRun run;
  run.result = train(std::move(model), data, modality, config.schedule, tc);
  run.test_predictions =
      predict(run.result.model, data, modality, Split::test);
  run.report = evaluate(run.test_predictions, fingerprint);
  return run;
}

json trace_to_json(const TrainTrace& trace, const std::string& fingerprint) {
  json records = json::array();
  for (const EpochRecord& r : trace.records) {
    json rec{{"epoch", r.epoch},
             {"gamma", r.gamma},
             {"mean_train_loss", r.mean_train_loss}};
    rec["val_top1"] = r.val_top1.has_value() ? json(*r.val_top1) : json();
    records.push_back(std::move(rec));
  }
  return json{{"fingerprint", fingerprint},
              {"clamp_events", trace.clamp_events},
              {"singular_grad_events", trace.singular_grad_events},
              {"records", std::move(records)}};
}

void write_pathway_outputs(const PathwayRun& run, Modality modality,
                           const std::string& dir,
                           const std::string& fingerprint,
                           bool write_model, PathwayOutputs& out) {
  const std::string tag = to_string(modality);
  out.modality = modality;
  out.report = run.report;
  out.trace = run.result.trace;
  out.predictions_path = join_path(dir, tag + "_predictions.csv");
  write_prediction_table(run.test_predictions, out.predictions_path,
                         fingerprint);
  out.report_path = join_path(dir, tag + "_report.json");
  detail::write_file(out.report_path, report_to_json(run.report));
  detail::write_file(join_path(dir, tag + "_report.txt"),
                     report_to_text(run.report));
  detail::write_file(join_path(dir, tag + "_trace.json"),
                     trace_to_json(run.result.trace, fingerprint).dump(2) + "\n");
  if (write_model) {
    out.checkpoint_path = join_path(dir, tag + "_checkpoint.json");
    save_checkpoint(run.result.model, out.checkpoint_path, fingerprint);
  }
}

unsigned effective_workers(bool serial) {
  if (serial) return 1;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

GenerateResult cmd_generate(const ExperimentConfig& config) {
  config.validate();
  if (!config.generator.has_value()) {
    throw ConfigError("generate needs a generator dataset source");
  }
  GeneratorConfig gen = *config.generator;
  gen.seed = derive_seed(config.seeds.front(), "data");
  const std::string fingerprint = config_fingerprint(config);

  const SyntheticGenerator generator(gen);
  const Dataset ds = generator.generate();

  GenerateResult result;
  result.class_sizes = generator.class_sizes();
  result.table_path = join_path(config.output_dir, "features.csv");
  result.manifest_path = join_path(config.output_dir, "manifest.json");
  write_feature_table(ds, result.table_path, fingerprint);
  write_manifest(gen, result.manifest_path, fingerprint);

  const int largest =
      *std::max_element(result.class_sizes.begin(), result.class_sizes.end());
  std::cout << "class-size histogram (" << ds.samples.size() << " samples, "
            << ds.num_classes << " classes):\n";
  for (std::size_t c = 0; c < result.class_sizes.size(); ++c) {
    const int bar =
        largest > 0 ? result.class_sizes[c] * 50 / largest : 0;
    std::printf("  %3zu %6d %s\n", c, result.class_sizes[c],
                std::string(static_cast<std::size_t>(std::max(bar, 1)), '#')
                    .c_str());
  }
  std::cout << "wrote " << result.table_path << " and "
            << result.manifest_path << "\n";
  return result;
}

GenerateResult regenerate_from_manifest(const std::string& manifest_path,
                                        const std::string& output_dir) {
  const json j = json::parse(detail::read_file(manifest_path));
  const GeneratorConfig gen =
      detail::generator_from_json(j.at("generator"));
  const std::string fingerprint = j.value("fingerprint", "");

  const SyntheticGenerator generator(gen);
  const Dataset ds = generator.generate();

  GenerateResult result;
  result.class_sizes = generator.class_sizes();
  result.table_path = join_path(output_dir, "features.csv");
  result.manifest_path = join_path(output_dir, "manifest.json");
  write_feature_table(ds, result.table_path, fingerprint);
  write_manifest(gen, result.manifest_path, fingerprint);
  return result;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

TrainOutputs cmd_train(const ExperimentConfig& config,
                       const CmdOptions& options) {
  config.validate();
  const std::uint64_t seed = config.seeds.front();
  const std::string fingerprint = config_fingerprint(config);
  const Dataset data = dataset_for_seed(config, seed);

  std::vector<Modality> modalities;
  if (config.modality != ModalityChoice::depth) {
    modalities.push_back(Modality::rgb);
  }
  if (config.modality != ModalityChoice::rgb) {
    modalities.push_back(Modality::depth);
  }
  for (Modality m : modalities) {
    if (!data.has(m)) {
      throw ConfigError("dataset lacks the requested " + to_string(m) +
                        " modality");
    }
  }

  std::vector<PathwayRun> runs(modalities.size());
  const bool parallel =
      modalities.size() > 1 && effective_workers(options.serial) > 1;
  if (parallel) {
    std::vector<std::future<PathwayRun>> futures;
    futures.reserve(modalities.size());
    for (Modality m : modalities) {
      futures.push_back(std::async(std::launch::async, [&, m] {
        return run_pathway(config, data, m, seed, fingerprint);
      }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) {
      runs[i] = futures[i].get();
    }
  } else {
    for (std::size_t i = 0; i < modalities.size(); ++i) {
      runs[i] = run_pathway(config, data, modalities[i], seed, fingerprint);
    }
  }

  TrainOutputs outputs;
  outputs.pathways.resize(modalities.size());
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    write_pathway_outputs(runs[i], modalities[i], config.output_dir,
                          fingerprint, /*write_model=*/true,
                          outputs.pathways[i]);
  }

  if (config.fusion && modalities.size() == 2) {
    const PredictionTable fused =
        fuse_tables(runs[0].test_predictions, runs[1].test_predictions);
    outputs.fused = evaluate(fused, fingerprint);
    outputs.fused_report_path =
        join_path(config.output_dir, "fused_report.json");
    detail::write_file(outputs.fused_report_path,
                       report_to_json(*outputs.fused));
    detail::write_file(join_path(config.output_dir, "fused_report.txt"),
                       report_to_text(*outputs.fused));
    write_prediction_table(fused,
                           join_path(config.output_dir, "fused_predictions.csv"),
                           fingerprint);
  }
  return outputs;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

namespace {

struct CellSpec {
  std::string profile;
  LossKind loss;
  GammaSchedule schedule;
};

std::vector<CellSpec> ablation_cells(const GammaSchedule& base) {
  const double lo = std::min(base.gamma_init, base.gamma_fin);
  const double hi = std::max(base.gamma_init, base.gamma_fin);
  const int z = base.total_epochs;
  return {
      {"ce", LossKind::ce, GammaSchedule::make(GammaMode::constant, 0.0, 0.0, z)},
      {"linear_growth", LossKind::focal,
       GammaSchedule::make(GammaMode::linear_growth, lo, hi, z)},
      {"linear_decay", LossKind::focal,
       GammaSchedule::make(GammaMode::linear_decay, hi, lo, z)},
      {"exp_growth", LossKind::focal,
       GammaSchedule::make(GammaMode::exp_growth, lo, hi, z)},
      {"exp_decay", LossKind::focal,
       GammaSchedule::make(GammaMode::exp_decay, hi, lo, z)},
  };
}

}  // namespace

AblationReport cmd_ablate(const ExperimentConfig& config,
                          const CmdOptions& options) {
  config.validate();
  if (config.modality == ModalityChoice::both) {
    throw ConfigError(
        "ablate runs a single pathway; set modality to rgb or depth");
  }
  const Modality modality = config.modality == ModalityChoice::rgb
                                ? Modality::rgb
                                : Modality::depth;
  const std::vector<CellSpec> cells = ablation_cells(config.schedule);
  const std::string base_fingerprint = config_fingerprint(config);

  AblationReport report;
  report.seeds = config.seeds;
  report.fingerprint = base_fingerprint;
  report.cells.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    report.cells[c].profile = cells[c].profile;
  }
  report.f1_deltas_per_seed.resize(config.seeds.size());

  struct CellOutcome {
    double top1 = 0.0;
    EvalReport report;
    std::string report_path;
  };

  const unsigned workers = effective_workers(options.serial);
  std::string failure;

  for (std::size_t si = 0; si < config.seeds.size() && failure.empty(); ++si) {
    const std::uint64_t seed = config.seeds[si];
    const Dataset data = dataset_for_seed(config, seed);

    auto run_cell = [&](const CellSpec& cell) {
      ExperimentConfig cell_config = config;
      cell_config.loss = cell.loss;
      cell_config.schedule = cell.schedule;
      cell_config.seeds = {seed};
      const std::string cell_fingerprint = config_fingerprint(cell_config);

      PathwayRun run =
          run_pathway(cell_config, data, modality, seed, cell_fingerprint);
      CellOutcome outcome;
      outcome.top1 = run.report.top1;
      outcome.report = run.report;

      const std::string dir =
          join_path(join_path(config.output_dir, "ablation"),
                    cell.profile + "/seed_" + std::to_string(seed));
      PathwayOutputs sink;
      write_pathway_outputs(run, modality, dir, cell_fingerprint,
                            /*write_model=*/false, sink);
      outcome.report_path = sink.report_path;
      return outcome;
    };

    std::vector<CellOutcome> outcomes(cells.size());
    try {
      if (workers > 1) {
        std::vector<std::future<CellOutcome>> futures;
        futures.reserve(cells.size());
        for (const CellSpec& cell : cells) {
          futures.push_back(
              std::async(std::launch::async, run_cell, std::cref(cell)));
        }
        for (std::size_t c = 0; c < futures.size(); ++c) {
          outcomes[c] = futures[c].get();
        }
      } else {
        for (std::size_t c = 0; c < cells.size(); ++c) {
          outcomes[c] = run_cell(cells[c]);
        }
      }
    } catch (const std::exception& e) {
      failure = std::string("seed ") + std::to_string(seed) + ": " + e.what();
      break;
    }

    for (std::size_t c = 0; c < cells.size(); ++c) {
      report.cells[c].top1_per_seed.push_back(outcomes[c].top1);
      report.cells[c].report_paths.push_back(outcomes[c].report_path);
    }
    // ce is cell 0, exp_decay the last cell.
    report.f1_deltas_per_seed[si] =
        classwise_f1_delta(outcomes.front().report, outcomes.back().report);
  }

  if (!failure.empty()) {
    json partial{{"fingerprint", base_fingerprint},
                 {"error", failure},
                 {"completed_seeds", json::array()}};
    for (const AblationCell& cell : report.cells) {
      partial["completed_seeds"].push_back(
          json{{"profile", cell.profile}, {"top1", cell.top1_per_seed}});
    }
    detail::write_file(join_path(config.output_dir, "ablation_partial.json"),
                       partial.dump(2) + "\n");
    throw NumericError("ablation cell failed (" + failure +
                       "); partial results written");
  }

  for (AblationCell& cell : report.cells) {
    double sum = 0.0;
    for (double v : cell.top1_per_seed) sum += v;
    cell.top1_mean = sum / static_cast<double>(cell.top1_per_seed.size());
  }
  const double ce_mean = report.cells.front().top1_mean;
  for (AblationCell& cell : report.cells) {
    cell.delta_vs_ce = cell.top1_mean - ce_mean;
  }

  detail::write_file(join_path(config.output_dir, "ablation_report.json"),
                     ablation_report_to_json(report));
  detail::write_file(join_path(config.output_dir, "ablation_summary.txt"),
                     ablation_report_to_text(report));
  return report;
}

std::string ablation_report_to_json(const AblationReport& report) {
  json cells = json::array();
  for (const AblationCell& cell : report.cells) {
    cells.push_back(json{{"profile", cell.profile},
                         {"top1_per_seed", cell.top1_per_seed},
                         {"top1_mean", cell.top1_mean},
                         {"delta_vs_ce", cell.delta_vs_ce},
                         {"report_paths", cell.report_paths}});
  }
  json deltas = json::array();
  for (std::size_t si = 0; si < report.f1_deltas_per_seed.size(); ++si) {
    json per_class = json::array();
    for (const F1Delta& d : report.f1_deltas_per_seed[si]) {
      per_class.push_back(json{{"class", d.class_index},
                               {"support", d.support},
                               {"f1_ce", d.f1_a},
                               {"f1_exp_decay", d.f1_b},
                               {"delta", d.delta},
                               {"recovered", d.recovered}});
    }
    deltas.push_back(std::move(per_class));
  }
  const json j{{"fingerprint", report.fingerprint},
               {"seeds", report.seeds},
               {"cells", std::move(cells)},
               {"classwise_f1_delta", std::move(deltas)}};
  return j.dump(2) + "\n";
}

std::string ablation_report_to_text(const AblationReport& report) {
  std::ostringstream out;
  char buf[160];
  out << "gamma profile ablation (fingerprint " << report.fingerprint
      << ")\n";
  out << "profile          top1(mean)  delta-vs-ce  per-seed\n";
  for (const AblationCell& cell : report.cells) {
    std::string per_seed;
    for (double v : cell.top1_per_seed) {
      std::snprintf(buf, sizeof(buf), " %.2f", v);
      per_seed += buf;
    }
    if (cell.profile == "ce") {
      std::snprintf(buf, sizeof(buf), "%-16s %9.2f %12s %s\n",
                    cell.profile.c_str(), cell.top1_mean, "--",
                    per_seed.c_str());
    } else {
      std::snprintf(buf, sizeof(buf), "%-16s %9.2f %+12.2f %s\n",
                    cell.profile.c_str(), cell.top1_mean, cell.delta_vs_ce,
                    per_seed.c_str());
    }
    out << buf;
  }
  out << "\nrecovered classes (f1 0 under ce, > 0 under exp_decay):\n";
  for (std::size_t si = 0; si < report.f1_deltas_per_seed.size(); ++si) {
    out << "  seed " << report.seeds[si] << ":";
    bool any = false;
    for (const F1Delta& d : report.f1_deltas_per_seed[si]) {
      if (!d.recovered) continue;
      std::snprintf(buf, sizeof(buf), " class %d (f1 0 -> %.3f)",
                    d.class_index, d.f1_b);
      out << buf;
      any = true;
    }
    if (!any) out << " none";
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// fuse / evaluate
// ---------------------------------------------------------------------------

EvalReport cmd_fuse(const std::string& path_a, const std::string& path_b,
                    const std::string& output_dir) {
  const LoadedPredictions a = load_prediction_table(path_a);
  const LoadedPredictions b = load_prediction_table(path_b);
  if (a.fingerprint != b.fingerprint) {
    std::cerr << "warning: fusing tables with mismatched fingerprints ("
              << a.fingerprint << " vs " << b.fingerprint << ")\n";
  }
  const std::string fingerprint = a.fingerprint == b.fingerprint
                                      ? a.fingerprint
                                      : a.fingerprint + "+" + b.fingerprint;
  const PredictionTable fused = fuse_tables(a.table, b.table);
  const EvalReport report = evaluate(fused, fingerprint);
  detail::write_file(join_path(output_dir, "fused_report.json"),
                     report_to_json(report));
  detail::write_file(join_path(output_dir, "fused_report.txt"),
                     report_to_text(report));
  return report;
}

EvalReport cmd_evaluate(const std::string& path,
                        const std::string& output_dir) {
  const LoadedPredictions loaded = load_prediction_table(path);
  const EvalReport report = evaluate(loaded.table, loaded.fingerprint);
  detail::write_file(join_path(output_dir, "report.json"),
                     report_to_json(report));
  detail::write_file(join_path(output_dir, "report.txt"),
                     report_to_text(report));
  return report;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

BenchReport cmd_bench(const ExperimentConfig& config,
                      const std::string& rgb_checkpoint,
                      const std::string& depth_checkpoint,
                      std::vector<int> batch_sizes) {
  config.validate();
  if (!config.generator.has_value()) {
    throw ConfigError("bench needs a generator dataset source");
  }
  if (batch_sizes.empty()) throw ConfigError("bench needs batch sizes");
  for (std::size_t i = 1; i < batch_sizes.size(); ++i) {
    if (batch_sizes[i] <= batch_sizes[i - 1]) {
      throw ConfigError("bench batch sizes must be strictly increasing");
    }
  }

  const PathwayModel rgb_model = load_checkpoint(rgb_checkpoint).model;
  const PathwayModel depth_model = load_checkpoint(depth_checkpoint).model;

  GeneratorConfig gen = *config.generator;
  gen.seed = derive_seed(config.seeds.front(), "data");
  const SyntheticGenerator generator(gen);
  if (rgb_model.input_dim() != gen.feature_dim() ||
      depth_model.input_dim() != gen.feature_dim()) {
    throw ShapeError("checkpoint input width does not match generator");
  }

  const int max_batch = batch_sizes.back();
  const int num_pairs = std::min(std::max(64, 4 * max_batch),
                                 generator.num_samples());
  std::vector<SequencePair> pairs;
  pairs.reserve(static_cast<std::size_t>(num_pairs));
  for (int i = 0; i < num_pairs; ++i) pairs.push_back(generator.render_pair(i));

  const std::string fingerprint = config_fingerprint(config);
  BenchReport report;
  report.fingerprint = fingerprint;

  for (const int batch : batch_sizes) {
    Rng clip_rng = make_stream(gen.seed, "bench_clip",
                               static_cast<std::uint64_t>(batch));
    Rng crop_rng = make_stream(gen.seed, "bench_crop",
                               static_cast<std::uint64_t>(batch));
    const auto start = std::chrono::steady_clock::now();
    int processed = 0;
    for (int begin = 0; begin < num_pairs; begin += batch) {
      const int end = std::min(num_pairs, begin + batch);
      for (int i = begin; i < end; ++i) {
        const auto rgb_features =
            preprocess_sequence(pairs[static_cast<std::size_t>(i)].rgb, gen,
                                clip_rng, crop_rng);
        const auto depth_features =
            preprocess_sequence(pairs[static_cast<std::size_t>(i)].depth, gen,
                                clip_rng, crop_rng);
        const ForwardResult rgb_out = forward(rgb_model, rgb_features);
        const ForwardResult depth_out = forward(depth_model, depth_features);
        const ProbVector fused = late_fuse(rgb_out.probs, depth_out.probs);
        // Keep the result alive so the loop cannot be elided.
        if (!std::isfinite(fused.values.front())) {
          throw NumericError("non-finite fused probability during bench");
        }
        ++processed;
      }
    }
    const auto stop = std::chrono::steady_clock::now();
    const double wall =
        std::chrono::duration<double>(stop - start).count();
    BenchRow row;
    row.batch_size = batch;
    row.wall_seconds = wall;
    row.samples_per_second =
        wall > 0.0 ? static_cast<double>(processed) / wall : 0.0;
    report.rows.push_back(row);
  }

  detail::write_file(join_path(config.output_dir, "bench_report.json"),
                     bench_report_to_json(report));
  return report;
}

std::string bench_report_to_json(const BenchReport& report) {
  json rows = json::array();
  for (const BenchRow& r : report.rows) {
    rows.push_back(json{{"batch_size", r.batch_size},
                        {"samples_per_second", r.samples_per_second},
                        {"wall_seconds", r.wall_seconds}});
  }
  const json j{{"fingerprint", report.fingerprint}, {"rows", std::move(rows)}};
  return j.dump(2) + "\n";
}

}  // namespace tailfuse
