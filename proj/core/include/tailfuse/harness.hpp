#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailfuse/data.hpp"
#include "tailfuse/eval.hpp"
#include "tailfuse/model.hpp"
#include "tailfuse/schedule.hpp"

namespace tailfuse {

enum class ModalityChoice { rgb, depth, both };
ModalityChoice modality_choice_from_string(std::string_view name);
std::string to_string(ModalityChoice m);

/// One experiment: dataset source, model, optimizer, loss, schedule,
/// modalities, seeds, output directory. Every CLI flag mirrors one of these
/// keys; flags override file values.
struct ExperimentConfig {
  std::optional<GeneratorConfig> generator = GeneratorConfig{};
  std::string feature_table;  ///< used instead of the generator when set

  std::vector<int> hidden_dims = {64, 64};
  bool freeze_encoder = false;
  AdamWConfig optimizer;
  int batch_size = 32;

  LossKind loss = LossKind::focal;
  bool literal_eq2 = false;  ///< selects the all-class focal sum
  GammaSchedule schedule;

  ModalityChoice modality = ModalityChoice::both;
  bool fusion = true;
  bool merge_train_val = false;

  std::vector<std::uint64_t> seeds = {42};
  std::string output_dir = "out";

  void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Canonical form: sorted keys, round-trip number formatting. The seed and
/// output directory are part of the config and therefore of the fingerprint.
std::string canonical_config_json(const ExperimentConfig& config);
std::string config_fingerprint(const ExperimentConfig& config);
void write_config(const ExperimentConfig& config, const std::string& path);

struct CmdOptions {
  bool serial = false;  ///< force sequential execution of grid cells
};

/// generate: feature table + manifest under output_dir; returns the dataset.
struct GenerateResult {
  std::string table_path;
  std::string manifest_path;
  std::vector<int> class_sizes;
};
GenerateResult cmd_generate(const ExperimentConfig& config);

/// Rebuild a dataset bit-identically from a previously written manifest.
GenerateResult regenerate_from_manifest(const std::string& manifest_path,
                                        const std::string& output_dir);

/// train: one pathway per requested modality (independently trained), test
/// evaluation, prediction tables, checkpoints; fused report when both
/// modalities are trained and fusion is on.
struct PathwayOutputs {
  Modality modality = Modality::rgb;
  EvalReport report;
  TrainTrace trace;
  std::string checkpoint_path;
  std::string predictions_path;
  std::string report_path;
};
struct TrainOutputs {
  std::vector<PathwayOutputs> pathways;
  std::optional<EvalReport> fused;
  std::string fused_report_path;
};
TrainOutputs cmd_train(const ExperimentConfig& config,
                       const CmdOptions& options = {});

/// ablate: the five-cell profile grid over the config's seeds, shared data
/// per seed, fixed cell order [ce, linear_growth, linear_decay, exp_growth,
/// exp_decay], deltas versus the ce baseline.
struct AblationCell {
  std::string profile;
  std::vector<double> top1_per_seed;
  double top1_mean = 0.0;
  double delta_vs_ce = 0.0;  ///< mean Top-1 minus the ce cell's mean
  std::vector<std::string> report_paths;
};
struct AblationReport {
  std::vector<AblationCell> cells;
  std::vector<std::uint64_t> seeds;
  /// Classes with zero ce F1 recovered by exp_decay, per seed (head->tail).
  std::vector<std::vector<F1Delta>> f1_deltas_per_seed;
  std::string fingerprint;
};
AblationReport cmd_ablate(const ExperimentConfig& config,
                          const CmdOptions& options = {});

/// fuse: average two prediction tables from disk and evaluate the result.
EvalReport cmd_fuse(const std::string& path_a, const std::string& path_b,
                    const std::string& output_dir);

/// evaluate: metric stack over one prediction table from disk.
EvalReport cmd_evaluate(const std::string& path, const std::string& output_dir);

/// bench: fused two-pathway inference throughput (clip sampling -> pooling ->
/// forward -> fusion) at each batch size.
struct BenchRow {
  int batch_size = 0;
  double samples_per_second = 0.0;
  double wall_seconds = 0.0;
};
struct BenchReport {
  std::vector<BenchRow> rows;
  std::string fingerprint;
};
BenchReport cmd_bench(const ExperimentConfig& config,
                      const std::string& rgb_checkpoint,
                      const std::string& depth_checkpoint,
                      std::vector<int> batch_sizes = {1, 2, 4, 8, 16});

std::string ablation_report_to_json(const AblationReport& report);
std::string ablation_report_to_text(const AblationReport& report);
std::string bench_report_to_json(const BenchReport& report);

}  // namespace tailfuse
