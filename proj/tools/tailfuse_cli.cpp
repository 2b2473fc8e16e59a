// tailfuse command-line front end.
//
// Subcommands: generate, train, ablate, fuse, bench, evaluate. Every flag
// mirrors a config-file key; flags override file values. Exit code is 0 on
// success; failures print a machine-readable error record to stderr.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tailfuse/errors.hpp"
#include "tailfuse/harness.hpp"

namespace {

using tailfuse::ExperimentConfig;

struct CommonFlags {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  bool serial = false;

  std::optional<std::string> modality;
  std::optional<std::string> loss;
  std::optional<bool> literal_eq2;
  std::optional<std::string> gamma_mode;
  std::optional<double> gamma_init;
  std::optional<double> gamma_fin;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<double> weight_decay;
  std::optional<bool> fusion;
  std::optional<bool> merge_train_val;
  std::optional<bool> freeze_encoder;
  std::optional<std::string> feature_table;
  std::vector<int> hidden_dims;
};

void add_common_flags(CLI::App& cmd, CommonFlags& flags) {
  cmd.add_option("--config", flags.config_path, "experiment config JSON file");
  cmd.add_option("--seed", flags.seeds,
                 "run seed(s); repeat the flag for a multi-seed run");
  cmd.add_option("--out", flags.out_dir, "output directory");
  cmd.add_flag("--serial", flags.serial,
               "run grid cells sequentially instead of concurrently");

  cmd.add_option("--modality", flags.modality, "rgb, depth, or both");
  cmd.add_option("--loss", flags.loss, "ce or focal");
  cmd.add_option("--literal-eq2", flags.literal_eq2,
                 "use the all-class focal sum");
  cmd.add_option("--gamma-mode", flags.gamma_mode,
                 "constant, linear_decay, linear_growth, exp_decay, exp_growth");
  cmd.add_option("--gamma-init", flags.gamma_init, "gamma at epoch 0");
  cmd.add_option("--gamma-fin", flags.gamma_fin, "gamma at the final epoch");
  cmd.add_option("--epochs", flags.epochs, "schedule horizon Z");
  cmd.add_option("--batch-size", flags.batch_size, "mini-batch size");
  cmd.add_option("--lr", flags.lr, "AdamW learning rate");
  cmd.add_option("--weight-decay", flags.weight_decay, "AdamW weight decay");
  cmd.add_option("--fusion", flags.fusion, "fuse the two pathways");
  cmd.add_option("--merge-train-val", flags.merge_train_val,
                 "train on the union of train and val splits");
  cmd.add_option("--freeze-encoder", flags.freeze_encoder,
                 "keep encoder layers at their initialization");
  cmd.add_option("--feature-table", flags.feature_table,
                 "train from a feature-table file instead of the generator");
  cmd.add_option("--hidden-dims", flags.hidden_dims, "encoder widths");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig config;
  if (!flags.config_path.empty()) {
    config = tailfuse::load_config(flags.config_path);
  }
  if (!flags.seeds.empty()) config.seeds = flags.seeds;
  if (!flags.out_dir.empty()) config.output_dir = flags.out_dir;
  if (flags.modality) {
    config.modality = tailfuse::modality_choice_from_string(*flags.modality);
  }
  if (flags.loss) config.loss = tailfuse::loss_kind_from_string(*flags.loss);
  if (flags.literal_eq2) config.literal_eq2 = *flags.literal_eq2;
  if (flags.gamma_mode) {
    config.schedule.mode = tailfuse::gamma_mode_from_string(*flags.gamma_mode);
  }
  if (flags.gamma_init) config.schedule.gamma_init = *flags.gamma_init;
  if (flags.gamma_fin) config.schedule.gamma_fin = *flags.gamma_fin;
  if (flags.epochs) config.schedule.total_epochs = *flags.epochs;
  if (flags.batch_size) config.batch_size = *flags.batch_size;
  if (flags.lr) config.optimizer.lr = *flags.lr;
  if (flags.weight_decay) config.optimizer.weight_decay = *flags.weight_decay;
  if (flags.fusion) config.fusion = *flags.fusion;
  if (flags.merge_train_val) config.merge_train_val = *flags.merge_train_val;
  if (flags.freeze_encoder) config.freeze_encoder = *flags.freeze_encoder;
  if (flags.feature_table) {
    config.feature_table = *flags.feature_table;
    config.generator.reset();
  }
  if (!flags.hidden_dims.empty()) config.hidden_dims = flags.hidden_dims;
  // Fusion only applies to two-pathway runs; drop it quietly when a single
  // modality was requested on the command line.
  if (config.modality != tailfuse::ModalityChoice::both) {
    config.fusion = false;
  }
  config.validate();
  return config;
}

int error_record(const std::string& type, const std::string& message) {
  const nlohmann::json record{{"error", {{"type", type}, {"message", message}}}};
  std::cerr << record.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"long-tail multimodal training and evaluation toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* generate = app.add_subcommand(
      "generate", "write a synthetic feature table and its manifest");
  std::string manifest_path;
  add_common_flags(*generate, flags);
  generate->add_option("--manifest", manifest_path,
                       "regenerate from an existing manifest file");

  auto* train = app.add_subcommand(
      "train", "train pathway(s), evaluate on test, write reports");
  add_common_flags(*train, flags);

  auto* ablate = app.add_subcommand(
      "ablate", "run the five gamma-profile cells and compare to ce");
  add_common_flags(*ablate, flags);

  auto* fuse = app.add_subcommand(
      "fuse", "average two prediction tables and evaluate the result");
  std::string fuse_a, fuse_b, fuse_out = "out";
  fuse->add_option("table_a", fuse_a, "first prediction table")->required();
  fuse->add_option("table_b", fuse_b, "second prediction table")->required();
  fuse->add_option("--out", fuse_out, "output directory");

  auto* evaluate = app.add_subcommand(
      "evaluate", "evaluate one prediction table");
  std::string eval_path, eval_out = "out";
  evaluate->add_option("table", eval_path, "prediction table")->required();
  evaluate->add_option("--out", eval_out, "output directory");

  auto* bench = app.add_subcommand(
      "bench", "fused two-pathway inference throughput by batch size");
  add_common_flags(*bench, flags);
  std::string rgb_ckpt, depth_ckpt;
  std::vector<int> batch_sizes = {1, 2, 4, 8, 16};
  bench->add_option("--rgb-checkpoint", rgb_ckpt, "rgb pathway checkpoint")
      ->required();
  bench
      ->add_option("--depth-checkpoint", depth_ckpt,
                   "depth pathway checkpoint")
      ->required();
  bench->add_option("--batch-sizes", batch_sizes,
                    "strictly increasing batch sizes");

  CLI11_PARSE(app, argc, argv);

  try {
    const tailfuse::CmdOptions options{flags.serial};
    if (generate->parsed()) {
      if (!manifest_path.empty()) {
        const auto result = tailfuse::regenerate_from_manifest(
            manifest_path, flags.out_dir.empty() ? "out" : flags.out_dir);
        std::cout << "wrote " << result.table_path << " and "
                  << result.manifest_path << "\n";
      } else {
        tailfuse::cmd_generate(resolve_config(flags));
      }
    } else if (train->parsed()) {
      const auto outputs = tailfuse::cmd_train(resolve_config(flags), options);
      for (const auto& p : outputs.pathways) {
        std::printf("%-5s top-1 %.2f  top-%d %.2f  -> %s\n",
                    tailfuse::to_string(p.modality).c_str(), p.report.top1,
                    p.report.top5_effective_k, p.report.top5,
                    p.report_path.c_str());
      }
      if (outputs.fused.has_value()) {
        std::printf("fused top-1 %.2f  top-%d %.2f  -> %s\n",
                    outputs.fused->top1, outputs.fused->top5_effective_k,
                    outputs.fused->top5, outputs.fused_report_path.c_str());
      }
    } else if (ablate->parsed()) {
      const auto report = tailfuse::cmd_ablate(resolve_config(flags), options);
      std::cout << tailfuse::ablation_report_to_text(report);
    } else if (fuse->parsed()) {
      const auto report = tailfuse::cmd_fuse(fuse_a, fuse_b, fuse_out);
      std::cout << tailfuse::report_to_text(report);
    } else if (evaluate->parsed()) {
      const auto report = tailfuse::cmd_evaluate(eval_path, eval_out);
      std::cout << tailfuse::report_to_text(report);
    } else if (bench->parsed()) {
      const auto report = tailfuse::cmd_bench(resolve_config(flags), rgb_ckpt,
                                              depth_ckpt, batch_sizes);
      std::printf("batch  samples/s   wall(s)\n");
      for (const auto& row : report.rows) {
        std::printf("%5d  %9.1f  %8.4f\n", row.batch_size,
                    row.samples_per_second, row.wall_seconds);
      }
    }
  } catch (const tailfuse::ConfigError& e) {
    return error_record("config", e.what());
  } catch (const tailfuse::DataError& e) {
    return error_record("data", e.what());
  } catch (const tailfuse::ShapeError& e) {
    return error_record("shape", e.what());
  } catch (const tailfuse::NumericError& e) {
    return error_record("numeric", e.what());
  } catch (const std::exception& e) {
    return error_record("internal", e.what());
  }
  return 0;
}
