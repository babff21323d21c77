#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "imam/experiments.hpp"
#include "imam/report.hpp"

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Leftover "--key value" / "--key=value" tokens become config overrides.
std::vector<std::pair<std::string, std::string>> override_pairs(
    const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() <= 2)
      throw UsageError("unexpected argument: " + tok);
    std::string key = tok.substr(2);
    std::string value;
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw UsageError("missing value for --" + key);
      value = extras[++i];
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage autoregressive 3d shape generation"};
  app.require_subcommand(1);

  std::string config_path;
  const auto sub = [&](const char* name, const char* desc) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    cmd->allow_extras();
    cmd->add_option("--config", config_path, "json config file");
    return cmd;
  };

  int classes = -1, per_class = -1;
  long long data_seed = -1;
  CLI::App* gen = sub("gen-data", "build the synthetic dataset (train and test)");
  gen->add_option("--classes", classes, "number of shape classes");
  gen->add_option("--per-class", per_class, "training shapes per class");
  gen->add_option("--seed", data_seed, "dataset seed");

  std::string resume;
  CLI::App* tae = sub("train-ae", "train the stage-1 autoencoder");
  tae->add_option("--resume", resume, "checkpoint to continue from");

  std::string stage1_path, classifier_path;
  CLI::App* tpr = sub("train-prior", "train the stage-2 autoregressive prior");
  tpr->add_option("--stage1", stage1_path, "stage-1 checkpoint");
  tpr->add_option("--classifier", classifier_path, "classifier checkpoint");
  tpr->add_option("--resume", resume, "checkpoint to continue from");

  std::string split = "test", out_path;
  int count = -1;
  CLI::App* rec = sub("reconstruct", "encode and decode dataset shapes");
  rec->add_option("--stage1", stage1_path, "stage-1 checkpoint");
  rec->add_option("--split", split, "dataset split")
      ->check(CLI::IsMember({"train", "test"}));
  rec->add_option("--count", count, "number of shapes");
  rec->add_option("--out", out_path, "output directory");

  int class_id = -1;
  std::string feature_file, prior_path;
  CLI::App* smp = sub("sample", "generate shapes from the prior");
  smp->add_option("--prior", prior_path, "prior checkpoint");
  smp->add_option("--stage1", stage1_path, "stage-1 checkpoint");
  smp->add_option("-n,--count", count, "number of samples");
  smp->add_option("--class", class_id, "class id for class-conditional priors");
  smp->add_option("--feature-vec", feature_file,
                  "json feature vector for feature-conditional priors");
  smp->add_option("--out", out_path, "output directory");

  std::string complete_mode = "viewpoint";
  int per_input = -1;
  CLI::App* cmp = sub("complete", "complete partial point clouds");
  cmp->add_option("--prior", prior_path, "prior checkpoint");
  cmp->add_option("--stage1", stage1_path, "stage-1 checkpoint");
  cmp->add_option("--mode", complete_mode, "partial observation protocol")
      ->check(CLI::IsMember({"viewpoint", "bottom"}));
  cmp->add_option("--count", count, "number of partial inputs");
  cmp->add_option("--per-input", per_input, "completions per input");
  cmp->add_option("--out", out_path, "output directory");

  std::string gen_path, ref_path;
  CLI::App* evl = sub("evaluate", "run the set-level metric suite");
  evl->add_option("--gen", gen_path, "generated cloud set")->required();
  evl->add_option("--ref", ref_path, "reference cloud set (default: test split)");
  evl->add_option("--classifier", classifier_path, "classifier checkpoint");

  std::string study;
  CLI::App* abl = sub("ablate", "representation and flatten-order studies");
  abl->add_option("--study", study, "study name")
      ->required()
      ->check(CLI::IsMember({"representation", "order"}));

  std::string report_in, report_out;
  CLI::App* rpt = sub("report", "render plots and tables from a run record");
  rpt->add_option("--in", report_in, "run record json")->required();
  rpt->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == rpt) {
      imam::cmd_report(report_in, report_out);
      return 0;
    }
    auto overrides = override_pairs(active->remaining());
    if (active == gen) {
      if (classes >= 0) overrides.emplace_back("classes", std::to_string(classes));
      if (per_class >= 0)
        overrides.emplace_back("per_class_train", std::to_string(per_class));
      if (data_seed >= 0)
        overrides.emplace_back("data_seed", std::to_string(data_seed));
    }
    const imam::RunConfig cfg = imam::load_run_config(config_path, overrides);

    if (active == gen) {
      imam::cmd_gen_data(cfg);
    } else if (active == tae) {
      imam::cmd_train_ae(cfg, resume);
    } else if (active == tpr) {
      imam::cmd_train_prior(cfg, stage1_path, classifier_path, resume);
    } else if (active == rec) {
      imam::cmd_reconstruct(cfg, stage1_path, split, count > 0 ? count : 16,
                            out_path);
    } else if (active == smp) {
      imam::cmd_sample(cfg, prior_path, stage1_path, count > 0 ? count : 16,
                       class_id, feature_file, out_path);
    } else if (active == cmp) {
      imam::cmd_complete(cfg, prior_path, stage1_path, complete_mode,
                         count > 0 ? count : 8,
                         per_input > 0 ? per_input : cfg.completions_per_input,
                         out_path);
    } else if (active == evl) {
      imam::cmd_evaluate(cfg, gen_path, ref_path, classifier_path);
    } else if (active == abl) {
      imam::cmd_ablate(cfg, study);
    }
    return 0;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\nrun '%s --help' for usage\n", e.what(), argv[0]);
    return 2;
  } catch (const imam::ConfigError& e) {
    const std::string msg = e.what();
    const bool usage = msg.rfind("unknown config key", 0) == 0;
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    if (usage) {
      std::fprintf(stderr, "run '%s --help' for usage\n", argv[0]);
      return 2;
    }
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
