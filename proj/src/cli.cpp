#include "cdmp/cli.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "cdmp/binary_io.h"
#include "cdmp/report.h"
#include "cdmp/window_cache.h"

namespace fs = std::filesystem;

namespace cdmp {

void RunConfig::validate() const {
  dataset_from_name(dataset);
  protocol.validate();
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  return {{"dataset", c.dataset},
          {"root", c.root.string()},
          {"out", c.out.string()},
          {"protocol", protocol_to_json(c.protocol)}};
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "dataset") {
        c.dataset = value.get<std::string>();
      } else if (key == "root") {
        c.root = value.get<std::string>();
      } else if (key == "out") {
        c.out = value.get<std::string>();
      } else if (key == "protocol") {
        c.protocol = protocol_from_json(value, c.protocol);
      } else {
        throw std::invalid_argument("unknown run config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("run config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

namespace {

struct Flags {
  std::string config_file;
  std::optional<std::string> dataset, root, out;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> folds;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> learning_rate, label_fraction, validation_fraction;
  bool masked_input = false;
  bool validation_by_subject = false;
  bool quiet = false;
  std::vector<std::string> inputs;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// Training configs a subcommand's stage flags apply to.
std::vector<TrainConfig*> stage_targets(const std::string& command, ProtocolConfig& p) {
  if (command == "pretrain") return {&p.pretext};
  if (command == "train-har") return {&p.downstream};
  if (command == "finetune") return {&p.finetune};
  if (command == "baseline") return {&p.baseline};
  if (command == "ablate") return {&p.downstream, &p.baseline};
  return {};
}

RunConfig resolve(const std::string& command, const Flags& f) {
  RunConfig c;
  if (!f.config_file.empty()) {
    const nlohmann::json j = [&] {
      try {
        return nlohmann::json::parse(read_text_file(f.config_file));
      } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config " + f.config_file + " is not valid JSON: " + e.what());
      }
    }();
    c = run_config_from_json(j);
  }
  if (f.dataset) c.dataset = *f.dataset;
  if (f.root) c.root = *f.root;
  if (f.out) c.out = *f.out;
  if (f.seed) c.protocol.seed = *f.seed;
  if (!f.folds.empty()) c.protocol.only_folds = f.folds;
  if (f.label_fraction) c.protocol.label_fraction = *f.label_fraction;
  if (f.validation_fraction) c.protocol.validation_fraction = *f.validation_fraction;
  if (f.validation_by_subject) c.protocol.validation_by_subject = true;
  for (TrainConfig* t : stage_targets(command, c.protocol)) {
    if (f.epochs) t->epochs = *f.epochs;
    if (f.batch_size) t->batch_size = *f.batch_size;
    if (f.learning_rate) t->learning_rate = *f.learning_rate;
    if (f.masked_input) t->masked_input = true;
  }
  if (c.root.empty()) {
    if (const char* env = std::getenv("CDMP_DATA_ROOT"); env && *env) c.root = env;
  }
  if (c.out.empty()) c.out = fs::path("runs") / timestamp();
  c.validate();
  return c;
}

class Command {
 public:
  Command(std::string name, RunConfig config, const std::vector<std::string>& args, const Flags& flags,
          std::ostream& out, std::ostream& err)
      : name_(std::move(name)), cfg_(std::move(config)), args_(args), flags_(flags), out_(out), err_(err) {}

  int run() {
    write_run_json();
    if (name_ == "report") return report();
    if (name_ == "prepare") return prepare();
    if (name_ == "eval") return eval();
    if (name_ == "pretrain") return experiment(Experiment::Pretext, "pretext");
    if (name_ == "train-har") return experiment(Experiment::SsFrozen, "ss_frozen");
    if (name_ == "finetune") return experiment(Experiment::SsFinetune, "ss_finetune");
    if (name_ == "baseline") return experiment(Experiment::Supervised, "supervised");
    if (name_ == "ablate") {
      char buf[32];
      std::snprintf(buf, sizeof buf, "ablation_f%g", cfg_.protocol.label_fraction);
      return experiment(Experiment::Ablation, buf);
    }
    throw std::logic_error("unhandled command " + name_);
  }

 private:
  fs::path cache_dir() const { return cfg_.out / "cache" / cfg_.dataset; }
  fs::path models_dir() const { return cfg_.out / "models" / cfg_.dataset; }
  fs::path results_dir() const { return cfg_.out / "results" / cfg_.dataset; }

  void log(const std::string& line) const {
    if (!flags_.quiet) err_ << line << "\n" << std::flush;
  }

  void write_run_json() const {
    const nlohmann::json j = {{"command", name_},
                              {"args", args_},
                              {"config", run_config_to_json(cfg_)}};
    const auto text = j.dump(2) + "\n";
    write_text_file(cfg_.out / "run.json", text);
    write_text_file(cfg_.out / "commands" / (name_ + ".run.json"), text);
  }

  ProtocolHooks hooks() const {
    ProtocolHooks h;
    if (flags_.quiet) return h;
    h.log = [this](const std::string& m) { log(m); };
    h.on_epoch = [this](std::size_t fold, const std::string& stage, const EpochRecord& r) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "fold %zu %s epoch %zu: train %.5f val %.5f metric %.4f (%.1fs)", fold,
                    stage.c_str(), r.epoch, r.train_loss, r.val_loss, r.val_metric, r.seconds);
      log(buf);
    };
    return h;
  }

  PreparedDataset load_data() const {
    const DatasetId id = dataset_from_name(cfg_.dataset);
    const auto& layout = cfg_.protocol.architecture.layout;
    const bool have_root = !cfg_.root.empty() && fs::is_directory(cfg_.root);
    if (fs::is_regular_file(cache_dir() / kCacheManifest)) {
      auto cached = read_window_cache(cache_dir());
      const bool same_layout = cached.data.layout == layout;
      if (same_layout && (!have_root || cache_is_fresh(cached.manifest, cfg_.root))) {
        log("using window cache " + cache_dir().string());
        return std::move(cached.data);
      }
      log("window cache is stale; rebuilding");
    }
    if (cfg_.root.empty()) throw std::runtime_error("no dataset root: pass --root or set CDMP_DATA_ROOT");
    if (!have_root) throw std::runtime_error("dataset root not found: " + cfg_.root.string());
    auto data = prepare_dataset(id, cfg_.root, layout);
    write_window_cache(cache_dir(), data, cfg_.root);
    log("wrote window cache " + cache_dir().string());
    return data;
  }

  int prepare() {
    const auto data = load_data();
    const auto subjects = data.windows.subjects();
    out_ << data.info().name << ": " << subjects.size() << " subjects, " << data.windows.size() << " windows ("
         << data.windows.labeled_indices().size() << " labelled), cache " << cache_dir().string() << "\n";
    return 0;
  }

  void save_results(const std::string& stem, const std::vector<ResultTable>& tables) {
    const auto path = results_dir() / (stem + ".json");
    write_text_file(path, tables_to_json(tables));
    out_ << markdown_table(tables) << "results: " << path.string() << "\n";
  }

  int experiment(Experiment e, const std::string& stem) {
    const auto data = load_data();
    ModelStore store(models_dir());
    save_results(stem, run_protocol(data, e, cfg_.protocol, store, {}, hooks()));
    return 0;
  }

  int eval() {
    // Checked before touching the data so the diagnostic names the checkpoint.
    ModelStore store(models_dir());
    const auto folds = cfg_.protocol.selected_folds();
    bool any = false;
    for (const char* name : {kPretextModel, kFrozenModel, kFinetuneModel, kBaselineModel}) {
      any |= store.has(folds.front(), name);
    }
    any |= store.has(folds.front(), ablation_model_name("ss", cfg_.protocol.label_fraction));
    if (!any) throw std::runtime_error("missing checkpoint: " + store.path(folds.front(), kFrozenModel).string());
    const auto data = load_data();
    save_results("eval", evaluate_saved(data, cfg_.protocol, store, hooks()));
    return 0;
  }

  int report() {
    std::vector<fs::path> inputs(flags_.inputs.begin(), flags_.inputs.end());
    if (inputs.empty()) {
      const auto dir = cfg_.out / "results";
      if (!fs::is_directory(dir)) throw std::runtime_error("no results to report: " + dir.string() + " is missing");
      for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json" && entry.path().stem() != "eval") {
          inputs.push_back(entry.path());
        }
      }
      std::sort(inputs.begin(), inputs.end());
      if (inputs.empty()) throw std::runtime_error("no results to report under " + dir.string());
    }
    const auto files = emit_report(inputs, cfg_.out / "report");
    out_ << read_text_file(files.markdown) << "report: " << files.markdown.parent_path().string() << "\n";
    return 0;
  }

  std::string name_;
  RunConfig cfg_;
  std::vector<std::string> args_;
  const Flags& flags_;
  std::ostream& out_;
  std::ostream& err_;
};

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-dimensional motion prediction for activity recognition", "cdmp"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags flags;

  app.add_option("--config", flags.config_file, "JSON run config; flags override its keys")
      ->check(CLI::ExistingFile);
  app.add_option("--dataset", flags.dataset, "ucihar, motionsense or hapt");
  app.add_option("--root", flags.root, "Dataset root (default: $CDMP_DATA_ROOT)");
  app.add_option("--out", flags.out, "Output directory (default: runs/<timestamp>)");
  app.add_option("--seed", flags.seed, "Protocol seed");
  app.add_option("--folds", flags.folds, "Run only these fold indices")->delimiter(',');
  app.add_option("--validation-fraction", flags.validation_fraction, "Share of training windows held out");
  app.add_flag("--validation-by-subject", flags.validation_by_subject, "Hold out whole training users instead");
  app.add_flag("-q,--quiet", flags.quiet, "No progress output");

  app.add_subcommand("prepare", "Load a dataset and write its window cache");
  std::vector<CLI::App*> training;
  training.push_back(app.add_subcommand("pretrain", "Train the masked-z pretext model on every fold"));
  training.push_back(app.add_subcommand("train-har", "Transfer frozen blocks and train the activity head"));
  training.push_back(app.add_subcommand("finetune", "Unfreeze and fine-tune the frozen-regime classifier"));
  training.push_back(app.add_subcommand("baseline", "Train the fully supervised classifier from scratch"));
  auto* ablate = app.add_subcommand("ablate", "Self-supervised vs supervised on a stratified label subset");
  training.push_back(ablate);
  ablate->add_option("--label-fraction", flags.label_fraction, "Share of labelled training windows per class")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  for (auto* sub : training) {
    sub->add_option("--epochs", flags.epochs, "Epochs for this stage");
    sub->add_option("--batch-size", flags.batch_size, "Mini-batch size for this stage");
    sub->add_option("--lr", flags.learning_rate, "Adam learning rate for this stage");
    if (sub->get_name() != "pretrain") {
      sub->add_flag("--masked-input", flags.masked_input, "Hide the z tail of classifier inputs");
    }
  }
  app.add_subcommand("eval", "Evaluate saved checkpoints on the held-out users");
  app.add_subcommand("report", "Tables, ablation CSV and SVG from result files")
      ->add_option("inputs", flags.inputs, "Result JSON files (default: every file under <out>/results)");

  std::vector<std::string> argv_storage{"cdmp"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "cdmp: " << e.what() << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Command cmd(command, resolve(command, flags), args, flags, out, err);
    return cmd.run();
  } catch (const std::exception& e) {
    err << "cdmp " << command << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cdmp
