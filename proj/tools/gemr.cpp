// gemr: command-line front end for data generation, training, evaluation,
// ensembling, face alignment and the gradient check.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "gemr/align.hpp"
#include "gemr/checkpoint.hpp"
#include "gemr/gradcheck_suite.hpp"
#include "gemr/image.hpp"
#include "gemr/json_io.hpp"
#include "gemr/synth.hpp"
#include "gemr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace gemr;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2 };

// Bad invocation or unreadable/unwritable input and output.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config-file values fill every option the command line left unset. Keys
// mirror long flag names without the leading dashes.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file '" + path + "': " + e.what());
  }
  if (!doc.is_object()) throw UsageError("config file '" + path + "' must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") throw UsageError("config file: unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    std::vector<std::string> items;
    auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& v : value) items.push_back(text(v));
    } else if (value.is_boolean()) {
      if (!value.get<bool>()) continue;
      items.push_back("true");
    } else {
      items.push_back(text(value));
    }
    for (const auto& s : items) opt->add_result(s);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config file key '" + key + "': " + e.what());
    }
  }
}

void echo_config(const std::string& command, const ordered_json& resolved) {
  ordered_json line;
  line["command"] = command;
  line["config"] = resolved;
  std::cout << line.dump() << '\n';
}

Partition read_data(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("data file '" + path.string() + "' does not exist");
  std::vector<std::string> warnings;
  Partition part;
  try {
    part = read_partition(path, &warnings);
  } catch (const DatasetError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  if (part.empty()) throw UsageError("data file '" + path.string() + "' holds no samples");
  return part;
}

struct Dims {
  std::size_t global = 0;
  std::size_t face = 0;
};

// Every sample must share one global and one face dimension.
Dims data_dims(const Partition& part, const std::string& what) {
  Dims d{part.front().global.size(), part.front().faces.front().size()};
  for (const auto& s : part) {
    if (s.global.size() != d.global) {
      throw std::invalid_argument(what + ": sample '" + s.id + "' has global dimension " +
                                  std::to_string(s.global.size()) + ", expected " + std::to_string(d.global));
    }
    for (const auto& f : s.faces) {
      if (f.size() != d.face) {
        throw std::invalid_argument(what + ": sample '" + s.id + "' has face dimension " + std::to_string(f.size()) +
                                    ", expected " + std::to_string(d.face));
      }
    }
  }
  return d;
}

void check_compatible(const GroupEmotionModel<float>& model, const Partition& part, const std::string& name) {
  try {
    for (const auto& s : part) model.check_sample(s);
  } catch (const ShapeError& e) {
    throw std::invalid_argument("model '" + name + "' does not fit the data: " + e.what());
  }
}

LoadedModel load_model(const fs::path& path) {
  try {
    return load_checkpoint(path);
  } catch (const CheckpointError& e) {
    throw UsageError("checkpoint '" + path.string() + "': " + e.what());
  }
}

void print_metrics(const Metrics& m) {
  std::cout << format_report(m);
  std::cout << format_metrics_record(m) << '\n';
}

// --- gen-data -------------------------------------------------------------

struct GenData {
  std::string out;
  DatasetConfig config;
};

void add_gen_data(CLI::App& app, GenData& o) {
  auto* c = app.add_subcommand("gen-data", "Write a synthetic planted-salience dataset");
  auto& d = o.config;
  c->add_option("--out", o.out, "Output directory")->required();
  c->add_option("--seed", d.seed);
  c->add_option("--n-train", d.n_train);
  c->add_option("--n-val", d.n_val);
  c->add_option("--n-eval", d.n_eval);
  c->add_option("--faces-min", d.faces_min);
  c->add_option("--faces-max", d.faces_max);
  c->add_option("--global-dim", d.global_dim);
  c->add_option("--face-dim", d.face_dim);
  c->add_option("--signal", d.signal, "Dominant-face prototype amplitude");
  c->add_option("--distractor", d.distractor, "Distractor prototype amplitude");
  c->add_option("--salience-gap", d.salience_gap);
  c->add_option("--noise", d.noise);
  c->add_option("--salience-noise", d.salience_noise);
  c->add_option("--global-strength", d.global_strength);
  c->add_option("--context-mix", d.context_mix);
  c->add_option("--global-noise", d.global_noise);
}

int run_gen_data(const GenData& o) {
  o.config.validate();
  ordered_json cfg;
  cfg["out"] = o.out;
  cfg["dataset"] = json(o.config);
  echo_config("gen-data", cfg);
  const auto ds = generate_dataset(o.config);
  try {
    write_dataset(ds, o.config, o.out);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  std::cout << "wrote " << ds.train.size() << " train, " << ds.val.size() << " val, " << ds.eval.size()
            << " eval samples to " << o.out << '\n';
  return kOk;
}

// --- train ----------------------------------------------------------------

struct TrainOpts {
  std::string data;
  std::string out;
  std::string mechanism = "c";
  TrainConfig config;
  bool scaled = false;
  bool projection_relu = false;
  std::vector<std::size_t> global_hidden;
  std::vector<std::size_t> local_hidden;
};

void add_train(CLI::App& app, TrainOpts& o) {
  auto* c = app.add_subcommand("train", "Train one model and write a checkpoint");
  auto& t = o.config;
  c->add_option("--data", o.data, "Dataset directory from gen-data")->required();
  c->add_option("--out", o.out, "Checkpoint path")->required();
  c->add_option("--mechanism", o.mechanism)->check(CLI::IsMember({"average", "a", "b", "c"}));
  c->add_option("--seed", t.seed);
  c->add_option("--epochs", t.epochs);
  c->add_option("--lr", t.lr0, "Initial learning rate");
  c->add_option("--decay-factor", t.decay_factor);
  c->add_option("--decay-period", t.decay_period, "Epochs between learning-rate decays");
  c->add_option("--batch-size", t.batch_size);
  c->add_option("--momentum", t.momentum);
  c->add_option("--dropout", t.dropout);
  c->add_flag("--merge-val", t.merge_val, "Train on train + val");
  c->add_flag("--scaled", o.scaled, "Divide attention scores by sqrt(D_f)");
  c->add_flag("--projection-relu", o.projection_relu, "ReLU on the attention-B query layer");
  c->add_option("--global-hidden", o.global_hidden, "Hidden widths of the global encoder")->delimiter(',');
  c->add_option("--local-hidden", o.local_hidden, "Hidden widths of the face encoder")->delimiter(',');
}

int run_train(TrainOpts& o) {
  o.config.mechanism = parse_mechanism(o.mechanism);
  o.config.validate();
  const fs::path dir(o.data);
  auto train_set = read_data(dir / "train.jsonl");
  Partition val;
  if (fs::exists(dir / "val.jsonl")) val = read_data(dir / "val.jsonl");
  const Dims dims = data_dims(train_set, "train.jsonl");
  if (!val.empty()) {
    const Dims vd = data_dims(val, "val.jsonl");
    if (vd.global != dims.global || vd.face != dims.face) {
      throw std::invalid_argument("val.jsonl dimensions differ from train.jsonl");
    }
  }
  if (o.config.merge_val) {
    train_set.insert(train_set.end(), val.begin(), val.end());
    val.clear();
  }
  ModelConfig mc = model_config_for(o.config, dims.global, dims.face);
  mc.attention.scaled = o.scaled;
  mc.attention.projection_relu = o.projection_relu;
  mc.global.hidden_widths = o.global_hidden;
  mc.local.hidden_widths = o.local_hidden;
  mc.validate();

  ordered_json cfg;
  cfg["data"] = o.data;
  cfg["out"] = o.out;
  cfg["train"] = json(o.config);
  cfg["model"] = json(mc);
  echo_config("train", cfg);

  GroupEmotionModel<float> model(mc, o.config.seed);
  train(model, train_set, o.config, val.empty() ? nullptr : &val,
        [](const EpochLog& log) { std::cout << format_epoch_log(log) << std::endl; });
  CheckpointMeta meta{o.config.seed, o.config.epochs, "train " + o.data};
  try {
    save_checkpoint(model, meta, o.out);
  } catch (const CheckpointError& e) {
    throw UsageError(e.what());
  }
  std::cout << "wrote " << o.out << '\n';
  return kOk;
}

// --- eval / ensemble-eval ---------------------------------------------------

struct EvalOpts {
  std::string model;
  std::string data;
  std::string dump_attention;
};

void add_eval(CLI::App& app, EvalOpts& o) {
  auto* c = app.add_subcommand("eval", "Accuracy report for one checkpoint");
  c->add_option("--model", o.model)->required();
  c->add_option("--data", o.data, "Partition file (.jsonl)")->required();
  c->add_option("--dump-attention", o.dump_attention,
                "Write per-sample face weights as JSON lines to this file ('-' for stdout)");
}

int run_eval(const EvalOpts& o) {
  ordered_json cfg;
  cfg["model"] = o.model;
  cfg["data"] = o.data;
  cfg["dump_attention"] = o.dump_attention;
  echo_config("eval", cfg);
  const auto loaded = load_model(o.model);
  const auto part = read_data(o.data);
  check_compatible(loaded.model, part, o.model);

  const auto results = infer_partition(loaded.model, part);
  std::vector<Label> predictions;
  for (const auto& r : results) predictions.push_back(predict(r.first));
  print_metrics(score_predictions(part, predictions));

  if (!o.dump_attention.empty()) {
    std::ofstream file;
    if (o.dump_attention != "-") {
      file.open(o.dump_attention, std::ios::trunc);
      if (!file) throw UsageError("cannot open '" + o.dump_attention + "' for writing");
    }
    std::ostream& out = o.dump_attention == "-" ? std::cout : file;
    for (std::size_t i = 0; i < part.size(); ++i) {
      ordered_json row;
      row["id"] = part[i].id;
      row["weights"] = results[i].second.weights;
      row["most_important"] = results[i].second.most_important();
      row["probs"] = results[i].first.probs;
      row["predicted"] = index_of(predictions[i]);
      out << row.dump() << '\n';
    }
  }
  return kOk;
}

struct EnsembleOpts {
  std::vector<std::string> models;
  std::string data;
};

void add_ensemble(CLI::App& app, EnsembleOpts& o) {
  auto* c = app.add_subcommand("ensemble-eval", "Accuracy of probability-averaged checkpoints");
  c->add_option("--models", o.models, "Comma-separated checkpoints")->required()->delimiter(',');
  c->add_option("--data", o.data, "Partition file (.jsonl)")->required();
}

int run_ensemble(const EnsembleOpts& o) {
  ordered_json cfg;
  cfg["models"] = o.models;
  cfg["data"] = o.data;
  echo_config("ensemble-eval", cfg);
  const auto part = read_data(o.data);
  std::vector<LoadedModel> loaded;
  for (const auto& m : o.models) {
    loaded.push_back(load_model(m));
    check_compatible(loaded.back().model, part, m);
  }
  std::vector<const GroupEmotionModel<float>*> members;
  for (const auto& l : loaded) members.push_back(&l.model);
  const auto probs = ensemble_predict(members, part);
  std::vector<Label> predictions;
  for (const auto& p : probs) predictions.push_back(predict(p));
  print_metrics(score_predictions(part, predictions));
  return kOk;
}

// --- align ----------------------------------------------------------------

struct AlignOpts {
  std::string image;
  std::string landmarks;
  std::string out;
  std::string template_file;
  bool eyes_only = false;
};

void add_align(CLI::App& app, AlignOpts& o) {
  auto* c = app.add_subcommand("align", "Warp a face onto the 96x112 template");
  c->add_option("--image", o.image, "Input PGM/PPM")->required();
  c->add_option("--landmarks", o.landmarks, "\"x1,y1;x2,y2;x3,y3;x4,y4;x5,y5\"")->required();
  c->add_option("--out", o.out, "Output PGM/PPM")->required();
  c->add_option("--template", o.template_file, "File holding five target points in the landmark syntax");
  c->add_flag("--eyes-only", o.eyes_only, "Fit the transform to the two eye points");
}

int run_align(const AlignOpts& o) {
  ordered_json cfg;
  cfg["image"] = o.image;
  cfg["landmarks"] = o.landmarks;
  cfg["out"] = o.out;
  cfg["template"] = o.template_file;
  cfg["eyes_only"] = o.eyes_only;
  echo_config("align", cfg);
  Landmarks5 points, target = kCanonicalTemplate;
  try {
    points = parse_landmarks(o.landmarks);
    if (!o.template_file.empty()) {
      std::ifstream in(o.template_file);
      if (!in) throw UsageError("cannot open template file '" + o.template_file + "'");
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
      target = parse_landmarks(text);
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  Image image;
  try {
    image = read_pnm(o.image);
  } catch (const PnmError& e) {
    throw UsageError("image '" + o.image + "': " + e.what());
  }
  const auto result = align_face(image, points, target, o.eyes_only ? LandmarkSubset::EyesOnly : LandmarkSubset::All);
  try {
    write_pnm(result.image, o.out);
  } catch (const PnmError& e) {
    throw UsageError(e.what());
  }
  const auto& t = result.transform;
  ordered_json est;
  est["scale"] = t.scale();
  est["theta_rad"] = t.rotation();
  est["theta_deg"] = t.rotation() * 180.0 / std::numbers::pi;
  est["tx"] = t.tx;
  est["ty"] = t.ty;
  est["residual"] = alignment_residual(t, points, target);
  std::cout << est.dump() << '\n';
  return kOk;
}

// --- gradcheck ------------------------------------------------------------

struct GradOpts {
  std::uint64_t seed = 0;
  std::size_t trials = 20;
};

void add_gradcheck(CLI::App& app, GradOpts& o) {
  auto* c = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  c->add_option("--seed", o.seed);
  c->add_option("--trials", o.trials, "Configurations per mechanism")->check(CLI::PositiveNumber);
}

int run_gradcheck(const GradOpts& o) {
  ordered_json cfg;
  cfg["seed"] = o.seed;
  cfg["trials"] = o.trials;
  cfg["tolerance"] = kGradcheckTolerance;
  cfg["step"] = kGradcheckStep;
  cfg["fallback_step"] = kGradcheckFallbackStep;
  echo_config("gradcheck", cfg);
  const auto report = run_gradcheck_suite(o.seed, o.trials);
  for (const auto& w : report.per_mechanism) std::cout << "worst " << describe(w) << '\n';
  std::cout << "configurations " << report.configurations << " per mechanism, " << report.checked
            << " entries checked, " << report.failures << " failures, " << report.kink_crossings
            << " kink crossings excluded, " << report.redrawn << " ill-conditioned trials redrawn\n";
  if (report.passed()) {
    std::cout << "PASS max relative error " << report.worst.error << '\n';
    return kOk;
  }
  std::cout << "FAIL " << describe(report.worst) << '\n';
  return kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-level emotion recognition with attention over faces"};
  app.require_subcommand(1);
  std::string config_file;
  GenData gen;
  TrainOpts tr;
  EvalOpts ev;
  EnsembleOpts en;
  AlignOpts al;
  GradOpts gc;
  add_gen_data(app, gen);
  add_train(app, tr);
  add_eval(app, ev);
  add_ensemble(app, en);
  add_align(app, al);
  add_gradcheck(app, gc);
  for (auto* sub : app.get_subcommands({})) {
    sub->add_option("--config", config_file, "JSON object of flag values; explicit flags win");
  }

  try {
    // Required options may come from the config file, so they are enforced
    // after it has been applied.
    std::vector<std::pair<CLI::App*, CLI::Option*>> required;
    for (auto* sub : app.get_subcommands({})) {
      for (auto* opt : sub->get_options()) {
        if (opt->get_required()) {
          required.emplace_back(sub, opt);
          opt->required(false);
        }
      }
    }
    app.parse(argc, argv);
    CLI::App* cmd = app.get_subcommands().front();
    apply_config_file(cmd, config_file);
    for (auto [sub, opt] : required) {
      if (sub == cmd && opt->count() == 0) {
        throw UsageError(cmd->get_name() + ": " + opt->get_name() + " is required");
      }
    }
    const std::string name = cmd->get_name();
    if (name == "gen-data") return run_gen_data(gen);
    if (name == "train") return run_train(tr);
    if (name == "eval") return run_eval(ev);
    if (name == "ensemble-eval") return run_ensemble(en);
    if (name == "align") return run_align(al);
    return run_gradcheck(gc);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
