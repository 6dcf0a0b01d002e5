#include "trust/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "trust/error.hpp"
#include "trust/format.hpp"
#include "trust/pseudolabel.hpp"
#include "trust/report.hpp"
#include "trust/synth.hpp"
#include "trust/trainer.hpp"
#include "trust/uncertainty.hpp"

namespace trust {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliState {
  SynthConfig synth;
  TrainConfig train;
  std::string contrastive = "soft";
  std::string ctr_reduction = "mean";
  std::string out;
  std::string source;
  std::string target;
  std::string data;
  std::string model;
  std::string pseudo_labels;
  std::string weights;
  std::string report;
  bool auto_supervision = false;
};

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << j.dump(2) << '\n';
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

void add_seed_flag(CLI::App* app, std::uint64_t& seed) {
  app->add_option("--seed", seed, "Random seed (falls back to $TRUST_SEED)")->envname("TRUST_SEED");
}

void add_train_flags(CLI::App* app, CliState& s) {
  TrainConfig& c = s.train;
  app->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  app->add_option("--batch-size", c.batch_size, "Minibatch size B")->capture_default_str();
  app->add_option("--lr", c.lr, "SGD learning rate")->capture_default_str();
  app->add_option("--tau", c.tau, "Contrastive temperature")->capture_default_str();
  app->add_option("--gamma", c.gamma, "CLIP similarity scale")->capture_default_str();
  app->add_option("--scoring-batch-size", c.scoring_batch_size, "Reliability scoring batch size")
      ->capture_default_str();
  app->add_option("--hidden", c.hidden, "Hidden width of f")->capture_default_str();
  app->add_option("--feature-dim", c.feature_dim, "Feature width P")->capture_default_str();
  app->add_option("--text-epochs", c.text_epochs, "Caption classifier epochs")->capture_default_str();
  app->add_option("--text-lr", c.text_lr, "Caption classifier learning rate")->capture_default_str();
  app->add_option("--sigma-weak", c.augmentation.sigma_weak)->capture_default_str();
  app->add_option("--sigma-strong", c.augmentation.sigma_strong)->capture_default_str();
  app->add_option("--dropout-strong", c.augmentation.dropout_strong)->capture_default_str();
  app->add_option("--contrastive", s.contrastive, "Contrastive term")
      ->check(CLI::IsMember({"soft", "hard", "none"}))
      ->capture_default_str();
  app->add_option("--ctr-reduction", s.ctr_reduction, "Contrastive term reduction over anchors")
      ->check(CLI::IsMember({"mean", "sum"}))
      ->capture_default_str();
  app->add_flag("--uncertainty,!--no-uncertainty", c.use_uncertainty, "Reliability reweighting");
  add_seed_flag(app, c.seed);
}

void apply_contrastive(CliState& s) {
  s.train.use_soft_ctr = s.contrastive == "soft";
  s.train.use_hard_ctr = s.contrastive == "hard";
  s.train.ctr_reduction = s.ctr_reduction == "sum" ? ContrastiveReduction::kSum : ContrastiveReduction::kMean;
}

EmbeddingDataset load_required(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  return load_dataset(path);
}

json cmd_gen_synth(const CliState& s) {
  const DomainPair pair = gen_synthetic(s.synth);
  const fs::path out = s.out;
  save_dataset(pair.source, out / "source");
  save_dataset(pair.target, out / "target");
  std::size_t corrupted = 0;
  for (auto b : *pair.target.corrupted_mask) corrupted += b;
  json j = {{"command", "gen-synth"},
            {"config", to_json(s.synth)},
            {"source", (out / "source").string()},
            {"target", (out / "target").string()},
            {"target_corrupted", corrupted}};
  write_json_file(out / "synth.json", j);
  return j;
}

json cmd_pseudolabel(const CliState& s) {
  const EmbeddingDataset source = load_required(s.source, "--source");
  const EmbeddingDataset target = load_required(s.target, "--target");
  const TextClassifier clf =
      train_text_classifier(source, TextClassifierOptions{s.train.text_epochs, s.train.text_lr, s.train.seed});
  const PseudoLabels pl = generate_pseudo_labels(clf, target);
  const fs::path out = s.out;
  fs::create_directories(out);
  write_labels_file(out / "pseudo_labels.lbl", pl.labels);
  write_matrix_file(out / "pseudo_logits.emb", pl.logits);

  json j = {{"command", "pseudolabel"},
            {"config", {{"text_epochs", s.train.text_epochs}, {"text_lr", s.train.text_lr}, {"seed", s.train.seed}}},
            {"source_caption_accuracy",
             pseudo_label_accuracy(generate_pseudo_labels(clf, source).labels, *source.labels)},
            {"pseudo_labels", (out / "pseudo_labels.lbl").string()},
            {"logits", (out / "pseudo_logits.emb").string()}};
  // Ground truth is read here for the diagnostic only.
  j["pseudo_label_accuracy"] =
      target.labels ? json(pseudo_label_accuracy(pl.labels, *target.labels)) : json(nullptr);
  write_json_file(out / "pseudolabel.json", j);
  return j;
}

json cmd_weights(const CliState& s) {
  const EmbeddingDataset target = load_required(s.target, "--target");
  const ScoringOptions opts{s.train.scoring_batch_size, s.train.gamma, s.train.seed};
  const ReliabilityWeights w = score_dataset(target, opts);
  const fs::path out = s.out;
  fs::create_directories(out);
  write_matrix_file(out / "weights.emb", Matrix::column(w.w));

  double mean = 0.0;
  for (double v : w.w) mean += v;
  json j = {{"command", "weights"},
            {"config", {{"gamma", opts.gamma}, {"scoring_batch_size", opts.batch_size}, {"seed", opts.seed}}},
            {"weights", (out / "weights.emb").string()},
            {"mean_weight", w.w.empty() ? 0.0 : mean / static_cast<double>(w.w.size())}};
  j["histogram"] = target.corrupted_mask ? to_json(weight_histogram(w, target.corrupted_mask)) : json(nullptr);
  write_json_file(out / "weights_report.json", j);
  return j;
}

json cmd_train(CliState& s) {
  apply_contrastive(s);
  const EmbeddingDataset source = load_required(s.source, "--source");
  const EmbeddingDataset target = load_required(s.target, "--target");

  TargetSupervision sup;
  if (s.auto_supervision) {
    sup = prepare_target_supervision(source, target, s.train);
  } else {
    if (s.pseudo_labels.empty() || s.weights.empty()) {
      throw ConfigError("train needs --pseudo-labels and --weights files, or --auto to compute them");
    }
    if (!fs::exists(s.pseudo_labels)) throw IoError("missing pseudo-label file '" + s.pseudo_labels + "'");
    if (!fs::exists(s.weights)) throw IoError("missing weight file '" + s.weights + "'");
    sup.pseudo.labels = read_labels_file(s.pseudo_labels);
    const Matrix w = read_matrix_file(s.weights);
    if (w.cols() != 1) throw FormatError("weight file must be N x 1, got " + w.shape_string());
    sup.weights.w.assign(w.data().begin(), w.data().end());
    sup.weights.scoring_batch_id.assign(w.rows(), 0);
  }

  TrainResult r = train(source, target, sup.pseudo, sup.weights, s.train);
  if (target.labels) r.report.pseudo_label_accuracy = pseudo_label_accuracy(sup.pseudo.labels, *target.labels);
  const fs::path out = s.out;
  save_model(r.model, out / "model");
  json j = to_json(r.report);
  j["command"] = "train";
  j["model"] = (out / "model").string();
  write_json_file(out / "train_report.json", j);
  std::clog << "train: " << r.report.wall_clock_seconds << " s wall-clock\n";
  return j;
}

json cmd_eval(const CliState& s) {
  if (s.model.empty()) throw ConfigError("--model is required");
  const VisionModel model = load_model(s.model);
  const EmbeddingDataset data = load_required(s.data, "--data");
  return {{"command", "eval"}, {"model", s.model}, {"data", s.data}, {"accuracy", evaluate(model, data)}};
}

json cmd_ablate(CliState& s) {
  apply_contrastive(s);
  const EmbeddingDataset source = load_required(s.source, "--source");
  const EmbeddingDataset target = load_required(s.target, "--target");
  json j = to_json(ablate(source, target, s.train));
  j["command"] = "ablate";
  if (!s.out.empty()) write_json_file(s.out, j);
  return j;
}

json cmd_validate(const CliState& s) {
  const EmbeddingDataset ds = load_dataset(s.data);
  return {{"command", "validate"},
          {"ok", true},
          {"path", s.data},
          {"domain", domain_name(ds.domain)},
          {"n", ds.size()},
          {"c", ds.num_classes},
          {"dims", {{"image", ds.image_emb.cols()}, {"caption", ds.caption_emb.cols()}, {"clip", ds.clip_img.cols()}}},
          {"labels", ds.labels.has_value()},
          {"corrupted", ds.corrupted_mask.has_value()}};
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  return "internal";
}

int run_parsed(CLI::App& app, CliState& s, std::ostream& out) {
  const std::string cmd = app.get_subcommands().front()->get_name();
  json result;
  if (cmd == "gen-synth") result = cmd_gen_synth(s);
  else if (cmd == "pseudolabel") result = cmd_pseudolabel(s);
  else if (cmd == "weights") result = cmd_weights(s);
  else if (cmd == "train") result = cmd_train(s);
  else if (cmd == "eval") result = cmd_eval(s);
  else if (cmd == "ablate") result = cmd_ablate(s);
  else result = cmd_validate(s);
  emit(out, result);
  return kExitOk;
}

int run_impl(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CliState s;
  CLI::App app{"Language-guided domain adaptation in embedding space"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic source/target pair");
  gen->add_option("--classes", s.synth.classes)->capture_default_str();
  gen->add_option("--per-class", s.synth.n_per_class)->capture_default_str();
  gen->add_option("--dim-image", s.synth.dim_image)->capture_default_str();
  gen->add_option("--dim-caption", s.synth.dim_caption)->capture_default_str();
  gen->add_option("--dim-clip", s.synth.dim_clip)->capture_default_str();
  gen->add_option("--shift-angle", s.synth.shift_angle)->capture_default_str();
  gen->add_option("--shift-offset", s.synth.shift_offset)->capture_default_str();
  gen->add_option("--noise-img", s.synth.noise_img)->capture_default_str();
  gen->add_option("--noise-txt", s.synth.noise_txt)->capture_default_str();
  gen->add_option("--noise-clip", s.synth.noise_clip)->capture_default_str();
  gen->add_option("--rho", s.synth.rho, "Target caption corruption probability")->capture_default_str();
  gen->add_option("--out", s.out, "Output directory")->required();
  add_seed_flag(gen, s.synth.seed);

  auto* pl = app.add_subcommand("pseudolabel", "Train the caption classifier and label target captions");
  pl->add_option("--source", s.source)->required();
  pl->add_option("--target", s.target)->required();
  pl->add_option("--out", s.out)->required();
  pl->add_option("--epochs", s.train.text_epochs)->capture_default_str();
  pl->add_option("--lr", s.train.text_lr)->capture_default_str();
  add_seed_flag(pl, s.train.seed);

  auto* wt = app.add_subcommand("weights", "Score target pseudo-label reliability from CLIP similarity");
  wt->add_option("--target", s.target)->required();
  wt->add_option("--out", s.out)->required();
  wt->add_option("--gamma", s.train.gamma)->capture_default_str();
  wt->add_option("--batch-size", s.train.scoring_batch_size)->capture_default_str();
  add_seed_flag(wt, s.train.seed);

  auto* tr = app.add_subcommand("train", "Train the vision model");
  tr->add_option("--source", s.source)->required();
  tr->add_option("--target", s.target)->required();
  tr->add_option("--out", s.out)->required();
  tr->add_option("--pseudo-labels", s.pseudo_labels, "TRSTLBL1 pseudo-label file");
  tr->add_option("--weights", s.weights, "N x 1 TRSTEMB1 weight file");
  tr->add_flag("--auto", s.auto_supervision, "Compute pseudo-labels and weights first");
  add_train_flags(tr, s);

  auto* ev = app.add_subcommand("eval", "Accuracy of a saved model on a labelled dataset");
  ev->add_option("--model", s.model)->required();
  ev->add_option("--data", s.data)->required();

  auto* ab = app.add_subcommand("ablate", "Run the five-row component ablation");
  ab->add_option("--source", s.source)->required();
  ab->add_option("--target", s.target)->required();
  ab->add_option("--out", s.out, "Write the JSON table here as well as to stdout");
  add_train_flags(ab, s);

  auto* va = app.add_subcommand("validate", "Check a dataset directory against the on-disk format");
  va->add_option("dir", s.data)->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return kExitUsage;
  }

  try {
    return run_parsed(app, s, out);
  } catch (const std::exception& e) {
    err << json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return run_impl(args, out, err);
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_impl(std::move(args), out, err);
}

}  // namespace trust
