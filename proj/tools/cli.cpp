#include "cli.hpp"

#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "artifacts.hpp"
#include "config.hpp"
#include "experiment.hpp"
#include "quill/augment.hpp"
#include "quill/calibration.hpp"
#include "quill/checkpoint.hpp"
#include "quill/error.hpp"
#include "quill/ngram.hpp"
#include "quill/rng.hpp"
#include "quill/trainer.hpp"
#include "quill/version.hpp"
#include "workflow.hpp"

namespace quill::cli {

namespace {

namespace fs = std::filesystem;

// Missing or contradictory flags, reported with the subcommand's help.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string version_text() {
  return std::string("quill ") + kVersionString + "\ncheckpoint format " +
         std::to_string(kCheckpointFormatVersion) + "\nlanguage model format " +
         std::to_string(kNGramFormatVersion);
}

template <typename T>
void override(T& target, const std::optional<T>& flag) {
  if (flag) target = *flag;
}

// Every option of every subcommand; CLI11 binds into these.
struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;

  // shared paths
  std::string pairs, out, input, pred, checkpoint, val;

  // split
  std::vector<double> ratios;
  double noise_rate = 0.0;

  // augment
  std::string confusions;
  std::optional<double> p_word_delete, p_letter_delete, p_shorten, p_cut_ending, p_misspell,
      p_space_delete;
  std::optional<int> cut_max;

  // lm-train
  int order = 2;
  double k = 1.0;

  // train
  std::string train_path, lm, history;
  std::optional<std::string> loss;
  std::optional<double> epsilon, alpha, lr, weight_decay, dropout;
  std::optional<int> batch_size, epochs, patience, robust_warmup;
  std::optional<int> d_model, heads, enc_layers, dec_layers, d_ffn, max_seq_len;
  bool quiet = false;

  // translate / calib-report
  std::string text_input, ensemble;
  std::optional<double> temperature;
  bool calibrated = false;
  int max_len = 0;

  // eval
  bool identity = false;
  std::string per_pair, title;

  // calibrate / calib-report
  bool grid = false;
  int bins = 10;
  std::string json_out;

  // reject-curve
  std::string metric = "ned";
  std::vector<double> rejection_grid;
};

CliConfig resolve_config(const Options& o) {
  return o.config.empty() ? CliConfig{} : load_config(o.config);
}

std::uint64_t require_seed(const Options& o, const CliConfig& cfg, const std::string& command) {
  if (o.seed) return *o.seed;
  if (cfg.seed) return *cfg.seed;
  throw UsageError("--seed is required for '" + command + "'");
}

std::string require_path(const std::string& value, const std::string& fallback, const char* flag) {
  if (!value.empty()) return value;
  if (!fallback.empty()) return fallback;
  throw UsageError(std::string(flag) + " is required");
}

void log_line(std::ostream& out, const std::string& line) { out << line << '\n'; }

// ------------------------------------------------------------------ split

int cmd_split(const Options& o, std::ostream& out) {
  const CliConfig cfg = resolve_config(o);
  const std::uint64_t seed = require_seed(o, cfg, "split");
  const fs::path pairs_path = require_path(o.pairs, cfg.paths.data, "--pairs");
  const std::string prefix = require_path(o.out, "", "--out-prefix");
  require_file(pairs_path, "pair file");

  SplitRatios ratios;
  if (!o.ratios.empty()) {
    if (o.ratios.size() != 3) throw UsageError("--ratios takes three values: train,val,test");
    ratios = {o.ratios[0], o.ratios[1], o.ratios[2]};
  }
  const auto pairs = load_pairs(pairs_path);
  DatasetSplit split = split_dataset(pairs, ratios, seed);
  if (o.noise_rate > 0.0) split.train = inject_pair_noise(split.train, o.noise_rate, derive_seed(seed, 1));
  save_pairs(split.train, prefix + ".train.jsonl");
  save_pairs(split.validation, prefix + ".val.jsonl");
  save_pairs(split.test, prefix + ".test.jsonl");
  log_line(out, "train " + std::to_string(split.train.size()) + ", val " +
                    std::to_string(split.validation.size()) + ", test " +
                    std::to_string(split.test.size()));
  return 0;
}

// ---------------------------------------------------------------- augment

int cmd_augment(const Options& o, std::ostream& out) {
  const CliConfig cfg = resolve_config(o);
  const std::uint64_t seed = require_seed(o, cfg, "augment");
  const fs::path input = require_path(o.input, cfg.paths.data, "--input");
  const fs::path out_path = require_path(o.out, "", "--out");
  require_file(input, "input text file");

  AugmentConfig aug = cfg.augment;
  const std::string table = o.confusions.empty() ? cfg.confusion_table_path : o.confusions;
  if (!table.empty()) {
    require_file(table, "confusion table");
    aug.confusion_table = load_confusion_table(table);
  }
  override(aug.p_word_delete, o.p_word_delete);
  override(aug.p_letter_delete, o.p_letter_delete);
  override(aug.p_shorten_to_initial, o.p_shorten);
  override(aug.p_cut_ending, o.p_cut_ending);
  override(aug.cut_ending_max_chars, o.cut_max);
  override(aug.p_misspell, o.p_misspell);
  override(aug.p_space_delete, o.p_space_delete);
  aug.seed = seed;
  aug.validate();

  const auto pairs = generate_pairs(read_text_lines(input), aug);
  save_pairs(pairs, out_path);
  log_line(out, "wrote " + std::to_string(pairs.size()) + " pairs");
  return 0;
}

// --------------------------------------------------------------- lm-train

int cmd_lm_train(const Options& o, std::ostream& out) {
  const CliConfig cfg = resolve_config(o);
  const fs::path pairs_path = require_path(o.pairs, cfg.paths.data, "--pairs");
  const fs::path out_path = require_path(o.out, cfg.paths.lm, "--out");
  require_file(pairs_path, "pair file");

  const auto pairs = load_pairs(pairs_path);
  const Vocab vocab = vocab_for_pairs(pairs);
  const auto teachers = teacher_texts(pairs);
  const NGramModel lm = fit_ngram_on_texts(teachers, vocab, o.order, o.k);
  save_ngram(lm, vocab, out_path);
  log_line(out, "order " + std::to_string(o.order) + " model over " + std::to_string(vocab.size()) +
                    " symbols from " + std::to_string(pairs.size()) + " texts");
  return 0;
}

// ------------------------------------------------------------------ train

int cmd_train(const Options& o, std::ostream& out) {
  CliConfig cfg = resolve_config(o);
  const std::uint64_t seed = require_seed(o, cfg, "train");
  const fs::path train_path = require_path(o.train_path, cfg.paths.data, "--train");
  const fs::path val_path = require_path(o.val, "", "--val");
  const fs::path out_path = require_path(o.out, "", "--out");

  TrainConfig tc = cfg.train;
  if (o.loss) tc.loss = parse_loss_kind(*o.loss);
  override(tc.epsilon, o.epsilon);
  override(tc.alpha, o.alpha);
  override(tc.robust_warmup_epochs, o.robust_warmup);
  override(tc.learning_rate, o.lr);
  override(tc.weight_decay, o.weight_decay);
  override(tc.dropout_rate, o.dropout);
  override(tc.batch_size, o.batch_size);
  override(tc.max_epochs, o.epochs);
  override(tc.patience, o.patience);
  if (!o.lm.empty()) tc.lm_path = o.lm;
  if (tc.lm_path.empty()) tc.lm_path = cfg.paths.lm;
  tc.seed = seed;

  ModelConfig mc = cfg.model;
  override(mc.d_model, o.d_model);
  override(mc.n_heads, o.heads);
  override(mc.n_encoder_layers, o.enc_layers);
  override(mc.n_decoder_layers, o.dec_layers);
  override(mc.d_ffn, o.d_ffn);
  override(mc.max_seq_len, o.max_seq_len);

  const bool robust = tc.loss == LossKind::kRobust;
  if (robust && tc.lm_path.empty()) throw UsageError("--lm is required for the robust loss");
  require_file(train_path, "training pair file");
  require_file(val_path, "validation pair file");
  if (robust) require_file(tc.lm_path, "language model");
  tc.validate();

  const auto train_pairs = load_pairs(train_path);
  const auto val_pairs = load_pairs(val_path);
  const Vocab vocab = vocab_for_pairs(train_pairs);
  std::optional<LoadedNGram> lm;
  if (robust) {
    lm = load_ngram(tc.lm_path);
    if (!(lm->vocab == vocab)) {
      throw InvalidArgument("language model vocabulary differs from the training vocabulary; "
                            "fit it on the same training pair file");
    }
  }
  const TrainResult result =
      train(train_pairs, val_pairs, vocab, mc, tc, lm ? &lm->model : nullptr,
            [&](const EpochRecord& e) {
              if (!o.quiet) {
                out << "epoch " << e.epoch << "  loss " << format_double(e.train_loss)
                    << "  val median NED " << format_double(e.val_median_ned) << "  mean "
                    << format_double(e.val_mean_ned) << std::endl;
              }
            });
  save_checkpoint(result.params, vocab, out_path);
  fs::path history = o.history;
  if (history.empty()) {
    history = out_path;
    history += ".history.csv";
  }
  write_file(history, result.history.to_csv());
  log_line(out, "best epoch " + std::to_string(result.history.best_epoch));
  return 0;
}

// -------------------------------------------------------------- translate

struct LoadedModels {
  std::vector<Checkpoint> checkpoints;
  std::vector<ModelTranslator> translators;
  std::vector<const Translator*> members;
};

std::vector<std::string> split_list(const std::string& list) {
  std::vector<std::string> items;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

LoadedModels load_models(const std::vector<std::string>& paths) {
  LoadedModels m;
  for (const auto& p : paths) require_file(p, "checkpoint");
  for (const auto& p : paths) m.checkpoints.push_back(load_checkpoint(p));
  for (const auto& c : m.checkpoints) {
    if (!(c.vocab == m.checkpoints.front().vocab)) {
      throw InvalidArgument("ensemble checkpoints use different vocabularies");
    }
    if (!(c.params.config == m.checkpoints.front().params.config)) {
      throw InvalidArgument("ensemble checkpoints use different model configs");
    }
  }
  m.translators.reserve(m.checkpoints.size());
  for (const auto& c : m.checkpoints) m.translators.emplace_back(c.params);
  for (const auto& t : m.translators) m.members.push_back(&t);
  return m;
}

std::vector<std::string> checkpoint_paths(const Options& o) {
  if (!o.checkpoint.empty() && !o.ensemble.empty()) {
    throw UsageError("give either --checkpoint or --ensemble, not both");
  }
  if (!o.ensemble.empty()) {
    auto paths = split_list(o.ensemble);
    if (paths.empty()) throw UsageError("--ensemble needs at least one checkpoint");
    return paths;
  }
  if (o.checkpoint.empty()) throw UsageError("--checkpoint or --ensemble is required");
  return {o.checkpoint};
}

double resolve_temperature(const Options& o, const std::string& first_checkpoint) {
  if (o.calibrated && o.temperature) {
    throw UsageError("give either --temperature or --calibrated, not both");
  }
  if (o.calibrated) {
    const fs::path sidecar = temperature_sidecar(first_checkpoint);
    require_file(sidecar, "temperature file (run 'calibrate' first)");
    return read_temperature(sidecar);
  }
  const double t = o.temperature.value_or(1.0);
  if (!(t > 0.0)) throw InvalidArgument("temperature must be positive");
  return t;
}

int cmd_translate(const Options& o, std::ostream& out) {
  const auto paths = checkpoint_paths(o);
  if (o.input.empty() == o.text_input.empty()) {
    throw UsageError("give exactly one of --input (pair file) or --text (one text per line)");
  }
  const fs::path out_path = require_path(o.out, "", "--out");
  const fs::path source = o.input.empty() ? o.text_input : o.input;
  require_file(source, "input file");
  const double temperature = resolve_temperature(o, paths.front());

  const LoadedModels models = load_models(paths);
  const std::vector<std::string> students =
      o.input.empty() ? read_text_lines(source) : student_texts(load_pairs(source));
  const Vocab& vocab = models.checkpoints.front().vocab;
  const auto predictions = translate_all(models.members, vocab, students, temperature, o.max_len);
  save_predictions(predictions, out_path);
  log_line(out, "translated " + std::to_string(predictions.size()) + " texts");
  return 0;
}

// ------------------------------------------------------------------- eval

int cmd_eval(const Options& o, std::ostream& out) {
  const fs::path pairs_path = require_path(o.pairs, "", "--pairs");
  if (o.identity == !o.pred.empty()) throw UsageError("give exactly one of --pred or --identity");
  require_file(pairs_path, "pair file");
  if (!o.pred.empty()) require_file(o.pred, "prediction file");

  const auto pairs = load_pairs(pairs_path);
  const auto predictions =
      o.identity ? identity_predictions(student_texts(pairs)) : load_predictions(o.pred);
  check_alignment(pairs, predictions);
  const Evaluation ev = evaluate(pairs, prediction_texts(predictions));

  std::string prefix = o.out;
  if (prefix.empty()) {
    fs::path base = o.identity ? pairs_path : fs::path(o.pred);
    base.replace_extension();
    prefix = base.string() + (o.identity ? ".identity" : "") + ".report";
  }
  const std::string title =
      !o.title.empty() ? o.title : (o.identity ? "Identity" : fs::path(o.pred).filename().string());
  write_file(prefix + ".json", report_to_json(ev.report).dump(2) + "\n");
  const std::string table = report_to_text(ev.report, title);
  write_file(prefix + ".txt", table);
  if (!o.per_pair.empty()) write_file(o.per_pair, per_pair_csv(ev.per_pair, predictions));
  out << table;
  return 0;
}

// -------------------------------------------------------------- calibrate

int cmd_calibrate(const Options& o, std::ostream& out) {
  const fs::path ckpt_path = require_path(o.checkpoint, "", "--checkpoint");
  const fs::path val_path = require_path(o.val, "", "--val");
  require_file(ckpt_path, "checkpoint");
  require_file(val_path, "validation pair file");

  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const ModelTranslator model(ckpt.params);
  const auto encoded = encode_pairs(load_pairs(val_path), ckpt.vocab);
  const TeacherForcedSet set = teacher_forced_set(model, encoded);
  TemperatureFitOptions options;
  options.use_grid = o.grid;
  const double t = fit_temperature(set, options).temperature;
  const fs::path sidecar = o.out.empty() ? temperature_sidecar(ckpt_path) : fs::path(o.out);
  write_temperature(sidecar, t);
  out << "temperature " << format_double(t) << "  validation NLL "
      << format_double(temperature_nll(set, 1.0)) << " -> " << format_double(temperature_nll(set, t))
      << '\n';
  return 0;
}

// ----------------------------------------------------------- calib-report

int cmd_calib_report(const Options& o, std::ostream& out) {
  const fs::path ckpt_path = require_path(o.checkpoint, "", "--checkpoint");
  const fs::path pairs_path = require_path(o.pairs, "", "--pairs");
  const fs::path out_path = require_path(o.out, "", "--out");
  require_file(ckpt_path, "checkpoint");
  require_file(pairs_path, "pair file");
  const double temperature = resolve_temperature(o, ckpt_path.string());

  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const ModelTranslator model(ckpt.params);
  const auto encoded = encode_pairs(load_pairs(pairs_path), ckpt.vocab);
  const CalibrationReport report =
      calibration_report(collect_token_events(model, encoded, temperature), o.bins);
  write_file(out_path, calibration_csv(report));
  if (!o.json_out.empty()) {
    auto doc = calibration_to_json(report);
    doc["temperature"] = temperature;
    write_file(o.json_out, doc.dump(2) + "\n");
  }
  out << "ECE " << format_double(report.ece) << "  MCE " << format_double(report.mce) << "  over "
      << report.n << " tokens\n";
  return 0;
}

// ----------------------------------------------------------- reject-curve

int cmd_reject_curve(const Options& o, std::ostream& out) {
  const fs::path pairs_path = require_path(o.pairs, "", "--pairs");
  const fs::path pred_path = require_path(o.pred, "", "--pred");
  const fs::path out_path = require_path(o.out, "", "--out");
  require_file(pairs_path, "pair file");
  require_file(pred_path, "prediction file");
  const CurveMetric metric = parse_curve_metric(o.metric);

  const auto pairs = load_pairs(pairs_path);
  const auto predictions = load_predictions(pred_path);
  check_alignment(pairs, predictions);
  const Evaluation ev = evaluate(pairs, prediction_texts(predictions));
  const std::vector<double> grid =
      o.rejection_grid.empty() ? default_rejection_grid() : o.rejection_grid;
  const RejectionCurve curve = metric_rejection_curve(ev.per_pair, predictions, metric, grid);
  const std::string csv = rejection_csv(curve);
  write_file(out_path, csv);
  out << csv;
  return 0;
}

// ------------------------------------------------------------- experiment

int cmd_experiment(const Options& o, std::ostream& out) {
  if (o.config.empty()) throw UsageError("--config is required for 'experiment'");
  const CliConfig cfg = resolve_config(o);
  const std::uint64_t seed = require_seed(o, cfg, "experiment");
  const fs::path corpus = require_path(o.input, cfg.paths.data, "--corpus");
  const fs::path out_dir = require_path(o.out, cfg.paths.outputs, "--out");
  require_file(corpus, "corpus");
  // Checked up front so a bad setting fails before hours of training; the
  // vocabulary size is only known after augmentation.
  ModelConfig model = cfg.model;
  model.vocab_size = Vocab::kNumSpecials + 1;
  model.validate();
  cfg.train.validate();
  cfg.augment.validate();
  const auto summary = run_experiment(cfg, corpus, out_dir, seed, out);
  out << "summary written to " << (out_dir / "summary.json").string() << '\n';
  (void)summary;
  return 0;
}

// ------------------------------------------------------------------ setup

using Handler = int (*)(const Options&, std::ostream&);

void add_config(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON config file; flags override its values");
}

void add_seed(CLI::App* sub, Options& o) {
  sub->add_option("--seed", o.seed, "Seed for all randomness (required)");
}

void add_temperature(CLI::App* sub, Options& o) {
  sub->add_option("--temperature", o.temperature, "Softmax temperature (default 1)");
  sub->add_flag("--calibrated", o.calibrated, "Use the temperature fitted by 'calibrate'");
}

void build(CLI::App& app, Options& o, std::map<CLI::App*, Handler>& handlers) {
  app.set_version_flag("--version", version_text());
  app.require_subcommand(1);

  auto* split = app.add_subcommand("split", "Split a pair file into train/val/test");
  split->add_option("--pairs", o.pairs, "Pair file (JSON lines)");
  split->add_option("--out-prefix", o.out, "Writes <prefix>.train/.val/.test.jsonl");
  split->add_option("--ratios", o.ratios, "train,val,test fractions (default 0.8,0.1,0.1)")
      ->delimiter(',');
  split->add_option("--noise-rate", o.noise_rate,
                    "Fraction of training pairs whose teacher is swapped (default 0)");
  add_seed(split, o);
  add_config(split, o);
  handlers[split] = cmd_split;

  auto* augment = app.add_subcommand("augment", "Simulate student text from clean text");
  augment->add_option("--input", o.input, "Clean text, one text per line");
  augment->add_option("--out", o.out, "Output pair file");
  augment->add_option("--confusions", o.confusions, "Confusion table (key<TAB>replacement)");
  augment->add_option("--p-word-delete", o.p_word_delete);
  augment->add_option("--p-letter-delete", o.p_letter_delete);
  augment->add_option("--p-shorten", o.p_shorten, "Shorten a word to its initial");
  augment->add_option("--p-cut-ending", o.p_cut_ending);
  augment->add_option("--cut-max", o.cut_max, "Most characters cut from an ending");
  augment->add_option("--p-misspell", o.p_misspell);
  augment->add_option("--p-space-delete", o.p_space_delete);
  add_seed(augment, o);
  add_config(augment, o);
  handlers[augment] = cmd_augment;

  auto* lm = app.add_subcommand("lm-train", "Fit a character n-gram language model");
  lm->add_option("--pairs", o.pairs, "Training pair file; the model is fit on teacher texts");
  lm->add_option("--order", o.order, "n-gram order (default 2)")->check(CLI::PositiveNumber);
  lm->add_option("--k", o.k, "Smoothing constant (default 1)");
  lm->add_option("--out", o.out, "Output model file");
  add_config(lm, o);
  handlers[lm] = cmd_lm_train;

  auto* train = app.add_subcommand("train", "Train a translation model");
  train->add_option("--train", o.train_path, "Training pair file");
  train->add_option("--val", o.val, "Validation pair file");
  train->add_option("--out", o.out, "Output checkpoint");
  train->add_option("--history", o.history, "History CSV (default <out>.history.csv)");
  train->add_option("--loss", o.loss, "smoothed_ce or robust");
  train->add_option("--lm", o.lm, "Language model for the robust loss");
  train->add_option("--epsilon", o.epsilon, "Label smoothing");
  train->add_option("--alpha", o.alpha, "Prior probability of a noisy pair");
  train->add_option("--robust-warmup", o.robust_warmup,
                    "Epochs of plain NLL before the robust mixture starts (default 3)");
  train->add_option("--lr", o.lr, "Learning rate");
  train->add_option("--weight-decay", o.weight_decay);
  train->add_option("--dropout", o.dropout);
  train->add_option("--batch-size", o.batch_size);
  train->add_option("--epochs", o.epochs, "Maximum epochs");
  train->add_option("--patience", o.patience);
  train->add_option("--d-model", o.d_model);
  train->add_option("--heads", o.heads);
  train->add_option("--encoder-layers", o.enc_layers);
  train->add_option("--decoder-layers", o.dec_layers);
  train->add_option("--d-ffn", o.d_ffn);
  train->add_option("--max-seq-len", o.max_seq_len);
  train->add_flag("--quiet", o.quiet, "No per-epoch progress");
  add_seed(train, o);
  add_config(train, o);
  handlers[train] = cmd_train;

  auto* translate = app.add_subcommand("translate", "Translate student texts");
  translate->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  translate->add_option("--ensemble", o.ensemble, "Comma-separated checkpoints to average");
  translate->add_option("--input", o.input, "Pair file; student texts are translated");
  translate->add_option("--text", o.text_input, "Plain text file, one text per line");
  translate->add_option("--out", o.out, "Output JSON lines");
  translate->add_option("--max-len", o.max_len, "Output length cap (default 2*input+16)");
  add_temperature(translate, o);
  handlers[translate] = cmd_translate;

  auto* eval = app.add_subcommand("eval", "Score predictions against teacher texts");
  eval->add_option("--pairs", o.pairs, "Reference pair file");
  eval->add_option("--pred", o.pred, "Predictions from 'translate'");
  eval->add_flag("--identity", o.identity, "Score the Identity baseline instead");
  eval->add_option("--out", o.out, "Report prefix; writes <prefix>.json and <prefix>.txt");
  eval->add_option("--per-pair", o.per_pair, "Per-pair CSV");
  eval->add_option("--title", o.title, "Report title");
  handlers[eval] = cmd_eval;

  auto* calibrate = app.add_subcommand("calibrate", "Fit a softmax temperature on validation data");
  calibrate->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  calibrate->add_option("--val", o.val, "Validation pair file");
  calibrate->add_option("--out", o.out, "Temperature file (default <checkpoint>.temperature)");
  calibrate->add_flag("--grid", o.grid, "Grid search instead of golden section");
  handlers[calibrate] = cmd_calibrate;

  auto* calib = app.add_subcommand("calib-report", "Reliability bins, ECE and MCE");
  calib->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  calib->add_option("--pairs", o.pairs, "Pair file");
  calib->add_option("--out", o.out, "Bin CSV");
  calib->add_option("--json", o.json_out, "Also write ECE/MCE as JSON");
  calib->add_option("--bins", o.bins, "Number of bins (default 10)")->check(CLI::PositiveNumber);
  add_temperature(calib, o);
  handlers[calib] = cmd_calib_report;

  auto* reject = app.add_subcommand("reject-curve", "Metric on the retained set vs rejection");
  reject->add_option("--pairs", o.pairs, "Reference pair file");
  reject->add_option("--pred", o.pred, "Predictions with confidences");
  reject->add_option("--metric", o.metric, "ned, ed, fk or lix (default ned)");
  reject->add_option("--grid", o.rejection_grid, "Rejection fractions (default 0,0.05,...,0.95)")
      ->delimiter(',');
  reject->add_option("--out", o.out, "Output CSV");
  handlers[reject] = cmd_reject_curve;

  auto* experiment = app.add_subcommand("experiment", "Run the full comparison pipeline");
  experiment->add_option("--corpus", o.input, "Clean text, one text per line");
  experiment->add_option("--out", o.out, "Output directory");
  add_seed(experiment, o);
  add_config(experiment, o);
  handlers[experiment] = cmd_experiment;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app("Character-level translation of student writing into conventional text", "quill");
  app.failure_message(CLI::FailureMessage::help);
  Options options;
  std::map<CLI::App*, Handler> handlers;
  build(app, options, handlers);

  if (!args.empty() && !args.front().empty() && args.front().front() != '-' &&
      app.get_subcommand_no_throw(args.front()) == nullptr) {
    err << "error: unknown subcommand '" << args.front() << "'\n\n" << app.help();
    return 1;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    return handlers.at(sub)(options, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace quill::cli
