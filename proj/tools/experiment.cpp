#include "experiment.hpp"

#include <algorithm>

#include "artifacts.hpp"
#include "quill/calibration.hpp"
#include "quill/checkpoint.hpp"
#include "quill/ngram.hpp"
#include "quill/rng.hpp"
#include "quill/trainer.hpp"
#include "workflow.hpp"

namespace quill::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

template <typename F>
auto stage(const std::string& name, std::ostream& log, F&& body) {
  log << "[" << name << "]" << std::endl;
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"median", s.median}, {"sem", s.sem}}; }

json metrics_row(const std::string& name, const MetricsReport& r) {
  return {{"name", name},
          {"ed", summary_json(r.ed)},
          {"ned", summary_json(r.ned)},
          {"fk_mae", summary_json(r.fk_error)},
          {"lix_mae", summary_json(r.lix_error)}};
}

struct Variant {
  std::string name;
  LossKind loss;
  bool noisy;
};

}  // namespace

json run_experiment(const CliConfig& config, const fs::path& corpus, const fs::path& out_dir,
                    std::uint64_t seed, std::ostream& log) {
  const ExperimentSettings& xs = config.experiment;
  fs::create_directories(out_dir);

  const auto pairs = stage("augment", log, [&] {
    const std::vector<std::string> texts = read_text_lines(corpus);
    if (texts.empty()) throw InvalidArgument("corpus " + corpus.string() + " has no text lines");
    AugmentConfig aug = config.augment;
    if (!config.confusion_table_path.empty()) {
      aug.confusion_table = load_confusion_table(config.confusion_table_path);
    }
    aug.seed = derive_seed(seed, 0);
    auto generated = generate_pairs(texts, aug);
    save_pairs(generated, out_dir / "pairs.jsonl");
    return generated;
  });

  const DatasetSplit split = stage("split", log, [&] {
    DatasetSplit s = split_dataset(pairs, SplitRatios{}, derive_seed(seed, 1));
    save_pairs(s.train, out_dir / "data.train.jsonl");
    save_pairs(s.validation, out_dir / "data.val.jsonl");
    save_pairs(s.test, out_dir / "data.test.jsonl");
    return s;
  });

  const auto noisy_train = stage("noise", log, [&] {
    auto noisy = inject_pair_noise(split.train, xs.noise_rate, derive_seed(seed, 2));
    save_pairs(noisy, out_dir / "data.train_noisy.jsonl");
    return noisy;
  });

  const Vocab vocab = vocab_for_pairs(split.train);

  // Noise injection only permutes teachers, so both training sets share one
  // teacher multiset and therefore one language model.
  const NGramModel lm = stage("lm-train", log, [&] {
    const auto teachers = teacher_texts(split.train);
    NGramModel model = fit_ngram_on_texts(teachers, vocab, xs.lm_order, xs.lm_k);
    save_ngram(model, vocab, out_dir / "lm.bin");
    return model;
  });

  const std::vector<std::string> test_students = student_texts(split.test);
  const auto test_encoded = encode_pairs(split.test, vocab);
  const auto val_encoded = encode_pairs(split.validation, vocab);

  json rows = json::array();
  stage("identity", log, [&] {
    const auto predictions = identity_predictions(test_students);
    const Evaluation ev = evaluate(split.test, prediction_texts(predictions));
    const fs::path dir = out_dir / "identity";
    fs::create_directories(dir);
    save_predictions(predictions, dir / "predictions.jsonl");
    write_file(dir / "report.json", report_to_json(ev.report).dump(2) + "\n");
    write_file(dir / "report.txt", report_to_text(ev.report, "Identity"));
    rows.push_back(metrics_row("Identity", ev.report));
    return 0;
  });

  const std::vector<Variant> variants = {
      {"smoothed_ce/clean", LossKind::kSmoothedCe, false},
      {"robust/clean", LossKind::kRobust, false},
      {"smoothed_ce/noisy", LossKind::kSmoothedCe, true},
      {"robust/noisy", LossKind::kRobust, true},
  };
  const std::vector<double> grid = default_rejection_grid();

  for (const Variant& v : variants) {
    std::string dir_name = v.name;
    std::replace(dir_name.begin(), dir_name.end(), '/', '-');
    const fs::path dir = out_dir / dir_name;
    const fs::path ckpt = dir / "model.ckpt";
    fs::create_directories(dir);

    const TrainResult trained = stage("train " + v.name, log, [&] {
      TrainConfig tc = config.train;
      tc.loss = v.loss;
      tc.seed = derive_seed(seed, 3);
      const auto& data = v.noisy ? noisy_train : split.train;
      auto result = train(data, split.validation, vocab, config.model, tc,
                          v.loss == LossKind::kRobust ? &lm : nullptr, [&](const EpochRecord& e) {
                            log << "  epoch " << e.epoch << " loss " << format_double(e.train_loss)
                                << " val median NED " << format_double(e.val_median_ned)
                                << std::endl;
                          });
      save_checkpoint(result.params, vocab, ckpt);
      write_file(dir / "history.csv", result.history.to_csv());
      return result;
    });
    const ModelTranslator model(trained.params);

    const double temperature = stage("calibrate " + v.name, log, [&] {
      TemperatureFitOptions options;
      options.use_grid = xs.grid_temperature;
      const double t = fit_temperature(model, val_encoded, options).temperature;
      write_temperature(temperature_sidecar(ckpt), t);
      return t;
    });

    const auto predictions = stage("translate " + v.name, log, [&] {
      const Translator* members[] = {&model};
      auto preds = translate_all(members, vocab, test_students, temperature, 0);
      save_predictions(preds, dir / "predictions.jsonl");
      return preds;
    });

    json row = stage("eval " + v.name, log, [&] {
      const Evaluation ev = evaluate(split.test, prediction_texts(predictions));
      write_file(dir / "report.json", report_to_json(ev.report).dump(2) + "\n");
      write_file(dir / "report.txt", report_to_text(ev.report, v.name));
      write_file(dir / "per_pair.csv", per_pair_csv(ev.per_pair, predictions));
      json r = metrics_row(v.name, ev.report);
      r["loss"] = to_string(v.loss);
      r["train_data"] = v.noisy ? "noisy" : "clean";
      r["best_epoch"] = trained.history.best_epoch;
      r["epochs_run"] = trained.history.epochs.size();

      const RejectionCurve curve =
          metric_rejection_curve(ev.per_pair, predictions, CurveMetric::kNed, grid);
      write_file(dir / "rejection_ned.csv", rejection_csv(curve));
      const std::vector<double> at = {0.0, xs.reject_at};
      const RejectionCurve summary =
          metric_rejection_curve(ev.per_pair, predictions, CurveMetric::kNed, at);
      r["rejection"] = {{"fraction", xs.reject_at},
                        {"ned_full", summary.points[0].value},
                        {"ned_retained", summary.points[1].value}};
      return r;
    });

    stage("calib-report " + v.name, log, [&] {
      const auto before = calibration_report(collect_token_events(model, test_encoded, 1.0), xs.bins);
      const auto after =
          calibration_report(collect_token_events(model, test_encoded, temperature), xs.bins);
      write_file(dir / "calibration_before.csv", calibration_csv(before));
      write_file(dir / "calibration_after.csv", calibration_csv(after));
      row["temperature"] = temperature;
      row["calibration"] = {{"ece", before.ece},
                            {"mce", before.mce},
                            {"ece_scaled", after.ece},
                            {"mce_scaled", after.mce}};
      return 0;
    });
    rows.push_back(std::move(row));
  }

  json summary = {{"seed", seed},
                  {"counts",
                   {{"pairs", pairs.size()},
                    {"train", split.train.size()},
                    {"validation", split.validation.size()},
                    {"test", split.test.size()},
                    {"noisy_train", noisy_pair_count(split.train.size(), xs.noise_rate)}}},
                  {"vocab_size", vocab.size()},
                  {"config", config_to_json(config)},
                  {"rows", rows}};
  write_file(out_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace quill::cli
