// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset, e.g. `quill_acceptance 1 4 10`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "corpus.hpp"
#include "experiment.hpp"
#include "oracles.hpp"
#include "quill/augment.hpp"
#include "quill/calibration.hpp"
#include "quill/decoding.hpp"
#include "quill/grad_check.hpp"
#include "quill/loss.hpp"
#include "quill/metrics.hpp"
#include "quill/ngram.hpp"
#include "quill/pairs.hpp"
#include "quill/rng.hpp"
#include "quill/trainer.hpp"

namespace fs = std::filesystem;
using namespace quill;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ------------------------------------------------------------ desk corpus

// Synthetic sentences -> default augmentation -> 80/10/10 split. The
// vocabulary comes from the training split only, as in the pipeline.
struct DeskData {
  DatasetSplit split;
  Vocab vocab;
};

DeskData desk_data(std::size_t sentences) {
  AugmentConfig aug = AugmentConfig::defaults();
  aug.seed = 5;
  const auto pairs = generate_pairs(testing::synthetic_sentences(sentences, 11), aug);
  DeskData d;
  d.split = split_dataset(pairs, SplitRatios{}, 3);
  std::vector<std::string> texts;
  for (const auto& p : d.split.train) {
    texts.push_back(p.student);
    texts.push_back(p.teacher);
  }
  d.vocab = build_vocab(texts);
  return d;
}

ModelConfig desk_model(const Vocab& vocab) {
  ModelConfig m;
  m.vocab_size = vocab.size();
  m.d_model = 64;
  m.n_heads = 4;
  m.n_encoder_layers = 2;
  m.n_decoder_layers = 2;
  m.d_ffn = 256;
  m.max_seq_len = 96;
  return m;
}

TrainConfig desk_train(std::uint64_t seed, int epochs) {
  TrainConfig t;
  t.learning_rate = 3e-3;
  t.batch_size = 8;
  t.max_epochs = epochs;
  t.patience = 8;
  t.seed = seed;
  return t;
}

std::vector<std::string> teachers(std::span<const TextPair> pairs) {
  std::vector<std::string> out;
  for (const auto& p : pairs) out.push_back(p.teacher);
  return out;
}

void progress(const char* tag, const EpochRecord& e) {
  std::fprintf(stderr, "  [%s] epoch %d  loss %.3f  val median NED %.4f  mean %.4f\n", tag, e.epoch,
               e.train_loss, e.val_median_ned, e.val_mean_ned);
}

// One smoothed-CE model trained on the clean desk corpus, shared by the
// denoising, readability, temperature and rejection criteria.
struct DeskRun {
  DeskData data;
  ModelParams<float> params;
  std::vector<TranslationResult> test_out;
  double train_seconds = 0.0;
};

const DeskRun& desk_run() {
  static const DeskRun run = [] {
    DeskRun r;
    r.data = desk_data(2500);
    const auto t0 = Clock::now();
    TrainResult tr = train(r.data.split.train, r.data.split.validation, r.data.vocab,
                           desk_model(r.data.vocab), desk_train(1, 40), nullptr,
                           [](const EpochRecord& e) { progress("desk", e); });
    r.train_seconds = seconds_since(t0);
    r.params = std::move(tr.params);
    const ModelTranslator model(r.params);
    for (const auto& p : r.data.split.test) r.test_out.push_back(translate(model, r.data.vocab, p.student));
    return r;
  }();
  return run;
}

// ------------------------------------------------------------- criteria

std::u32string random_unicode(Rng& rng, std::size_t max_len) {
  // Mostly a small alphabet so that strings share material; the rest are
  // arbitrary scalar values from the BMP and the astral planes.
  static const std::u32string common = U"abcdeæøå ";
  std::u32string s;
  const std::size_t len = rng.below(max_len + 1);
  for (std::size_t i = 0; i < len; ++i) {
    const std::uint64_t kind = rng.below(10);
    char32_t cp;
    if (kind < 7) {
      cp = common[rng.below(common.size())];
    } else if (kind < 9) {
      do cp = static_cast<char32_t>(rng.below(0x10000)); while (cp >= 0xD800 && cp <= 0xDFFF);
    } else {
      cp = static_cast<char32_t>(0x10000 + rng.below(0x100000));
    }
    s += cp;
  }
  return s;
}

Verdict edit_distance_oracle() {
  const auto t0 = Clock::now();
  Rng rng(1);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_unicode(rng, 30);
    const auto b = random_unicode(rng, 30);
    if (edit_distance(a, b) != testing::dp_edit_distance(a, b)) ++mismatches;
  }
  int axiom_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_unicode(rng, 30);
    const auto b = random_unicode(rng, 30);
    const auto c = random_unicode(rng, 30);
    const std::size_t ab = edit_distance(a, b);
    const bool ok = edit_distance(a, a) == 0 && (ab == 0) == (a == b) && ab == edit_distance(b, a) &&
                    edit_distance(a, c) <= ab + edit_distance(b, c);
    if (!ok) ++axiom_failures;
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && axiom_failures == 0 && s < 10.0,
          std::to_string(mismatches) + " oracle mismatches, " + std::to_string(axiom_failures) +
              " axiom failures, " + fmt("%.2f s", s)};
}

Verdict gradient_checks() {
  const auto t0 = Clock::now();
  std::string detail;
  bool pass = true;
  for (LossKind kind : {LossKind::kSmoothedCe, LossKind::kRobust}) {
    GradCheckOptions o;
    o.loss = kind;
    o.samples = 200;
    o.step = 1e-5;
    o.tolerance = 1e-4;
    const GradCheckReport r = grad_check(micro_config(), o);
    pass = pass && r.passed() && r.entries.size() >= 200;
    detail += to_string(kind) + " max rel err " + fmt("%.2e", r.max_rel_error) + " over " +
              std::to_string(r.entries.size()) + " params; ";
  }
  const double s = seconds_since(t0);
  pass = pass && s < 120.0;
  return {pass, detail + fmt("%.1f s", s)};
}

Logits<double> random_logits(Rng& rng, int rows, int k) {
  Logits<double> z(rows, k);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < k; ++j) z(i, j) = rng.uniform(-4.0, 4.0);
  return z;
}

Verdict robust_algebra() {
  Rng rng(3);
  double worst0 = 0.0;
  double worst1 = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = 1 + static_cast<int>(rng.below(8));
    const int k = 2 + static_cast<int>(rng.below(10));
    const Logits<double> z = random_logits(rng, rows, k);
    TokenSeq y;
    for (int i = 0; i < rows; ++i) y.push_back(static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(k))));
    const double lm = -rng.uniform(0.1, 40.0);
    const double plain = smoothed_ce_loss(z, y, 0.0).loss;
    worst0 = std::max(worst0, std::abs(robust_nll(z, y, lm, 0.0).loss - plain));
    worst1 = std::max(worst1, std::abs(robust_nll(z, y, lm, 1.0).loss + lm));
  }
  // One token with p_model = 0.25 against p_lm = 0.1 at alpha = 0.25.
  Logits<double> z(1, 2);
  z << std::log(0.25), std::log(0.75);
  const TokenSeq y = {0};
  const LossOutput hand = robust_nll(z, y, std::log(0.1), 0.25);
  const double loss_err = std::abs(hand.loss - (-std::log(0.2125)));
  const double w_err = std::abs(hand.responsibility.value_or(-1.0) - 0.882353);
  const bool pass = worst0 <= 1e-8 && worst1 <= 1e-8 && loss_err <= 1e-6 && w_err <= 1e-6;
  return {pass, "alpha=0 max diff " + fmt("%.1e", worst0) + ", alpha=1 max diff " + fmt("%.1e", worst1) +
                    ", hand loss " + fmt("%.6f", hand.loss) + ", w " +
                    fmt("%.6f", hand.responsibility.value_or(-1.0))};
}

Verdict ngram_normalization() {
  Rng rng(4);
  const int vocab = 12;
  double worst = 0.0;
  int histories = 0;
  for (int order = 1; order <= 6; ++order) {
    std::vector<TokenSeq> seqs;
    for (int s = 0; s < 40; ++s) {
      TokenSeq content;
      const std::size_t len = 1 + rng.below(15);
      for (std::size_t i = 0; i < len; ++i) content.push_back(static_cast<TokenId>(4 + rng.below(vocab - 4)));
      seqs.push_back(lm_padded(content, order));
    }
    const NGramModel m = fit_ngram(seqs, order, 0.5 + rng.uniform(), vocab);
    for (int h = 0; h < 100; ++h) {
      TokenSeq history;
      if (h % 2 == 0 && order > 1) {
        // a context that occurs in the training data
        const TokenSeq& s = seqs[rng.below(seqs.size())];
        const std::size_t end = static_cast<std::size_t>(order - 1) + rng.below(s.size() - static_cast<std::size_t>(order - 1));
        history.assign(s.begin() + static_cast<std::ptrdiff_t>(end - static_cast<std::size_t>(order - 1)),
                       s.begin() + static_cast<std::ptrdiff_t>(end));
      } else {
        for (int i = 0; i < order - 1; ++i) history.push_back(static_cast<TokenId>(rng.below(vocab)));
      }
      double total = 0.0;
      for (TokenId w = 0; w < vocab; ++w) total += m.prob_token(w, history);
      worst = std::max(worst, std::abs(total - 1.0));
      ++histories;
    }
  }
  // Toy corpus [a, b, EOS] over K = 3 with k = 1; BOS sits outside the
  // predicted vocabulary.
  const TokenId a = 0, b = 1, eos = 2, bos = 3;
  const auto toy = [&](int order) {
    TokenSeq padded(static_cast<std::size_t>(order - 1), bos);
    padded.insert(padded.end(), {a, b, eos});
    return fit_ngram(std::vector<TokenSeq>{padded}, order, 1.0, 3, bos);
  };
  const double pa = toy(1).prob_token(a, {});
  const TokenSeq after_a = {a};
  const double pba = toy(2).prob_token(b, after_a);
  const bool hand = std::abs(pa - 1.0 / 3.0) < 1e-15 && std::abs(pba - 2.0 / 3.0) < 1e-15;
  return {worst <= 1e-9 && hand, std::to_string(histories) + " histories, max |sum - 1| " + fmt("%.1e", worst) +
                                     ", p(a) " + fmt("%.15f", pa) + ", p(b|a) " + fmt("%.15f", pba)};
}

double identity_mean_ned(std::span<const TextPair> pairs) {
  std::vector<double> v;
  for (const auto& p : pairs) v.push_back(normalized_ed(identity_translate(p.student), p.teacher));
  return mean(v);
}

Verdict desk_denoising() {
  const DeskRun& r = desk_run();
  const auto& test = r.data.split.test;
  std::vector<double> neds;
  for (std::size_t i = 0; i < test.size(); ++i) neds.push_back(normalized_ed(r.test_out[i].text, test[i].teacher));
  const double model = mean(neds);
  const double identity = identity_mean_ned(test);
  const bool pass = model <= 0.7 * identity && r.train_seconds <= 1800.0;
  return {pass, std::to_string(r.data.split.train.size() + r.data.split.validation.size() + test.size()) +
                    " sentences; test mean NED " + fmt("%.4f", model) + " vs Identity " + fmt("%.4f", identity) +
                    " (ratio " + fmt("%.3f", model / identity) + "), training " + fmt("%.0f s", r.train_seconds)};
}

Verdict robustness_under_noise() {
  const DeskData data = desk_data(2500);
  const auto noisy_train = inject_pair_noise(data.split.train, 0.25, 17);
  const auto train_teachers = teachers(noisy_train);
  const NGramModel lm = fit_ngram_on_texts(train_teachers, data.vocab, 2, 1.0);

  const auto mean_ed = [&](const ModelParams<float>& params) {
    const ModelTranslator model(params);
    std::vector<double> eds;
    for (const auto& p : data.split.test) {
      eds.push_back(static_cast<double>(edit_distance(translate(model, data.vocab, p.student).text, p.teacher)));
    }
    return mean(eds);
  };

  std::vector<double> ce_eds, robust_eds;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig tc = desk_train(seed, 40);
    TrainResult ce = train(noisy_train, data.split.validation, data.vocab, desk_model(data.vocab), tc, nullptr,
                           [](const EpochRecord& e) { progress("noisy ce", e); });
    tc.loss = LossKind::kRobust;
    tc.alpha = 0.25;
    TrainResult rb = train(noisy_train, data.split.validation, data.vocab, desk_model(data.vocab), tc, &lm,
                           [](const EpochRecord& e) { progress("noisy robust", e); });
    ce_eds.push_back(mean_ed(ce.params));
    robust_eds.push_back(mean_ed(rb.params));
    per_seed += " seed " + std::to_string(seed) + ": ce " + fmt("%.3f", ce_eds.back()) + " robust " +
                fmt("%.3f", robust_eds.back()) + ";";
  }
  std::vector<double> identity_eds;
  for (const auto& p : data.split.test) {
    identity_eds.push_back(static_cast<double>(edit_distance(identity_translate(p.student), p.teacher)));
  }
  const double ce = median(ce_eds);
  const double robust = median(robust_eds);
  return {robust <= 1.05 * ce, "median mean ED robust " + fmt("%.3f", robust) + " vs smoothed CE " + fmt("%.3f", ce) +
                                   " (ratio " + fmt("%.3f", robust / ce) + "), Identity " +
                                   fmt("%.3f", mean(identity_eds)) + ";" + per_seed};
}

Verdict readability() {
  const DeskRun& r = desk_run();
  const auto& test = r.data.split.test;
  std::vector<double> fk_m, fk_i, fk_t, lix_m, lix_i, lix_t;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const TextStats m = text_stats(r.test_out[i].text);
    const TextStats s = text_stats(test[i].student);
    const TextStats t = text_stats(test[i].teacher);
    fk_m.push_back(flesch_kincaid(m));
    fk_i.push_back(flesch_kincaid(s));
    fk_t.push_back(flesch_kincaid(t));
    lix_m.push_back(lix(m));
    lix_i.push_back(lix(s));
    lix_t.push_back(lix(t));
  }
  const double a = mae(fk_m, fk_t), b = mae(fk_i, fk_t), c = mae(lix_m, lix_t), d = mae(lix_i, lix_t);
  return {a < b && c < d, "FK MAE " + fmt("%.3f", a) + " vs Identity " + fmt("%.3f", b) + ", LIX MAE " +
                              fmt("%.3f", c) + " vs Identity " + fmt("%.3f", d)};
}

Verdict temperature_scaling() {
  const DeskRun& r = desk_run();
  const ModelTranslator model(r.params);
  std::vector<EncodedPair> val;
  for (const auto& p : r.data.split.validation) val.push_back(encode_pair(p.student, p.teacher, r.data.vocab));
  const double t = fit_temperature(model, val).temperature;
  const double before = calibration_report(collect_token_events(model, val, 1.0)).ece;
  const double after = calibration_report(collect_token_events(model, val, t)).ece;

  std::size_t changed = 0;
  const auto check_set = [&](std::span<const TextPair> pairs) {
    for (const auto& p : pairs) {
      const TranslationResult x = translate(model, r.data.vocab, p.student, 1.0);
      const TranslationResult y = translate(model, r.data.vocab, p.student, t);
      if (x.tokens != y.tokens || x.text != y.text) ++changed;
    }
  };
  check_set(r.data.split.validation);
  check_set(r.data.split.test);
  return {after <= before && changed == 0,
          "T " + fmt("%.4f", t) + ", validation ECE " + fmt("%.4f", before) + " -> " + fmt("%.4f", after) + ", " +
              std::to_string(changed) + " translations changed"};
}

Verdict rejection() {
  const DeskRun& r = desk_run();
  const auto& test = r.data.split.test;
  std::vector<ScoredItem> items;
  for (std::size_t i = 0; i < test.size(); ++i) {
    items.push_back({r.test_out[i].confidence, normalized_ed(r.test_out[i].text, test[i].teacher)});
  }
  const std::vector<double> grid = {0.0, 0.25};
  const RejectionCurve curve = rejection_curve(items, Aggregate::kMean, grid, "ned");
  const double full = curve.points[0].value;
  const double kept = curve.points[1].value;

  const std::vector<ScoredItem> hand_items = {{-0.1, 0.0}, {-2.0, 0.5}};
  const std::vector<double> hand_grid = {0.0, 0.5};
  const RejectionCurve hand = rejection_curve(hand_items, Aggregate::kMean, hand_grid);
  const bool hand_ok = hand.points[0].value == 0.25 && hand.points[1].value == 0.0;
  return {kept <= full && hand_ok, "test mean NED " + fmt("%.4f", full) + " at r=0, " + fmt("%.4f", kept) +
                                       " at r=0.25; hand example " + (hand_ok ? "exact" : "wrong")};
}

Verdict calibration_arithmetic() {
  const std::vector<TokenEvent> hand = {{0.9, true}, {0.9, false}, {0.6, true}, {0.6, true}};
  const CalibrationReport h = calibration_report(hand, 10);
  const bool hand_ok = std::abs(h.ece - 0.4) < 1e-12 && std::abs(h.mce - 0.4) < 1e-12;
  Rng rng(10);
  int violations = 0;
  for (int s = 0; s < 100; ++s) {
    std::vector<TokenEvent> events;
    const std::size_t n = 1 + rng.below(200);
    for (std::size_t i = 0; i < n; ++i) events.push_back({rng.uniform(), rng.bernoulli(rng.uniform())});
    const CalibrationReport c = calibration_report(events, 1 + static_cast<int>(rng.below(20)));
    if (c.ece > c.mce + 1e-12) ++violations;
  }
  return {hand_ok && violations == 0, "hand ECE " + fmt("%.15g", h.ece) + ", MCE " + fmt("%.15g", h.mce) + "; " +
                                          std::to_string(violations) + " of 100 random sets with ECE > MCE"};
}

Verdict readability_hand_values() {
  const TextStats a = text_stats("We learn about Earth in Science.");
  const TextStats b = text_stats("The dinosaur runs");
  const bool values = std::abs(flesch_kincaid(a) - 2.483333) < 1e-6 && std::abs(flesch_kincaid(b) - 5.246667) < 1e-6 &&
                      std::abs(lix(a) - 22.666667) < 1e-6 && std::abs(lix(b) - 36.333333) < 1e-6;
  Rng rng(12);
  int out_of_bounds = 0;
  static const std::string pieces[] = {"a", "extraordinarily", "I", "go", ".", "!", " ", "  ", "?", "xyz",
                                       "unbelievably", "ok", "...", "rhythm"};
  for (int i = 0; i < 2000; ++i) {
    std::string text;
    const std::size_t n = rng.below(400);
    for (std::size_t j = 0; j < n; ++j) {
      text += pieces[rng.below(std::size(pieces))];
      if (rng.bernoulli(0.7)) text += ' ';
    }
    const TextStats s = text_stats(text);
    const double fk = flesch_kincaid(s), lx = lix(s);
    if (fk < -3.4 || fk > 36.0 || lx < 0.0 || lx > 110.0) ++out_of_bounds;
  }
  return {values && out_of_bounds == 0,
          "FK " + fmt("%.6f", flesch_kincaid(a)) + "/" + fmt("%.6f", flesch_kincaid(b)) + ", LIX " + fmt("%.6f", lix(a)) +
              "/" + fmt("%.6f", lix(b)) + "; " + std::to_string(out_of_bounds) + " of 2000 random texts out of bounds"};
}

// Relative path -> bytes for every regular file below `root`.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = testing::slurp(e.path());
  }
  return files;
}

Verdict determinism() {
  testing::TempDir dir("acceptance-determinism");
  {
    std::ofstream corpus(dir / "corpus.txt");
    for (const auto& s : testing::synthetic_sentences(120, 21)) corpus << s << '\n';
  }
  cli::CliConfig cfg;
  cfg.model.d_model = 16;
  cfg.model.n_heads = 2;
  cfg.model.n_encoder_layers = 1;
  cfg.model.n_decoder_layers = 1;
  cfg.model.d_ffn = 32;
  cfg.model.max_seq_len = 96;
  cfg.train.max_epochs = 2;
  cfg.train.batch_size = 8;
  cfg.train.learning_rate = 3e-3;

  std::ostringstream log;
  cli::run_experiment(cfg, dir / "corpus.txt", dir / "run1", 99, log);
  cli::run_experiment(cfg, dir / "corpus.txt", dir / "run2", 99, log);
  const auto a = snapshot(dir / "run1");
  const auto b = snapshot(dir / "run2");

  std::size_t checkpoints = 0, reports = 0, differing = 0;
  std::set<std::string> names;
  for (const auto& [k, _] : a) names.insert(k);
  for (const auto& [k, _] : b) names.insert(k);
  for (const auto& name : names) {
    const auto ia = a.find(name), ib = b.find(name);
    if (ia == a.end() || ib == b.end() || ia->second != ib->second) ++differing;
    if (name.ends_with(".ckpt")) ++checkpoints;
    if (name.find("report") != std::string::npos) ++reports;
  }
  return {differing == 0 && checkpoints >= 4 && reports > 0,
          std::to_string(names.size()) + " files (" + std::to_string(checkpoints) + " checkpoints, " +
              std::to_string(reports) + " reports), " + std::to_string(differing) + " differ"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "edit-distance oracle", edit_distance_oracle},
      {2, "gradient checks", gradient_checks},
      {3, "robust-likelihood algebra", robust_algebra},
      {4, "n-gram normalization", ngram_normalization},
      {5, "desk-scale denoising", desk_denoising},
      {6, "robustness under pair noise", robustness_under_noise},
      {7, "readability estimation", readability},
      {8, "temperature scaling", temperature_scaling},
      {9, "rejection curve", rejection},
      {10, "calibration arithmetic", calibration_arithmetic},
      {11, "FK/LIX hand values and clips", readability_hand_values},
      {12, "pipeline determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
