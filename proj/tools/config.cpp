#include "config.hpp"

#include <fstream>
#include <set>

#include "quill/error.hpp"

namespace quill::cli {

namespace {

using nlohmann::json;

void check_keys(const json& section, const std::string& name, const std::set<std::string>& allowed) {
  if (!section.is_object()) throw InvalidArgument("config section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (!allowed.contains(key)) {
      throw InvalidArgument("unknown key '" + key + "' in config section '" + name + "'");
    }
  }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (auto it = section.find(key); it != section.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument(std::string("config key '") + key + "' has the wrong type");
    }
  }
}

}  // namespace

CliConfig parse_config(const json& doc) {
  check_keys(doc, "<root>", {"seed", "paths", "model", "train", "augment", "experiment"});
  CliConfig c;
  if (doc.contains("seed")) {
    std::uint64_t seed = 0;
    read(doc, "seed", seed);
    c.seed = seed;
  }
  if (auto it = doc.find("paths"); it != doc.end()) {
    check_keys(*it, "paths", {"data", "checkpoints", "lm", "outputs"});
    read(*it, "data", c.paths.data);
    read(*it, "checkpoints", c.paths.checkpoints);
    read(*it, "lm", c.paths.lm);
    read(*it, "outputs", c.paths.outputs);
  }
  if (auto it = doc.find("model"); it != doc.end()) {
    check_keys(*it, "model", {"d_model", "n_heads", "n_encoder_layers", "n_decoder_layers",
                              "d_ffn", "max_seq_len"});
    read(*it, "d_model", c.model.d_model);
    read(*it, "n_heads", c.model.n_heads);
    read(*it, "n_encoder_layers", c.model.n_encoder_layers);
    read(*it, "n_decoder_layers", c.model.n_decoder_layers);
    read(*it, "d_ffn", c.model.d_ffn);
    read(*it, "max_seq_len", c.model.max_seq_len);
  }
  if (auto it = doc.find("train"); it != doc.end()) {
    check_keys(*it, "train", {"loss", "epsilon", "alpha", "robust_warmup_epochs", "lm", "learning_rate", "weight_decay",
                              "dropout_rate", "batch_size", "max_epochs", "patience"});
    std::string loss = to_string(c.train.loss);
    read(*it, "loss", loss);
    c.train.loss = parse_loss_kind(loss);
    read(*it, "epsilon", c.train.epsilon);
    read(*it, "alpha", c.train.alpha);
    read(*it, "robust_warmup_epochs", c.train.robust_warmup_epochs);
    read(*it, "lm", c.train.lm_path);
    read(*it, "learning_rate", c.train.learning_rate);
    read(*it, "weight_decay", c.train.weight_decay);
    read(*it, "dropout_rate", c.train.dropout_rate);
    read(*it, "batch_size", c.train.batch_size);
    read(*it, "max_epochs", c.train.max_epochs);
    read(*it, "patience", c.train.patience);
  }
  if (auto it = doc.find("augment"); it != doc.end()) {
    check_keys(*it, "augment", {"p_word_delete", "p_letter_delete", "p_shorten_to_initial",
                                "p_cut_ending", "cut_ending_max_chars", "p_misspell",
                                "p_space_delete", "confusion_table"});
    read(*it, "p_word_delete", c.augment.p_word_delete);
    read(*it, "p_letter_delete", c.augment.p_letter_delete);
    read(*it, "p_shorten_to_initial", c.augment.p_shorten_to_initial);
    read(*it, "p_cut_ending", c.augment.p_cut_ending);
    read(*it, "cut_ending_max_chars", c.augment.cut_ending_max_chars);
    read(*it, "p_misspell", c.augment.p_misspell);
    read(*it, "p_space_delete", c.augment.p_space_delete);
    read(*it, "confusion_table", c.confusion_table_path);
  }
  if (auto it = doc.find("experiment"); it != doc.end()) {
    check_keys(*it, "experiment",
               {"noise_rate", "lm_order", "lm_k", "bins", "reject_at", "grid_temperature"});
    read(*it, "noise_rate", c.experiment.noise_rate);
    read(*it, "lm_order", c.experiment.lm_order);
    read(*it, "lm_k", c.experiment.lm_k);
    read(*it, "bins", c.experiment.bins);
    read(*it, "reject_at", c.experiment.reject_at);
    read(*it, "grid_temperature", c.experiment.grid_temperature);
  }
  return c;
}

CliConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const CliConfig& c) {
  json doc;
  if (c.seed) doc["seed"] = *c.seed;
  doc["model"] = {{"d_model", c.model.d_model},
                  {"n_heads", c.model.n_heads},
                  {"n_encoder_layers", c.model.n_encoder_layers},
                  {"n_decoder_layers", c.model.n_decoder_layers},
                  {"d_ffn", c.model.d_ffn},
                  {"max_seq_len", c.model.max_seq_len}};
  doc["train"] = {{"loss", to_string(c.train.loss)},
                  {"epsilon", c.train.epsilon},
                  {"alpha", c.train.alpha},
                  {"robust_warmup_epochs", c.train.robust_warmup_epochs},
                  {"learning_rate", c.train.learning_rate},
                  {"weight_decay", c.train.weight_decay},
                  {"dropout_rate", c.train.dropout_rate},
                  {"batch_size", c.train.batch_size},
                  {"max_epochs", c.train.max_epochs},
                  {"patience", c.train.patience}};
  doc["augment"] = {{"p_word_delete", c.augment.p_word_delete},
                    {"p_letter_delete", c.augment.p_letter_delete},
                    {"p_shorten_to_initial", c.augment.p_shorten_to_initial},
                    {"p_cut_ending", c.augment.p_cut_ending},
                    {"cut_ending_max_chars", c.augment.cut_ending_max_chars},
                    {"p_misspell", c.augment.p_misspell},
                    {"p_space_delete", c.augment.p_space_delete}};
  doc["experiment"] = {{"noise_rate", c.experiment.noise_rate},
                       {"lm_order", c.experiment.lm_order},
                       {"lm_k", c.experiment.lm_k},
                       {"bins", c.experiment.bins},
                       {"reject_at", c.experiment.reject_at},
                       {"grid_temperature", c.experiment.grid_temperature}};
  return doc;
}

}  // namespace quill::cli
