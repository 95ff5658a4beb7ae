#include "workflow.hpp"

#include "quill/error.hpp"

namespace quill::cli {

Vocab vocab_for_pairs(std::span<const TextPair> pairs) {
  std::vector<std::string> corpus;
  corpus.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    corpus.push_back(p.student);
    corpus.push_back(p.teacher);
  }
  return build_vocab(corpus);
}

std::vector<std::string> teacher_texts(std::span<const TextPair> pairs) {
  std::vector<std::string> out;
  for (const auto& p : pairs) out.push_back(p.teacher);
  return out;
}

std::vector<std::string> student_texts(std::span<const TextPair> pairs) {
  std::vector<std::string> out;
  for (const auto& p : pairs) out.push_back(p.student);
  return out;
}

std::vector<Prediction> translate_all(std::span<const Translator* const> members,
                                      const Vocab& vocab, std::span<const std::string> students,
                                      double temperature, int max_len) {
  std::vector<Prediction> out;
  out.reserve(students.size());
  for (const auto& s : students) {
    const TranslationResult t = translate_ensemble(members, vocab, s, temperature, max_len);
    out.push_back({s, t.text, t.confidence});
  }
  return out;
}

std::vector<Prediction> identity_predictions(std::span<const std::string> students) {
  std::vector<Prediction> out;
  for (const auto& s : students) out.push_back({s, identity_translate(s), std::nullopt});
  return out;
}

std::vector<std::string> prediction_texts(std::span<const Prediction> predictions) {
  std::vector<std::string> out;
  for (const auto& p : predictions) out.push_back(p.prediction);
  return out;
}

std::vector<EncodedPair> encode_pairs(std::span<const TextPair> pairs, const Vocab& vocab) {
  std::vector<EncodedPair> out;
  for (const auto& p : pairs) out.push_back(encode_pair(p.student, p.teacher, vocab));
  return out;
}

std::filesystem::path temperature_sidecar(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  p += ".temperature";
  return p;
}

void write_temperature(const std::filesystem::path& path, double temperature) {
  nlohmann::json doc = {{"temperature", temperature}};
  write_file(path, doc.dump(2) + "\n");
}

double read_temperature(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    const auto doc = nlohmann::json::parse(text);
    const double t = doc.at("temperature").get<double>();
    if (!(t > 0.0)) throw InvalidArgument("temperature in " + path.string() + " must be positive");
    return t;
  } catch (const nlohmann::json::exception&) {
    throw ParseError(1, "malformed temperature file " + path.string());
  }
}

}  // namespace quill::cli
