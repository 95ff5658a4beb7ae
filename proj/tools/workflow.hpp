#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "artifacts.hpp"
#include "quill/checkpoint.hpp"
#include "quill/decoding.hpp"
#include "quill/vocab.hpp"

namespace quill::cli {

// Vocabulary over both sides of a pair file. The model and its language
// model are both built from the training pairs so their ids agree.
Vocab vocab_for_pairs(std::span<const TextPair> pairs);

std::vector<std::string> teacher_texts(std::span<const TextPair> pairs);
std::vector<std::string> student_texts(std::span<const TextPair> pairs);

std::vector<Prediction> translate_all(std::span<const Translator* const> members,
                                      const Vocab& vocab, std::span<const std::string> students,
                                      double temperature, int max_len);
std::vector<Prediction> identity_predictions(std::span<const std::string> students);

std::vector<std::string> prediction_texts(std::span<const Prediction> predictions);

std::vector<EncodedPair> encode_pairs(std::span<const TextPair> pairs, const Vocab& vocab);

// "<checkpoint>.temperature" holding {"temperature": T}.
std::filesystem::path temperature_sidecar(const std::filesystem::path& checkpoint);
void write_temperature(const std::filesystem::path& path, double temperature);
double read_temperature(const std::filesystem::path& path);

}  // namespace quill::cli
