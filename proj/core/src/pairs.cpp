#include "quill/pairs.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "quill/error.hpp"
#include "quill/rng.hpp"

namespace quill {

using nlohmann::json;

TextPair parse_pair_line(const std::string& line, std::size_t line_number) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_number, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line_number, "expected a JSON object");
  TextPair pair;
  for (const char* field : {"student", "teacher"}) {
    const auto it = obj.find(field);
    if (it == obj.end()) {
      throw ParseError(line_number, std::string("missing field \"") + field + "\"");
    }
    if (!it->is_string()) {
      throw ParseError(line_number, std::string("field \"") + field + "\" must be a string");
    }
  }
  pair.student = obj["student"].get<std::string>();
  pair.teacher = obj["teacher"].get<std::string>();
  if (const auto it = obj.find("noisy"); it != obj.end() && !it->is_null()) {
    if (!it->is_boolean()) throw ParseError(line_number, "field \"noisy\" must be a boolean");
    pair.noisy = it->get<bool>();
  }
  return pair;
}

std::string format_pair_line(const TextPair& pair) {
  json obj = {{"student", pair.student}, {"teacher", pair.teacher}};
  if (pair.noisy.has_value()) obj["noisy"] = *pair.noisy;
  return obj.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<TextPair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pair file " + path.string());
  std::vector<TextPair> pairs;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    pairs.push_back(parse_pair_line(line, line_number));
  }
  return pairs;
}

void save_pairs(const std::vector<TextPair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& pair : pairs) out << format_pair_line(pair) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

DatasetSplit split_dataset(const std::vector<TextPair>& pairs, SplitRatios ratios,
                           std::uint64_t seed) {
  if (!(ratios.train > 0.0 && ratios.validation > 0.0 && ratios.test > 0.0)) {
    throw InvalidArgument("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw InvalidArgument("split ratios must sum to 1");
  }
  const std::size_t n = pairs.size();
  // The small slack keeps e.g. 0.29 * 100 from flooring to 28.
  const auto portion = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = portion(ratios.validation);
  const std::size_t n_test = portion(ratios.test);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const TextPair& pair = pairs[order[i]];
    if (i < n_val) {
      split.validation.push_back(pair);
    } else if (i < n_val + n_test) {
      split.test.push_back(pair);
    } else {
      split.train.push_back(pair);
    }
  }
  return split;
}

std::size_t noisy_pair_count(std::size_t n, double rate) {
  return static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9));
}

std::vector<TextPair> inject_pair_noise(const std::vector<TextPair>& pairs, double rate,
                                        std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidArgument("noise rate must be in [0, 1]");
  std::vector<TextPair> out = pairs;
  const std::size_t n = pairs.size();
  const std::size_t m = noisy_pair_count(n, rate);
  if (m == 0) return out;
  if (n < 2) throw InvalidArgument("pair noise needs at least 2 pairs");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> selected(order.begin(), order.begin() + static_cast<long>(m));

  std::vector<std::size_t> source(m);
  if (m == 1) {
    // A lone selected pair borrows from any other pair.
    const std::size_t other = order[1 + rng.below(n - 1)];
    source[0] = other;
  } else {
    // Sattolo's algorithm: a uniformly random cyclic permutation, hence a
    // derangement of the selected subset.
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = m - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.below(i));
      std::swap(perm[i], perm[j]);
    }
    for (std::size_t i = 0; i < m; ++i) source[i] = selected[perm[i]];
  }
  for (std::size_t i = 0; i < m; ++i) {
    out[selected[i]].teacher = pairs[source[i]].teacher;
    out[selected[i]].noisy = true;
  }
  return out;
}

}  // namespace quill
