#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>

#include "config.hpp"
#include "json.hpp"
#include "quill/error.hpp"

namespace quill::cli {

// A pipeline stage failed; the message starts with the stage name.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// augment -> split -> noise (train only) -> lm-train -> train
// {smoothed_ce, robust} x {clean, noisy} -> calibrate -> translate -> eval
// -> calib-report -> reject-curve. Every artifact lands under `out_dir`;
// summary.json compares the Identity baseline with each variant. Output
// bytes depend only on the corpus, the config and the seed.
nlohmann::json run_experiment(const CliConfig& config, const std::filesystem::path& corpus,
                              const std::filesystem::path& out_dir, std::uint64_t seed,
                              std::ostream& log);

}  // namespace quill::cli
