#pragma once

#include <cstdint>
#include <filesystem>

#include "quill/model.hpp"
#include "quill/vocab.hpp"

namespace quill {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  ModelParams<float> params;
  Vocab vocab;
};

// Layout: "SQ2Q", u32 format version, model config, the vocabulary's
// characters, u32 tensor count, then per tensor its name, u32 rows, u32
// cols and rows*cols little-endian f32 values.
//
// load_checkpoint raises FormatVersionError for an unknown magic or
// version, ShapeMismatchError when a tensor disagrees with the stored
// config, and TruncatedFileError when the file ends early.
void save_checkpoint(const ModelParams<float>& params, const Vocab& vocab,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace quill
