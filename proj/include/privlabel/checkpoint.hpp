#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "privlabel/encoder.hpp"
#include "privlabel/tokenizer.hpp"

namespace privlabel {

// On-disk layout of a model directory:
//   manifest.json  kind, encoder config, training config, data manifest hash,
//                  threshold, loss history, weights hash
//   vocab.txt      one token per line, specials first
//   weights.bin    "PLW1" magic, u64 count, then little-endian doubles
// The directory name is the content hash of the three payloads.
struct Checkpoint {
  std::string kind;  // "mlm" or "cross_encoder"
  Vocabulary vocab;
  Encoder encoder;
  std::string base_model_identifier;
  double threshold = 0.5;
  nlohmann::json train_config = nlohmann::json::object();
  nlohmann::json data_manifest = nlohmann::json::object();
  nlohmann::json history = nlohmann::json::array();
};

// Writes under root/<content-hash>/ and returns that directory. Saving the
// same model twice yields the same directory.
std::filesystem::path save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& root);
Checkpoint load_checkpoint(const std::filesystem::path& dir);
bool is_checkpoint_dir(const std::filesystem::path& dir);

std::string weights_hash(std::span<const double> params);

}  // namespace privlabel
