#include "privlabel/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "privlabel/corpus.hpp"
#include "privlabel/error.hpp"
#include "privlabel/text.hpp"

namespace privlabel {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

constexpr char kMagic[4] = {'P', 'L', 'W', '1'};

std::string serialize_weights(std::span<const double> params) {
  std::string out(4 + 8 + params.size() * sizeof(double), '\0');
  std::memcpy(out.data(), kMagic, 4);
  const std::uint64_t n = params.size();
  std::memcpy(out.data() + 4, &n, 8);
  std::memcpy(out.data() + 12, params.data(), params.size() * sizeof(double));
  return out;
}

std::vector<double> parse_weights(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::kParse, "weights.bin: bad header");
  }
  std::uint64_t n = 0;
  std::memcpy(&n, bytes.data() + 4, 8);
  if (bytes.size() != 12 + n * sizeof(double)) {
    throw Error(ErrorKind::kParse, "weights.bin: truncated payload");
  }
  std::vector<double> params(n);
  std::memcpy(params.data(), bytes.data() + 12, n * sizeof(double));
  return params;
}

std::string serialize_vocab(const Vocabulary& vocab) {
  std::string out;
  for (const auto& t : vocab.tokens()) {
    out += t;
    out += '\n';
  }
  return out;
}

}  // namespace

std::string weights_hash(std::span<const double> params) {
  return text::hex64(text::fnv1a64(serialize_weights(params)));
}

std::filesystem::path save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& root) {
  const std::string weights = serialize_weights(ckpt.encoder.params());
  const std::string vocab = serialize_vocab(ckpt.vocab);
  nlohmann::json manifest = {{"format", "privlabel-checkpoint/1"},
                             {"kind", ckpt.kind},
                             {"encoder", ckpt.encoder.config().to_json()},
                             {"base_model_identifier", ckpt.base_model_identifier},
                             {"threshold", ckpt.threshold},
                             {"train_config", ckpt.train_config},
                             {"data_manifest", ckpt.data_manifest},
                             {"data_manifest_hash", text::hex64(text::fnv1a64(ckpt.data_manifest.dump()))},
                             {"history", ckpt.history},
                             {"weights_hash", text::hex64(text::fnv1a64(weights))},
                             {"vocab_hash", text::hex64(text::fnv1a64(vocab))}};
  const std::string manifest_text = manifest.dump(2);
  const std::string id =
      text::stable_id({manifest_text, text::hex64(text::fnv1a64(weights)), vocab});
  const auto dir = root / (ckpt.kind + "-" + id);
  std::filesystem::create_directories(dir);
  write_file(dir / "manifest.json", manifest_text + "\n");
  write_file(dir / "vocab.txt", vocab);
  write_file(dir / "weights.bin", weights);
  return dir;
}

bool is_checkpoint_dir(const std::filesystem::path& dir) {
  return std::filesystem::is_regular_file(dir / "manifest.json") &&
         std::filesystem::is_regular_file(dir / "weights.bin") &&
         std::filesystem::is_regular_file(dir / "vocab.txt");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!is_checkpoint_dir(dir)) {
    throw Error(ErrorKind::kNotFound, "no checkpoint at '" + dir.string() + "'");
  }
  const auto manifest = read_json_file(dir / "manifest.json");
  Checkpoint ck;
  ck.kind = manifest.at("kind").get<std::string>();
  ck.base_model_identifier = manifest.value("base_model_identifier", std::string());
  ck.threshold = manifest.value("threshold", 0.5);
  ck.train_config = manifest.value("train_config", nlohmann::json::object());
  ck.data_manifest = manifest.value("data_manifest", nlohmann::json::object());
  ck.history = manifest.value("history", nlohmann::json::array());

  std::vector<std::string> tokens;
  const std::string vocab_text = read_file(dir / "vocab.txt");
  std::size_t pos = 0;
  while (pos < vocab_text.size()) {
    std::size_t nl = vocab_text.find('\n', pos);
    if (nl == std::string::npos) nl = vocab_text.size();
    tokens.push_back(vocab_text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  ck.vocab = Vocabulary::from_tokens(std::move(tokens));
  const std::string weights = read_file(dir / "weights.bin");
  if (manifest.contains("weights_hash") &&
      manifest["weights_hash"].get<std::string>() != text::hex64(text::fnv1a64(weights))) {
    throw Error(ErrorKind::kValidation, "weights.bin does not match manifest hash");
  }
  auto cfg = EncoderConfig::from_json(manifest.at("encoder"));
  if (cfg.vocab_size != ck.vocab.size()) {
    throw Error(ErrorKind::kValidation, "vocab.txt size does not match encoder config");
  }
  ck.encoder = Encoder(cfg, parse_weights(weights));
  return ck;
}

}  // namespace privlabel
