#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqahead/atomic_file.hpp"
#include "vqahead/binary_io.hpp"
#include "vqahead/errors.hpp"
#include "vqahead/head.hpp"

// Checkpoint format (CKP1), little-endian:
//   magic "CKP1" | u32 version=1 | u32 metadata length | metadata JSON (UTF-8)
//   | all parameter tensors as f32, flat, in GatedHeadParams tensor order.
// The metadata carries every dimension, so tensor shapes are implied.

namespace vqahead {

inline constexpr char kCheckpointMagic[4] = {'C', 'K', 'P', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json head_config_to_json(const HeadConfig& c) {
  return {{"hidden_dims", c.hidden_dims},
          {"trunk_relu", c.trunk_relu},
          {"gate_on_probs", c.gate_on_probs},
          {"dropout_rate", c.dropout_rate},
          {"loss_weight_answer", c.loss_weight_answer},
          {"loss_weight_type", c.loss_weight_type}};
}

inline nlohmann::json checkpoint_metadata(const GatedHeadParams& p, const std::string& vocab_hash,
                                          std::uint64_t seed,
                                          nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json meta = std::move(extra);
  meta["d_img"] = p.d_img;
  meta["d_txt"] = p.d_txt;
  meta["hidden_dims"] = p.hidden_dims();
  meta["n_answers"] = p.n_answers;
  meta["n_types"] = p.n_types;
  meta["trunk_relu"] = p.trunk_relu;
  meta["gate_on_probs"] = p.gate_on_probs;
  meta["vocab_hash"] = vocab_hash;
  meta["seed"] = seed;
  return meta;
}

inline std::string serialize_checkpoint(const GatedHeadParams& p, const nlohmann::json& meta) {
  validate_params(p);
  const std::string meta_str = meta.dump();
  std::string out;
  out.append(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  if (meta_str.size() > 0xFFFFFFFFull) throw validation_error("checkpoint metadata too large");
  detail::put_u32(out, static_cast<std::uint32_t>(meta_str.size()));
  out += meta_str;
  for (const Vec* tensor : p.tensors())
    for (double v : *tensor) detail::put_f32(out, static_cast<float>(v));
  return out;
}

struct LoadedCheckpoint {
  GatedHeadParams params;
  nlohmann::json meta;

  std::string vocab_hash() const { return meta.value("vocab_hash", std::string()); }
  std::uint64_t seed() const { return meta.value("seed", std::uint64_t{0}); }
};

inline LoadedCheckpoint deserialize_checkpoint(const std::string& bytes,
                                               const std::string& where = "checkpoint") {
  detail::byte_reader r(bytes);
  if (r.remaining() < 4) throw io_error(where + ": truncated before magic");
  if (std::string_view(bytes.data(), 4) != std::string_view(kCheckpointMagic, 4))
    throw io_error(where + ": bad magic (not a CKP1 file)");
  r.bytes(4);
  if (r.remaining() < 8) throw io_error(where + ": truncated header");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw io_error(where + ": unsupported version " + std::to_string(version));
  const std::uint32_t meta_len = r.u32();
  if (r.remaining() < meta_len) throw io_error(where + ": truncated metadata");
  const std::string_view meta_str = r.bytes(meta_len);

  LoadedCheckpoint ck;
  try {
    ck.meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::parse_error& e) {
    throw io_error(where + ": malformed metadata JSON: " + e.what());
  }
  for (const char* key : {"d_img", "d_txt", "hidden_dims", "n_answers", "n_types", "trunk_relu",
                          "gate_on_probs", "vocab_hash", "seed"})
    if (!ck.meta.contains(key)) throw io_error(where + ": metadata missing '" + key + "'");

  GatedHeadParams& p = ck.params;
  try {
    p.d_img = ck.meta["d_img"].get<std::size_t>();
    p.d_txt = ck.meta["d_txt"].get<std::size_t>();
    p.n_answers = ck.meta["n_answers"].get<std::size_t>();
    p.n_types = ck.meta["n_types"].get<std::size_t>();
    p.trunk_relu = ck.meta["trunk_relu"].get<bool>();
    p.gate_on_probs = ck.meta["gate_on_probs"].get<bool>();
    const auto hidden = ck.meta["hidden_dims"].get<std::vector<std::size_t>>();
    if (p.d_img == 0 || p.d_txt == 0 || p.n_answers == 0 || p.n_types == 0 || hidden.empty())
      throw io_error(where + ": metadata has a zero dimension");
    p.ln_in = LayerNorm::identity(p.input_dim());
    std::size_t cur = p.input_dim();
    for (std::size_t h : hidden) {
      if (h == 0) throw io_error(where + ": metadata has a zero dimension");
      p.trunk.push_back(Dense::zeros(cur, h));
      cur = h;
    }
    p.ln_hidden = LayerNorm::identity(cur);
    p.ans = Dense::zeros(cur, p.n_answers);
    p.type_head = Dense::zeros(cur, p.n_types);
    p.gate = Dense::zeros(p.n_types, p.n_answers);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(where + ": metadata field has wrong type: " + e.what());
  }

  std::size_t total = 0;
  for (const Vec* tensor : static_cast<const GatedHeadParams&>(p).tensors())
    total += tensor->size();
  if (r.remaining() != total * 4)
    throw io_error(where + ": tensor payload is " + std::to_string(r.remaining()) +
                   " bytes, expected " + std::to_string(total * 4));
  for (Vec* tensor : p.tensors())
    for (double& v : *tensor) v = static_cast<double>(r.f32());
  validate_params(p);
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const GatedHeadParams& p,
                            const nlohmann::json& meta) {
  write_file_atomic(path, serialize_checkpoint(p, meta));
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(detail::read_file_bytes(path), path.string());
}

}  // namespace vqahead
