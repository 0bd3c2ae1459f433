#pragma once

#include <cstring>
#include <filesystem>
#include <map>
#include <string>

#include "topogen/core/hash.hpp"
#include "topogen/core/io.hpp"
#include "topogen/nn/network.hpp"
#include "topogen/nn/spec.hpp"

namespace topogen::nn {

// Model container: a text JSON header that fully describes the specs and the
// tensor table, followed by float32 little-endian weight blobs with per-blob
// SHA-256 checksums. One file can bundle several named networks plus
// free-form metadata (training config, normalization constants, seeds).
inline constexpr char kCheckpointMagic[] = "TGCKPT1\n";

class CheckpointWriter {
 public:
  void add_meta(const std::string& key, const json& value) { meta_[key] = value; }

  template <typename T>
  void add_network(const std::string& name, const Sequential<T>& net) {
    json net_j;
    net_j["name"] = name;
    net_j["spec"] = spec_to_json(net.spec());
    net_j["input_shape"] = net.input_shape();
    networks_.push_back(net_j);
    for (std::size_t li = 0; li < net.layer_count(); ++li) {
      const auto& p = net.layer(li);
      for (std::size_t ti = 0; ti < p.trainable.size(); ++ti)
        add_tensor(name, li, "trainable", ti, p.trainable[ti]);
      for (std::size_t ti = 0; ti < p.state.size(); ++ti)
        add_tensor(name, li, "state", ti, p.state[ti]);
    }
  }

  std::string encode() const {
    json header;
    header["meta"] = meta_;
    header["networks"] = networks_;
    header["tensors"] = tensors_;
    const std::string head = header.dump();
    std::string out(kCheckpointMagic, 8);
    append_u32(out, static_cast<std::uint32_t>(head.size()));
    out += head;
    out += blobs_;
    return out;
  }

  void save(const std::filesystem::path& path) const { write_file(path, encode()); }

 private:
  template <typename T>
  void add_tensor(const std::string& net, std::size_t layer, const char* kind, std::size_t index,
                  const Tensor<T>& t) {
    std::string blob;
    blob.reserve(t.numel() * 4);
    for (std::size_t i = 0; i < t.numel(); ++i) append_f32(blob, static_cast<float>(t[i]));
    json j;
    j["net"] = net;
    j["layer"] = layer;
    j["kind"] = kind;
    j["index"] = index;
    j["shape"] = t.shape();
    j["bytes"] = blob.size();
    j["sha256"] = sha256_hex(blob);
    tensors_.push_back(j);
    blobs_ += blob;
  }

  json meta_ = json::object();
  json networks_ = json::array();
  json tensors_ = json::array();
  std::string blobs_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(std::string bytes) : bytes_(std::move(bytes)) {
    if (bytes_.size() < 12 || bytes_.compare(0, 8, kCheckpointMagic) != 0)
      throw IntegrityError("checkpoint: bad magic");
    std::uint32_t head_len = 0;
    std::memcpy(&head_len, bytes_.data() + 8, 4);
    if (bytes_.size() < 12 + std::size_t(head_len))
      throw IntegrityError("checkpoint: truncated header");
    try {
      header_ = json::parse(bytes_.substr(12, head_len));
    } catch (const json::exception& e) {
      throw IntegrityError(std::string("checkpoint: unparsable header: ") + e.what());
    }
    std::size_t offset = 12 + head_len;
    for (const auto& t : header_.at("tensors")) {
      const std::size_t len = t.at("bytes");
      if (offset + len > bytes_.size()) throw IntegrityError("checkpoint: truncated blob");
      if (sha256_hex(bytes_.data() + offset, len) != t.at("sha256"))
        throw IntegrityError("checkpoint: blob checksum mismatch");
      offsets_.push_back(offset);
      offset += len;
    }
    if (offset != bytes_.size()) throw IntegrityError("checkpoint: trailing bytes");
  }

  static CheckpointReader open(const std::filesystem::path& path) {
    return CheckpointReader(read_file(path));
  }

  const json& meta() const { return header_.at("meta"); }

  bool has_network(const std::string& name) const {
    for (const auto& n : header_.at("networks")) {
      if (n.at("name") == name) return true;
    }
    return false;
  }

  template <typename T>
  Sequential<T> network(const std::string& name) const {
    const json* found = nullptr;
    for (const auto& n : header_.at("networks")) {
      if (n.at("name") == name) found = &n;
    }
    if (!found) throw IntegrityError("checkpoint: no network named " + name);
    Sequential<T> net(spec_from_json(found->at("spec")),
                      found->at("input_shape").get<FeatureShape>());
    const auto& tensors = header_.at("tensors");
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      const auto& tj = tensors[k];
      if (tj.at("net") != name) continue;
      const std::size_t li = tj.at("layer");
      const std::size_t ti = tj.at("index");
      if (li >= net.layer_count()) throw IntegrityError("checkpoint: tensor layer out of range");
      auto& p = net.layer(li);
      auto& dst_vec = tj.at("kind") == "trainable" ? p.trainable : p.state;
      if (ti >= dst_vec.size()) throw IntegrityError("checkpoint: tensor index out of range");
      Tensor<T>& dst = dst_vec[ti];
      if (tj.at("shape").get<std::vector<int>>() != dst.shape())
        throw IntegrityError("checkpoint: tensor shape mismatch");
      const char* src = bytes_.data() + offsets_[k];
      for (std::size_t i = 0; i < dst.numel(); ++i) {
        float f;
        std::memcpy(&f, src + 4 * i, 4);
        dst[i] = static_cast<T>(f);
      }
    }
    return net;
  }

 private:
  std::string bytes_;
  json header_;
  std::vector<std::size_t> offsets_;
};

}  // namespace topogen::nn
