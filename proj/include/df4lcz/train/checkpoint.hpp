#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "df4lcz/data/lczt.hpp"
#include "df4lcz/errors.hpp"
#include "df4lcz/graph/gcn.hpp"
#include "df4lcz/spectral/resnet3d.hpp"

namespace df4lcz {

/// google = scene-graph GCN, sentinel = spectral 3D ResNet.
enum class StreamKind { google, sentinel };

inline const char* to_string(StreamKind s) { return s == StreamKind::google ? "google" : "sentinel"; }

inline StreamKind parse_stream(const std::string& s) {
  if (s == "google") return StreamKind::google;
  if (s == "sentinel") return StreamKind::sentinel;
  throw DomainError("unknown stream '" + s + "' (expected google or sentinel)");
}

inline nlohmann::json to_json(const ResNet3dConfig& c) {
  return {{"stem", c.widths.stem},   {"blocks", c.widths.blocks}, {"block_strides", c.block_strides},
          {"num_classes", c.num_classes}, {"in_channels", c.in_channels}, {"kernel", c.kernel}};
}

inline nlohmann::json to_json(const GcnConfig& c) {
  return {{"in_features", c.in_features}, {"hidden", c.hidden}, {"layers", c.layers}, {"num_classes", c.num_classes}};
}

/// Frozen weights of one stream. Layout on disk: "LCZK", u64 LE header
/// length, JSON header, then one LCZT blob per tensor at the listed offsets
/// (relative to the end of the header).
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  StreamKind stream = StreamKind::sentinel;
  nlohmann::json architecture;
  std::vector<std::pair<std::string, Tensor>> params;
  std::vector<std::pair<std::string, Tensor>> buffers;

  std::size_t num_classes() const { return architecture.at("num_classes").get<std::size_t>(); }
};

inline Checkpoint to_checkpoint(const ResNet3d<float>& m) {
  Checkpoint ck;
  ck.stream = StreamKind::sentinel;
  ck.architecture = to_json(m.config());
  for (const auto& e : m.params().entries()) ck.params.emplace_back(e.name, e.value);
  for (const auto& [k, v] : m.buffers()) ck.buffers.emplace_back(k, v);
  return ck;
}

inline Checkpoint to_checkpoint(const GcnModel<float>& m) {
  Checkpoint ck;
  ck.stream = StreamKind::google;
  ck.architecture = to_json(m.config());
  for (const auto& e : m.params().entries()) ck.params.emplace_back(e.name, e.value);
  return ck;
}

namespace detail {

template <class Store>
void restore(Store& store, const std::vector<std::pair<std::string, Tensor>>& from, const char* what) {
  if (from.size() != store.size()) {
    throw ConsistencyError(std::string("checkpoint has ") + std::to_string(from.size()) + " " + what + ", model expects " +
                           std::to_string(store.size()));
  }
  for (const auto& [name, t] : from) {
    auto& dst = store.value(name);
    if (dst.shape() != t.shape()) {
      throw ConsistencyError("checkpoint tensor " + name + " has shape " + shape_str(t.shape()) + ", model expects " +
                             shape_str(dst.shape()));
    }
    dst = t;
  }
}

}  // namespace detail

inline ResNet3d<float> resnet_from_checkpoint(const Checkpoint& ck) {
  if (ck.stream != StreamKind::sentinel) throw ConsistencyError("checkpoint is not a sentinel stream");
  ResNet3dConfig cfg;
  try {
    const auto& a = ck.architecture;
    cfg.widths.stem = a.at("stem").get<std::size_t>();
    cfg.widths.blocks = a.at("blocks").get<std::array<std::size_t, 3>>();
    cfg.block_strides = a.at("block_strides").get<std::array<std::size_t, 3>>();
    cfg.num_classes = a.at("num_classes").get<std::size_t>();
    cfg.in_channels = a.at("in_channels").get<std::size_t>();
    cfg.kernel = a.at("kernel").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint architecture: ") + e.what());
  }
  ResNet3d<float> m(cfg);
  detail::restore(m.params(), ck.params, "parameters");
  if (ck.buffers.size() != m.buffers().size()) throw ConsistencyError("checkpoint buffer count mismatch");
  for (const auto& [name, t] : ck.buffers) {
    auto it = m.buffers().find(name);
    if (it == m.buffers().end() || it->second.shape() != t.shape()) {
      throw ConsistencyError("checkpoint buffer " + name + " does not fit the model");
    }
    it->second = t;
  }
  return m;
}

inline GcnModel<float> gcn_from_checkpoint(const Checkpoint& ck) {
  if (ck.stream != StreamKind::google) throw ConsistencyError("checkpoint is not a google stream");
  GcnConfig cfg;
  try {
    const auto& a = ck.architecture;
    cfg.in_features = a.at("in_features").get<std::size_t>();
    cfg.hidden = a.at("hidden").get<std::size_t>();
    cfg.layers = a.at("layers").get<std::size_t>();
    cfg.num_classes = a.at("num_classes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint architecture: ") + e.what());
  }
  GcnModel<float> m(cfg);
  detail::restore(m.params(), ck.params, "parameters");
  return m;
}

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  nlohmann::json head;
  head["format_version"] = Checkpoint::kFormatVersion;
  head["stream"] = to_string(ck.stream);
  head["architecture"] = ck.architecture;
  head["tensors"] = nlohmann::json::array();
  std::ostringstream blobs;
  auto add = [&](const std::string& name, const Tensor& t, const char* kind) {
    const auto offset = static_cast<std::size_t>(blobs.tellp());
    write_lczt(blobs, t);
    head["tensors"].push_back({{"name", name},
                               {"kind", kind},
                               {"shape", t.shape()},
                               {"offset", offset},
                               {"nbytes", static_cast<std::size_t>(blobs.tellp()) - offset}});
  };
  for (const auto& [n, t] : ck.params) add(n, t, "param");
  for (const auto& [n, t] : ck.buffers) add(n, t, "buffer");
  const std::string h = head.dump();
  out.write("LCZK", 4);
  unsigned char len[8];
  detail::store_le(static_cast<std::uint64_t>(h.size()), len);
  out.write(reinterpret_cast<const char*>(len), 8);
  out << h << blobs.str();
  if (!out) throw InputError("checkpoint: write failed");
}

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ck);
}

inline Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  detail::read_exact(in, magic, 4, "checkpoint magic");
  if (std::memcmp(magic, "LCZK", 4) != 0) throw FormatError("checkpoint: bad magic");
  unsigned char len[8];
  detail::read_exact(in, len, 8, "checkpoint header length");
  const auto n = detail::load_le<std::uint64_t>(len);
  if (n > (1u << 26)) throw FormatError("checkpoint: implausible header length " + std::to_string(n));
  std::string h(n, '\0');
  detail::read_exact(in, h.data(), n, "checkpoint header");
  std::string blobs((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint ck;
  try {
    const auto head = nlohmann::json::parse(h);
    if (head.at("format_version").get<int>() != Checkpoint::kFormatVersion) {
      throw FormatError("checkpoint: unsupported format_version " + head.at("format_version").dump());
    }
    ck.stream = parse_stream(head.at("stream").get<std::string>());
    ck.architecture = head.at("architecture");
    for (const auto& t : head.at("tensors")) {
      const auto offset = t.at("offset").get<std::size_t>(), nbytes = t.at("nbytes").get<std::size_t>();
      if (offset + nbytes > blobs.size()) throw FormatError("checkpoint: tensor " + t.at("name").dump() + " truncated");
      std::istringstream blob(blobs.substr(offset, nbytes));
      auto value = read_lczt_as<float>(blob);
      if (value.shape() != t.at("shape").get<Shape>()) throw FormatError("checkpoint: shape mismatch in header");
      auto& dst = t.at("kind").get<std::string>() == "buffer" ? ck.buffers : ck.params;
      dst.emplace_back(t.at("name").get<std::string>(), std::move(value));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  return ck;
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace df4lcz
