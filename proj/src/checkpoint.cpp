#include "vise/checkpoint.hpp"

#include "vise/image.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace vise::checkpoint {

namespace {

constexpr char kMagicPrefix[] = "VISEW";
constexpr char kMagic[] = "VISEW001";
constexpr std::size_t kMagicSize = 8;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
                             std::uint32_t{p[3]} << 24;
  return std::bit_cast<float>(bits);
}

[[noreturn]] void corrupt(const std::string& why) { throw CheckpointError(ErrorCode::Corrupt, "corrupt weight file: " + why); }

Json meta_to_json(const Metadata& m) {
  Json j{{"representation", m.representation},
         {"key_points", m.key_points},
         {"scale", m.scale},
         {"section_lengths", m.section_lengths},
         {"preprocess", m.preprocess},
         {"cameras", m.cameras},
         {"saved_camera_poses", m.saved_poses},
         {"extra", m.extra}};
  if (m.fiducial) {
    j["fiducial"] = Json{{"pose", m.fiducial->pose}, {"side", m.fiducial->side}};
  } else {
    j["fiducial"] = nullptr;
  }
  return j;
}

Metadata meta_from_json(const Json& j) {
  Metadata m;
  m.representation = j.at("representation").get<geometry::Representation>();
  m.key_points = j.at("key_points").get<std::size_t>();
  m.scale = j.at("scale").get<double>();
  m.section_lengths = j.at("section_lengths").get<std::vector<double>>();
  m.preprocess = j.at("preprocess").get<imgproc::PreprocessSpec>();
  const auto& cams = j.at("cameras");
  const auto& poses = j.at("saved_camera_poses");
  for (std::size_t i = 0; i < 2; ++i) {
    m.cameras[i] = cams.at(i).get<camera::CameraModel>();
    m.saved_poses[i] = poses.at(i).get<geometry::RigidTransform>();
  }
  if (!j.at("fiducial").is_null()) {
    m.fiducial = Fiducial{j.at("fiducial").at("pose").get<geometry::RigidTransform>(),
                          j.at("fiducial").at("side").get<double>()};
  }
  if (j.contains("extra")) m.extra = j.at("extra");
  return m;
}

}  // namespace

std::string to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "io";
    case ErrorCode::BadMagic: return "bad_magic";
    case ErrorCode::UnsupportedVersion: return "unsupported_version";
    case ErrorCode::Corrupt: return "corrupt";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::RepresentationMismatch: return "representation_mismatch";
  }
  return "unknown";
}

std::vector<std::uint8_t> encode(nn::VggSBn& network, const Metadata& meta) {
  const auto width = geometry::label_width(meta.representation, meta.key_points);
  if (static_cast<std::size_t>(network.spec().output_size) != width) {
    throw CheckpointError(ErrorCode::RepresentationMismatch,
                          "network has " + std::to_string(network.spec().output_size) + " outputs, but " +
                              geometry::to_string(meta.representation) + " with " + std::to_string(meta.key_points) +
                              " entities needs " + std::to_string(width));
  }
  Json manifest = Json::array();
  std::uint64_t offset = 0;
  const auto state = network.state();
  for (const auto& t : state) {
    manifest.push_back({{"name", t.name}, {"shape", t.tensor->shape()}, {"offset", offset}});
    offset += 4 * t.tensor->numel();
  }
  const Json header{{"format_version", 1},
                    {"network", network.spec()},
                    {"tensors", manifest},
                    {"data_bytes", offset},
                    {"meta", meta_to_json(meta)}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + kMagicSize);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& t : state) {
    for (float v : t.tensor->values()) put_f32(out, v);
  }
  return out;
}

Checkpoint decode(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) corrupt("empty file");
  const std::size_t prefix = std::min<std::size_t>(bytes.size(), 5);
  if (std::memcmp(bytes.data(), kMagicPrefix, prefix) != 0) {
    throw CheckpointError(ErrorCode::BadMagic, "not a weight file (bad magic)");
  }
  if (bytes.size() < kMagicSize) corrupt("truncated magic");
  if (std::memcmp(bytes.data(), kMagic, kMagicSize) != 0) {
    throw CheckpointError(ErrorCode::UnsupportedVersion,
                          "unsupported weight file version '" +
                              std::string(reinterpret_cast<const char*>(bytes.data()) + 5, 3) + "' (expected 001)");
  }
  if (bytes.size() < kMagicSize + 8) corrupt("truncated header length");
  const std::uint64_t header_len = get_u64(bytes.data() + kMagicSize);
  const std::size_t data_start = kMagicSize + 8 + header_len;
  if (header_len > bytes.size() || data_start > bytes.size()) corrupt("truncated header");

  Json header;
  try {
    header = Json::parse(bytes.begin() + kMagicSize + 8, bytes.begin() + static_cast<std::ptrdiff_t>(data_start));
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("unreadable header: ") + e.what());
  }

  Checkpoint out;
  try {
    if (header.at("format_version").get<int>() != 1) {
      throw CheckpointError(ErrorCode::UnsupportedVersion, "unsupported header format_version");
    }
    const auto spec = header.at("network").get<nn::NetworkSpec>();
    out.network = nn::VggSBn::build(spec, 0);
    out.meta = meta_from_json(header.at("meta"));
    const auto& manifest = header.at("tensors");
    auto state = out.network.state();
    if (manifest.size() != state.size()) {
      throw CheckpointError(ErrorCode::ShapeMismatch, "weight file lists " + std::to_string(manifest.size()) +
                                                          " tensors, network has " + std::to_string(state.size()));
    }
    std::uint64_t expected_offset = 0;
    for (std::size_t i = 0; i < state.size(); ++i) {
      const auto& entry = manifest[i];
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<nn::Shape>();
      if (name != state[i].name || shape != state[i].tensor->shape()) {
        throw CheckpointError(ErrorCode::ShapeMismatch, "tensor " + std::to_string(i) + ": file has " + name + " " +
                                                            nn::shape_string(shape) + ", network expects " +
                                                            state[i].name + " " +
                                                            nn::shape_string(state[i].tensor->shape()));
      }
      if (entry.at("offset").get<std::uint64_t>() != expected_offset) corrupt("tensor offsets are not contiguous");
      expected_offset += 4 * state[i].tensor->numel();
    }
    if (header.at("data_bytes").get<std::uint64_t>() != expected_offset) corrupt("data size disagrees with manifest");
    if (bytes.size() - data_start != expected_offset) {
      corrupt("expected " + std::to_string(expected_offset) + " data bytes, found " +
              std::to_string(bytes.size() - data_start));
    }
    const std::uint8_t* p = bytes.data() + data_start;
    for (auto& t : state) {
      for (auto& v : t.tensor->values()) {
        v = get_f32(p);
        p += 4;
      }
      if (!t.tensor->all_finite()) corrupt("non-finite values in " + t.name);
    }
    const auto expected_width = geometry::label_width(out.meta.representation, out.meta.key_points);
    if (static_cast<std::size_t>(spec.output_size) != expected_width) {
      throw CheckpointError(ErrorCode::ShapeMismatch, "network output " + std::to_string(spec.output_size) +
                                                          " does not fit the stored label layout");
    }
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("bad header field: ") + e.what());
  } catch (const ConfigError& e) {
    corrupt(std::string("bad header field: ") + e.what());
  } catch (const nn::NnError& e) {
    corrupt(std::string("bad network spec: ") + e.what());
  } catch (const geometry::GeometryError& e) {
    corrupt(std::string("bad label layout: ") + e.what());
  }
  return out;
}

void save(const std::filesystem::path& path, nn::VggSBn& network, const Metadata& meta) {
  const auto bytes = encode(network, meta);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(ErrorCode::Io, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError(ErrorCode::Io, "failed writing " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const ImageError& e) {
    throw CheckpointError(ErrorCode::Io, e.what());
  }
  return decode(bytes);
}

void require_representation(const Metadata& meta, geometry::Representation requested, std::size_t key_points) {
  if (meta.representation != requested || meta.key_points != key_points) {
    throw CheckpointError(ErrorCode::RepresentationMismatch,
                          "weights predict " + geometry::to_string(meta.representation) + " with " +
                              std::to_string(geometry::label_width(meta.representation, meta.key_points)) +
                              " outputs, but " + geometry::to_string(requested) + " with " +
                              std::to_string(geometry::label_width(requested, key_points)) + " was requested");
  }
}

}  // namespace vise::checkpoint
