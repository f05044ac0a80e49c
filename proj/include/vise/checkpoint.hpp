#pragma once

// Weight file: "VISEW001", a little-endian uint64 header length, a UTF-8
// JSON header, then the tensors as little-endian float32 in manifest order.

#include "vise/camera.hpp"
#include "vise/geometry.hpp"
#include "vise/imgproc.hpp"
#include "vise/nn/network.hpp"
#include "vise/serialize.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vise::checkpoint {

enum class ErrorCode { Io, BadMagic, UnsupportedVersion, Corrupt, ShapeMismatch, RepresentationMismatch };

std::string to_string(ErrorCode code);

class CheckpointError : public std::runtime_error {
public:
  CheckpointError(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

struct Fiducial {
  geometry::RigidTransform pose;  // tag frame -> world
  double side = 60.0;             // mm
};

struct Metadata {
  geometry::Representation representation = geometry::Representation::Points;
  std::size_t key_points = 3;  // entity count: key points or sections
  double scale = 1.0;          // mm, total arm length
  std::vector<double> section_lengths;
  imgproc::PreprocessSpec preprocess;
  std::array<camera::CameraModel, 2> cameras;
  std::optional<Fiducial> fiducial;
  /// Camera-from-tag poses at training time, when a fiducial is known.
  std::array<geometry::RigidTransform, 2> saved_poses;
  Json extra = Json::object();
};

struct Checkpoint {
  nn::VggSBn network;
  Metadata meta;
};

std::vector<std::uint8_t> encode(nn::VggSBn& network, const Metadata& meta);
Checkpoint decode(std::span<const std::uint8_t> bytes);

void save(const std::filesystem::path& path, nn::VggSBn& network, const Metadata& meta);
Checkpoint load(const std::filesystem::path& path);

/// Refuses weights whose head does not match the requested representation.
void require_representation(const Metadata& meta, geometry::Representation requested, std::size_t key_points);

}  // namespace vise::checkpoint
