#pragma once

// Binary model checkpoints.
//
// Layout (all integers and floats little-endian):
//   "TBPR"                       magic
//   u8  version                  kCheckpointVersion
//   u8  kind                     ModelKind
//   u64 M, N, F, K, D
//   f64 arrays, present per kind:
//     beta (N), P (F x M), Q (F x N)          mf, diff, shared
//     theta (K x M)                           diff
//     H (K x D), beta' (D)                    diff, shared
//     prior counts (M), prior sums (M x D)    shared
//     popularity (N)                          pop
//   u64 FNV-1a checksum of every preceding byte
// Matrices are written row-major in the shapes listed.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tbpr/model.hpp"

namespace tbpr {

inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Params& p);
// Throws TruncatedError, VersionError, ChecksumError or CheckpointError.
Params decode_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes through a temporary file and renames, so an existing checkpoint is
// never left half-written.
void save_model(const Params& p, const std::filesystem::path& path);
Params load_model(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size);

}  // namespace tbpr
