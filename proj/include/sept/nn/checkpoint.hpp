#pragma once

// Binary parameter checkpoints.
//
// Layout (little-endian):
//   "SEPTPRM1"                    8 bytes magic
//   u32 scalar_bytes              4 (float) or 8 (double)
//   u64 len, bytes                network fingerprint
//   u64 tensor_count
//   per tensor: u64 len, name bytes, u64 rows, u64 cols, rows*cols raw scalars
//                                 (column-major)
// Values are stored verbatim so a save/load cycle is bit-exact.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "sept/nn/network.hpp"

namespace sept::nn {

template <typename T>
void write_parameters(std::ostream& os, const ParameterSet<T>& params, const std::string& fingerprint);

/// Throws std::runtime_error on a malformed stream, a scalar-width mismatch or
/// a fingerprint that differs from `expected_fingerprint` (when non-empty).
template <typename T>
ParameterSet<T> read_parameters(std::istream& is, const std::string& expected_fingerprint = {});

template <typename T>
void save_parameters(const std::filesystem::path& path, const ParameterSet<T>& params,
                     const std::string& fingerprint);

template <typename T>
ParameterSet<T> load_parameters(const std::filesystem::path& path, const std::string& expected_fingerprint = {});

}  // namespace sept::nn
