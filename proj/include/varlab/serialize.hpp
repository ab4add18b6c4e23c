#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "varlab/models.hpp"
#include "varlab/predictions.hpp"

namespace varlab {

// Binary artifact formats. Little-endian throughout (asserted at compile
// time); payloads are raw binary32.

/// "VLPM" + version u32 + rows u32 + cols u32 + row-major binary32 payload.
void write_prediction_matrix(const std::filesystem::path& path, const PredictionMatrix& preds);
PredictionMatrix read_prediction_matrix(const std::filesystem::path& path);

/// Same container used for any examples-by-features matrix (activations).
void write_matrix(const std::filesystem::path& path, const Tensor& matrix);
Tensor read_matrix(const std::filesystem::path& path);

/// Concatenated little-endian binary32 payloads in tensor order; this is
/// also the byte stream the params digest is computed over.
std::vector<unsigned char> params_payload(const Params& params);

/// params.bin plus a JSON sidecar listing name/shape/sha256 per tensor.
void write_params(const std::filesystem::path& bin_path,
                  const std::filesystem::path& sidecar_path, const Params& params);
Params read_params(const std::filesystem::path& bin_path,
                   const std::filesystem::path& sidecar_path);

}  // namespace varlab
