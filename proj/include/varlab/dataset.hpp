#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "varlab/rng.hpp"
#include "varlab/tensor.hpp"

namespace varlab {

enum class SplitTag { Train, Test };

/// A fully materialized, normalized image classification split. Immutable
/// after construction and safe to share across runs and threads.
struct Dataset {
    Tensor images;            // N x C x H x W
    std::vector<int> labels;  // length N, values < class_count
    int class_count = 0;
    SplitTag split = SplitTag::Train;
    bool normalized = false;

    int size() const { return images.shape.empty() ? 0 : images.shape[0]; }
    std::array<int, 3> example_shape() const {
        return {images.shape[1], images.shape[2], images.shape[3]};
    }

    /// One example as a C x H x W tensor (copy).
    Tensor example(int i) const;

    void validate() const;
};

/// Affine normalization constants declared per dataset. value -> (value - mean) / std.
struct Normalization {
    float mean = 0.0f;
    float stddev = 1.0f;
};

/// Normalize in place. Throws ValidationError when applied twice.
void normalize_dataset(Dataset& ds, const Normalization& norm);

struct SynthSpec {
    std::uint64_t seed = 1;
    int n_train = 2000;
    int n_test = 1000;
    std::array<int, 3> dims = {1, 16, 16};  // C, H, W
    int class_count = 10;
    float noise = 1.0f;
    float label_noise = 0.15f;  // train-split-only uniform relabeling fraction
};

/// Class-conditional smooth blobs: per class a fixed template (white
/// noise blurred to a ~2 pixel correlation length, mirrored into
/// horizontal symmetry, rescaled to L2 norm 2.5), then per example
/// template + noise * g. The smoothing and symmetry keep crop/flip
/// augmentation class-preserving. A label_noise fraction of the train
/// split is uniformly relabeled (test labels stay clean), which sustains
/// late-training gradients the way overfittable detail does in natural
/// images. Labels round-robin over classes; fully deterministic given the
/// seed. Emitted already normalized (identity constants).
std::pair<Dataset, Dataset> synth_dataset(const SynthSpec& spec);

/// Dataset manifest: identity + normalization constants + file digests,
/// serialized as JSON at the store/CLI layer.
struct DatasetManifest {
    std::string name;
    int n_train = 0;
    int n_test = 0;
    std::array<int, 3> dims = {0, 0, 0};
    int class_count = 0;
    Normalization normalization;
    std::vector<std::pair<std::string, std::string>> file_sha256;  // (filename, digest)
    std::string content_digest;  // digest over the identity fields above
};

DatasetManifest synth_manifest(const SynthSpec& spec);

}  // namespace varlab
