#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "varlab/rng.hpp"
#include "varlab/tensor.hpp"

namespace varlab {

enum class Arch {
    LinearSoftmax,
    MlpOneHidden,
    ConvOneHidden,
    TinyConvNet,
};

/// Architecture description. Hidden sizes scale by width_multiplier
/// (round(w * base), floor 1); fully-connected weights are stored
/// [out x in] row-major, conv weights [oc x c x kh x kw].
struct ModelSpec {
    Arch arch = Arch::MlpOneHidden;
    std::array<int, 3> input_shape = {1, 16, 16};  // C, H, W
    int class_count = 10;
    float dropout_rate = 0.0f;
    float width_multiplier = 1.0f;

    // MlpOneHidden
    int hidden_units = 256;
    // ConvOneHidden
    int channels = 8;
    int kernel_size = 3;
    // TinyConvNet
    int channels1 = 8;
    int channels2 = 16;
    int fc_units = 64;

    void validate() const;
    int scaled(int base) const;
    int input_pixels() const { return input_shape[0] * input_shape[1] * input_shape[2]; }
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Ordered parameter set. Order is the layer order, which is also the
/// initialization draw order and the params.bin serialization order.
struct Params {
    std::vector<NamedTensor> tensors;

    Tensor& find(const std::string& name);
    const Tensor& find(const std::string& name) const;
    std::size_t total_elements() const;
};

/// Expected parameter names and shapes for a spec, in layer order.
std::vector<std::pair<std::string, std::vector<int>>> param_layout(const ModelSpec& spec);

/// He-scheme initialization: weights ~ Gaussian(0, 2 / fan_in) drawn in
/// layer order, element order row-major; biases exactly zero (no draws).
Params init_params(const ModelSpec& spec, RngStream stream);

enum class Mode { Train, Eval };

/// Multiplicative per-element noise applied to every linear/conv output,
/// simulating nondeterministic low-level kernels: y *= (1 + rel * g).
/// Null hook (or the sentinel seed upstream) means bit-exact identity.
struct NoiseHook {
    RngStream stream;
    float rel = 0.0f;
};

/// The hook body: one gaussian per element in row-major order,
/// y = y * (1 + rel * g) in binary32.
void apply_lowlevel_noise(Tensor& t, RngStream& stream, float rel);

/// Post-activation hidden outputs plus logits, one row per example.
using ActivationCapture = std::map<std::string, Tensor>;

struct ForwardResult {
    Tensor logits;  // batch x class_count
    ActivationCapture activations;
};

/// Run the network. Dropout masks draw from dropout_stream in train mode
/// only (one uniform per hidden activation element, row-major); the hook,
/// when set, perturbs each linear/conv output in layer order. Eval mode is
/// a pure function of (params, batch).
ForwardResult forward(const ModelSpec& spec, const Params& params, const Tensor& batch,
                      Mode mode, RngStream& dropout_stream, NoiseHook* noise,
                      bool capture_activations = false);

struct BackwardResult {
    double loss = 0.0;  // mean cross-entropy over the batch, nats
    Params grads;       // same layout as params
};

/// Mean softmax cross-entropy loss and its gradients via the hand-derived
/// chain rule. Internally replays the forward pass, consuming exactly the
/// same dropout/noise draws forward() would; when noise_in_backward is set
/// the hook also perturbs each linear/conv gradient tensor, in backward
/// layer order (grad_input before grad_weight).
BackwardResult backward(const ModelSpec& spec, const Params& params, const Tensor& batch,
                        const std::vector<int>& labels, RngStream& dropout_stream,
                        NoiseHook* noise, bool noise_in_backward = true);

/// Eval-mode logits over an arbitrarily large example set, batched
/// internally (each row's arithmetic is independent of the batching).
Tensor evaluate_logits(const ModelSpec& spec, const Params& params, const Tensor& examples);

/// Eval-mode activation capture over the full example set.
ActivationCapture capture_activations(const ModelSpec& spec, const Params& params,
                                      const Tensor& examples);

/// Names of the layers capture_activations records, in order.
std::vector<std::string> capture_layer_names(const ModelSpec& spec);

/// Name of the bit-flip target: the weight tensor of the earliest
/// learnable layer (biases excluded).
std::string first_layer_weight_name(const ModelSpec& spec);

}  // namespace varlab
