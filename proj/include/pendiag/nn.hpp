#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pendiag/rng.hpp"
#include "pendiag/tensor.hpp"

namespace pendiag::nn {

enum class RunMode { train, infer };

// ---------------------------------------------------------------------------
// Weight containers
// ---------------------------------------------------------------------------

// Gate rows are packed in fixed (i, f, g, o) order: rows [0,H) input gate,
// [H,2H) forget gate, [2H,3H) cell candidate, [3H,4H) output gate. The order
// is part of the checkpoint format.
struct LstmWeights {
    Tensor W; // [4H x F]
    Tensor U; // [4H x H]
    Tensor b; // [4H]
    std::size_t hidden = 0;
    std::size_t in_features = 0;
};

struct Conv1dWeights {
    Tensor kernels; // [C_out x C_in x k]
    Tensor bias;    // [C_out]
    std::size_t stride = 1;
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng);

// Forget-gate bias starts at 1, everything else Glorot / zero.
LstmWeights init_lstm(std::size_t in_features, std::size_t hidden, Rng& rng);
Conv1dWeights init_conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                          std::size_t stride, Rng& rng);

// ---------------------------------------------------------------------------
// Layers: forward / backward pairs
// ---------------------------------------------------------------------------

// Valid padding everywhere: floor((len - k) / stride) + 1; throws on len < k.
std::size_t conv_out_len(std::size_t len, std::size_t k, std::size_t stride);

Tensor conv1d_forward(const Tensor& input, const Conv1dWeights& wts);

struct Conv1dGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};
Conv1dGrads conv1d_backward(const Tensor& input, const Conv1dWeights& wts, const Tensor& grad_out);

struct MaxPoolResult {
    Tensor output;
    std::vector<std::size_t> argmax; // flat input index per output element
};
// Ties break to the earliest index.
MaxPoolResult maxpool1d(const Tensor& input, std::size_t k = 2, std::size_t stride = 2);
Tensor maxpool1d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const std::vector<std::size_t>& input_shape);

Tensor relu(const Tensor& input);
// Subgradient 0 at x == 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

struct LstmCache {
    Tensor x;                      // [F x w]
    std::vector<Tensor> gate_i, gate_f, gate_g, gate_o; // each [H], per step
    std::vector<Tensor> cell;      // c_t, per step
    std::vector<Tensor> hidden;    // h_t, per step
};

// h0 = c0 = 0. Returns all hidden states as columns of an [H x w] tensor.
Tensor lstm_forward(const Tensor& x, const LstmWeights& wts, LstmCache* cache = nullptr);

struct LstmGrads {
    Tensor x;
    Tensor W, U, b;
};
// Backpropagation through time over all steps, through both the hidden and
// the cell recurrence.
LstmGrads lstm_backward(const LstmWeights& wts, const LstmCache& cache, const Tensor& grad_hseq);

Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b);

struct DenseGrads {
    Tensor x;
    Tensor W, b;
};
DenseGrads dense_backward(const Tensor& x, const Tensor& W, const Tensor& grad_out);

struct DropoutResult {
    Tensor output;
    Tensor mask; // 0/1 per element
};
// Inverted dropout: surviving activations are scaled by 1/(1-p) at train
// time so inference is a pure identity.
DropoutResult dropout(const Tensor& x, double p, RunMode mode, Rng& rng);
Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask, double p);

struct SoftmaxCeResult {
    double loss = 0.0;
    Tensor grad_logits;
    Tensor probs;
};
// Max-subtraction stabilized; loss = -log softmax(logits)[label].
SoftmaxCeResult softmax_cross_entropy(const Tensor& logits, std::size_t label);

} // namespace pendiag::nn
