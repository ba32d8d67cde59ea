#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pendiag/nn.hpp"
#include "pendiag/rng.hpp"
#include "pendiag/tensor.hpp"

namespace pendiag {

// Recurrent branch output is concatenated with the raw input window, then
// fed through two conv/pool blocks and a two-layer dense head.
struct ModelConfig {
    std::size_t window = 128;
    std::size_t in_features = 2;
    std::size_t lstm_hidden = 2;
    std::size_t conv1_out = 16;
    std::size_t conv2_out = 32;
    std::size_t kernel = 3;
    std::size_t conv_stride = 2;
    std::size_t pool_size = 2;
    std::size_t pool_stride = 2;
    std::size_t fc_hidden = 64;
    std::size_t classes = 2;
    double dropout_p = 0.5;
};

struct ShapeStage {
    std::string name;
    std::size_t channels = 0;
    std::size_t length = 0;
};

// Stages: input, concat, conv1, pool1, conv2, pool2, flatten, fc1, fc2.
// Throws ConfigError naming the first stage whose input is too short.
std::vector<ShapeStage> shape_chain(const ModelConfig& cfg);

std::size_t count_params(const ModelConfig& cfg);

struct ModelParams {
    ModelConfig config;
    nn::LstmWeights lstm;
    nn::Conv1dWeights conv1;
    nn::Conv1dWeights conv2;
    Tensor fc1_W, fc1_b;
    Tensor fc2_W, fc2_b;
};

struct ParamView {
    std::string name;
    Tensor* tensor;
};
struct ConstParamView {
    std::string name;
    const Tensor* tensor;
};
// Fixed order; names double as checkpoint keys.
std::vector<ParamView> param_views(ModelParams& p);
std::vector<ConstParamView> param_views(const ModelParams& p);

ModelParams build_model(const ModelConfig& cfg, Rng& rng);
ModelParams zero_like(const ModelParams& p);
// Correctly shaped, all-zero parameter set; checkpoint loading fills it in.
ModelParams empty_params(const ModelConfig& cfg);

struct ModelCache {
    nn::RunMode mode = nn::RunMode::train;
    Tensor x;
    nn::LstmCache lstm;
    Tensor concat;
    Tensor conv1_pre, conv1_act;
    nn::MaxPoolResult pool1;
    Tensor conv2_pre, conv2_act;
    nn::MaxPoolResult pool2;
    Tensor flat;
    Tensor fc1_pre, fc1_act;
    nn::DropoutResult drop;
    Tensor logits;
};

// x is [in_features x window]. rng is consumed only when mode == train and
// dropout_p > 0.
Tensor model_forward(const ModelParams& p, const Tensor& x, nn::RunMode mode, Rng& rng,
                     ModelCache* cache = nullptr);

struct ModelBackwardResult {
    ModelParams grads;
    Tensor grad_input;
};
ModelBackwardResult model_backward(const ModelParams& p, const ModelCache& cache,
                                   const Tensor& grad_logits);

Tensor softmax(const Tensor& logits);

} // namespace pendiag
