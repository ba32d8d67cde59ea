#include "pendiag/model.hpp"

#include <cmath>
#include <utility>

#include "pendiag/errors.hpp"

namespace pendiag {

namespace {

void require_fits(std::size_t len, std::size_t k, const std::string& stage) {
    if (len < k)
        throw ConfigError("shape error at " + stage + ": input length " + std::to_string(len) +
                          " shorter than kernel " + std::to_string(k));
}

} // namespace

std::vector<ShapeStage> shape_chain(const ModelConfig& cfg) {
    if (cfg.window == 0 || cfg.in_features == 0 || cfg.lstm_hidden == 0 || cfg.conv1_out == 0 ||
        cfg.conv2_out == 0 || cfg.kernel == 0 || cfg.conv_stride == 0 || cfg.pool_size == 0 ||
        cfg.pool_stride == 0 || cfg.fc_hidden == 0)
        throw ConfigError("model config: all sizes must be positive");
    if (cfg.classes < 2) throw ConfigError("model config: need at least 2 classes");
    if (cfg.dropout_p < 0.0 || cfg.dropout_p >= 1.0)
        throw ConfigError("model config: dropout_p must be in [0, 1)");

    std::vector<ShapeStage> chain;
    chain.push_back({"input", cfg.in_features, cfg.window});
    const std::size_t cat = cfg.in_features + cfg.lstm_hidden;
    chain.push_back({"concat", cat, cfg.window});
    require_fits(cfg.window, cfg.kernel, "conv1");
    const std::size_t l1 = (cfg.window - cfg.kernel) / cfg.conv_stride + 1;
    chain.push_back({"conv1", cfg.conv1_out, l1});
    require_fits(l1, cfg.pool_size, "pool1");
    const std::size_t p1 = (l1 - cfg.pool_size) / cfg.pool_stride + 1;
    chain.push_back({"pool1", cfg.conv1_out, p1});
    require_fits(p1, cfg.kernel, "conv2");
    const std::size_t l2 = (p1 - cfg.kernel) / cfg.conv_stride + 1;
    chain.push_back({"conv2", cfg.conv2_out, l2});
    require_fits(l2, cfg.pool_size, "pool2");
    const std::size_t p2 = (l2 - cfg.pool_size) / cfg.pool_stride + 1;
    chain.push_back({"pool2", cfg.conv2_out, p2});
    chain.push_back({"flatten", 1, cfg.conv2_out * p2});
    chain.push_back({"fc1", 1, cfg.fc_hidden});
    chain.push_back({"fc2", 1, cfg.classes});
    return chain;
}

std::size_t count_params(const ModelConfig& cfg) {
    const auto chain = shape_chain(cfg);
    const std::size_t flat = chain[6].length;
    const std::size_t h = cfg.lstm_hidden;
    const std::size_t cat = cfg.in_features + h;
    std::size_t n = 0;
    n += 4 * h * cfg.in_features + 4 * h * h + 4 * h;              // lstm
    n += cfg.conv1_out * cat * cfg.kernel + cfg.conv1_out;         // conv1
    n += cfg.conv2_out * cfg.conv1_out * cfg.kernel + cfg.conv2_out; // conv2
    n += cfg.fc_hidden * flat + cfg.fc_hidden;                     // fc1
    n += cfg.classes * cfg.fc_hidden + cfg.classes;                // fc2
    return n;
}

std::vector<ParamView> param_views(ModelParams& p) {
    return {
        {"lstm.W", &p.lstm.W},   {"lstm.U", &p.lstm.U},   {"lstm.b", &p.lstm.b},
        {"conv1.k", &p.conv1.kernels}, {"conv1.b", &p.conv1.bias},
        {"conv2.k", &p.conv2.kernels}, {"conv2.b", &p.conv2.bias},
        {"fc1.W", &p.fc1_W},     {"fc1.b", &p.fc1_b},
        {"fc2.W", &p.fc2_W},     {"fc2.b", &p.fc2_b},
    };
}

std::vector<ConstParamView> param_views(const ModelParams& p) {
    std::vector<ConstParamView> out;
    for (const auto& v : param_views(const_cast<ModelParams&>(p)))
        out.push_back({v.name, v.tensor});
    return out;
}

ModelParams build_model(const ModelConfig& cfg, Rng& rng) {
    const auto chain = shape_chain(cfg);
    const std::size_t flat = chain[6].length;
    const std::size_t cat = cfg.in_features + cfg.lstm_hidden;
    ModelParams p;
    p.config = cfg;
    p.lstm = nn::init_lstm(cfg.in_features, cfg.lstm_hidden, rng);
    p.conv1 = nn::init_conv1d(cat, cfg.conv1_out, cfg.kernel, cfg.conv_stride, rng);
    p.conv2 = nn::init_conv1d(cfg.conv1_out, cfg.conv2_out, cfg.kernel, cfg.conv_stride, rng);
    p.fc1_W = nn::glorot_uniform({cfg.fc_hidden, flat}, flat, cfg.fc_hidden, rng);
    p.fc1_b = Tensor({cfg.fc_hidden});
    p.fc2_W = nn::glorot_uniform({cfg.classes, cfg.fc_hidden}, cfg.fc_hidden, cfg.classes, rng);
    p.fc2_b = Tensor({cfg.classes});
    return p;
}

ModelParams empty_params(const ModelConfig& cfg) {
    const auto chain = shape_chain(cfg);
    const std::size_t flat = chain[6].length;
    const std::size_t cat = cfg.in_features + cfg.lstm_hidden;
    const std::size_t h = cfg.lstm_hidden;
    ModelParams p;
    p.config = cfg;
    p.lstm.in_features = cfg.in_features;
    p.lstm.hidden = h;
    p.lstm.W = Tensor({4 * h, cfg.in_features});
    p.lstm.U = Tensor({4 * h, h});
    p.lstm.b = Tensor({4 * h});
    p.conv1.kernels = Tensor({cfg.conv1_out, cat, cfg.kernel});
    p.conv1.bias = Tensor({cfg.conv1_out});
    p.conv1.stride = cfg.conv_stride;
    p.conv2.kernels = Tensor({cfg.conv2_out, cfg.conv1_out, cfg.kernel});
    p.conv2.bias = Tensor({cfg.conv2_out});
    p.conv2.stride = cfg.conv_stride;
    p.fc1_W = Tensor({cfg.fc_hidden, flat});
    p.fc1_b = Tensor({cfg.fc_hidden});
    p.fc2_W = Tensor({cfg.classes, cfg.fc_hidden});
    p.fc2_b = Tensor({cfg.classes});
    return p;
}

ModelParams zero_like(const ModelParams& p) {
    ModelParams z;
    z.config = p.config;
    z.lstm.hidden = p.lstm.hidden;
    z.lstm.in_features = p.lstm.in_features;
    z.lstm.W = Tensor(p.lstm.W.shape);
    z.lstm.U = Tensor(p.lstm.U.shape);
    z.lstm.b = Tensor(p.lstm.b.shape);
    z.conv1.kernels = Tensor(p.conv1.kernels.shape);
    z.conv1.bias = Tensor(p.conv1.bias.shape);
    z.conv1.stride = p.conv1.stride;
    z.conv2.kernels = Tensor(p.conv2.kernels.shape);
    z.conv2.bias = Tensor(p.conv2.bias.shape);
    z.conv2.stride = p.conv2.stride;
    z.fc1_W = Tensor(p.fc1_W.shape);
    z.fc1_b = Tensor(p.fc1_b.shape);
    z.fc2_W = Tensor(p.fc2_W.shape);
    z.fc2_b = Tensor(p.fc2_b.shape);
    return z;
}

Tensor model_forward(const ModelParams& p, const Tensor& x, nn::RunMode mode, Rng& rng,
                     ModelCache* cache) {
    const ModelConfig& cfg = p.config;
    if (x.dims() != 2 || x.shape[0] != cfg.in_features || x.shape[1] != cfg.window)
        throw ConfigError("model_forward: input must be [" + std::to_string(cfg.in_features) +
                          " x " + std::to_string(cfg.window) + "]");
    ModelCache c;
    c.mode = mode;
    c.x = x;

    Tensor hseq = nn::lstm_forward(x, p.lstm, &c.lstm);
    const std::size_t cat = cfg.in_features + cfg.lstm_hidden;
    c.concat = Tensor({cat, cfg.window});
    for (std::size_t r = 0; r < cfg.in_features; ++r)
        for (std::size_t t = 0; t < cfg.window; ++t) c.concat.at(r, t) = x.at(r, t);
    for (std::size_t r = 0; r < cfg.lstm_hidden; ++r)
        for (std::size_t t = 0; t < cfg.window; ++t)
            c.concat.at(cfg.in_features + r, t) = hseq.at(r, t);

    c.conv1_pre = nn::conv1d_forward(c.concat, p.conv1);
    c.conv1_act = nn::relu(c.conv1_pre);
    c.pool1 = nn::maxpool1d(c.conv1_act, cfg.pool_size, cfg.pool_stride);
    c.conv2_pre = nn::conv1d_forward(c.pool1.output, p.conv2);
    c.conv2_act = nn::relu(c.conv2_pre);
    c.pool2 = nn::maxpool1d(c.conv2_act, cfg.pool_size, cfg.pool_stride);

    c.flat = Tensor({c.pool2.output.size()}, c.pool2.output.data);
    c.fc1_pre = nn::dense_forward(c.flat, p.fc1_W, p.fc1_b);
    c.fc1_act = nn::relu(c.fc1_pre);
    c.drop = nn::dropout(c.fc1_act, cfg.dropout_p, mode, rng);
    c.logits = nn::dense_forward(c.drop.output, p.fc2_W, p.fc2_b);

    Tensor logits = c.logits;
    if (cache) *cache = std::move(c);
    return logits;
}

ModelBackwardResult model_backward(const ModelParams& p, const ModelCache& cache,
                                   const Tensor& grad_logits) {
    const ModelConfig& cfg = p.config;
    ModelBackwardResult r;
    r.grads = zero_like(p);

    auto g_fc2 = nn::dense_backward(cache.drop.output, p.fc2_W, grad_logits);
    r.grads.fc2_W = std::move(g_fc2.W);
    r.grads.fc2_b = std::move(g_fc2.b);
    Tensor g_drop = (cache.mode == nn::RunMode::train && cfg.dropout_p > 0.0)
                        ? nn::dropout_backward(g_fc2.x, cache.drop.mask, cfg.dropout_p)
                        : std::move(g_fc2.x);
    Tensor g_fc1_pre = nn::relu_backward(cache.fc1_pre, g_drop);
    auto g_fc1 = nn::dense_backward(cache.flat, p.fc1_W, g_fc1_pre);
    r.grads.fc1_W = std::move(g_fc1.W);
    r.grads.fc1_b = std::move(g_fc1.b);

    Tensor g_pool2(cache.pool2.output.shape, std::move(g_fc1.x.data));
    Tensor g_conv2_act =
        nn::maxpool1d_backward(g_pool2, cache.pool2.argmax, cache.conv2_act.shape);
    Tensor g_conv2_pre = nn::relu_backward(cache.conv2_pre, g_conv2_act);
    auto g_conv2 = nn::conv1d_backward(cache.pool1.output, p.conv2, g_conv2_pre);
    r.grads.conv2.kernels = std::move(g_conv2.kernels);
    r.grads.conv2.bias = std::move(g_conv2.bias);

    Tensor g_conv1_act =
        nn::maxpool1d_backward(g_conv2.input, cache.pool1.argmax, cache.conv1_act.shape);
    Tensor g_conv1_pre = nn::relu_backward(cache.conv1_pre, g_conv1_act);
    auto g_conv1 = nn::conv1d_backward(cache.concat, p.conv1, g_conv1_pre);
    r.grads.conv1.kernels = std::move(g_conv1.kernels);
    r.grads.conv1.bias = std::move(g_conv1.bias);

    Tensor g_hseq({cfg.lstm_hidden, cfg.window});
    r.grad_input = Tensor({cfg.in_features, cfg.window});
    for (std::size_t t = 0; t < cfg.window; ++t) {
        for (std::size_t f = 0; f < cfg.in_features; ++f)
            r.grad_input.at(f, t) = g_conv1.input.at(f, t);
        for (std::size_t h = 0; h < cfg.lstm_hidden; ++h)
            g_hseq.at(h, t) = g_conv1.input.at(cfg.in_features + h, t);
    }
    auto g_lstm = nn::lstm_backward(p.lstm, cache.lstm, g_hseq);
    r.grads.lstm.W = std::move(g_lstm.W);
    r.grads.lstm.U = std::move(g_lstm.U);
    r.grads.lstm.b = std::move(g_lstm.b);
    for (std::size_t i = 0; i < r.grad_input.size(); ++i)
        r.grad_input.data[i] += g_lstm.x.data[i];

    return r;
}

Tensor softmax(const Tensor& logits) {
    if (logits.dims() != 1 || logits.size() == 0)
        throw ConfigError("softmax: logits must be a non-empty vector");
    Tensor out(logits.shape);
    double mx = logits.data[0];
    for (double v : logits.data) mx = std::max(mx, v);
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.data[i] = std::exp(logits.data[i] - mx);
        denom += out.data[i];
    }
    for (auto& v : out.data) v /= denom;
    return out;
}

} // namespace pendiag
