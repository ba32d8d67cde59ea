#include "pendiag/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "pendiag/errors.hpp"
#include "pendiag/model.hpp"
#include "pendiag/nn.hpp"
#include "pendiag/rng.hpp"
#include "pendiag/tensor.hpp"

namespace pendiag::gradcheck {

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = dist(rng);
    return t;
}

// Central difference on one scalar slot of a recomputable loss.
void fd_slot(const std::function<double()>& loss, double& slot, double analytic, Report& rep) {
    const double orig = slot;
    slot = orig + kFdStep;
    const double lp = loss();
    slot = orig - kFdStep;
    const double lm = loss();
    slot = orig;
    const double numeric = (lp - lm) / (2.0 * kFdStep);
    rep.max_rel_err = std::max(rep.max_rel_err, rel_err(analytic, numeric));
    ++rep.evaluations;
}

void fd_tensor(const std::function<double()>& loss, Tensor& t, const Tensor& analytic,
               Report& rep) {
    for (std::size_t i = 0; i < t.size(); ++i) fd_slot(loss, t.data[i], analytic.data[i], rep);
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

Report make_report(std::string layer, double tol) {
    Report r;
    r.layer = std::move(layer);
    r.tolerance = tol;
    return r;
}

void finish(Report& r) { r.pass = r.max_rel_err < r.tolerance; }

} // namespace

Report check_conv1d(std::uint64_t seed) {
    Report rep = make_report("conv1d", kTolLinear);
    Rng rng(derive_seed(seed, "gc.conv1d"));
    std::uniform_int_distribution<std::size_t> small(1, 3);
    const std::size_t c_in = small(rng);
    const std::size_t c_out = small(rng);
    const std::size_t k = small(rng);
    const std::size_t stride = 1 + rng() % 2;
    const std::size_t len = k + rng() % 7;
    nn::Conv1dWeights w;
    w.kernels = random_tensor({c_out, c_in, k}, rng);
    w.bias = random_tensor({c_out}, rng);
    w.stride = stride;
    Tensor x = random_tensor({c_in, len}, rng);
    const std::size_t out_len = nn::conv_out_len(len, k, stride);
    Tensor r = random_tensor({c_out, out_len}, rng);

    auto loss = [&] { return dot(nn::conv1d_forward(x, w), r); };
    auto grads = nn::conv1d_backward(x, w, r);
    fd_tensor(loss, x, grads.input, rep);
    fd_tensor(loss, w.kernels, grads.kernels, rep);
    fd_tensor(loss, w.bias, grads.bias, rep);
    finish(rep);
    return rep;
}

Report check_maxpool(std::uint64_t seed) {
    Report rep = make_report("maxpool", kTolLinear);
    Rng rng(derive_seed(seed, "gc.maxpool"));
    const std::size_t channels = 1 + rng() % 3;
    const std::size_t k = 2;
    const std::size_t stride = 1 + rng() % 2;
    const std::size_t len = k + 2 + rng() % 7;
    const std::size_t out_len = nn::conv_out_len(len, k, stride);

    // resample until every window has a clear winner so the finite
    // difference step cannot flip an argmax
    Tensor x;
    for (int attempt = 0; attempt < 100; ++attempt) {
        x = random_tensor({channels, len}, rng);
        bool ok = true;
        for (std::size_t c = 0; c < channels && ok; ++c) {
            for (std::size_t t = 0; t < out_len && ok; ++t) {
                double top = -2.0, second = -3.0;
                for (std::size_t j = 0; j < k; ++j) {
                    const double v = x.at(c, t * stride + j);
                    if (v > top) {
                        second = top;
                        top = v;
                    } else if (v > second) {
                        second = v;
                    }
                }
                if (top - second < 1e-3) ok = false;
            }
        }
        if (ok) break;
    }
    Tensor r = random_tensor({channels, out_len}, rng);

    auto loss = [&] { return dot(nn::maxpool1d(x, k, stride).output, r); };
    auto fw = nn::maxpool1d(x, k, stride);
    Tensor analytic = nn::maxpool1d_backward(r, fw.argmax, x.shape);
    fd_tensor(loss, x, analytic, rep);
    finish(rep);
    return rep;
}

Report check_relu(std::uint64_t seed) {
    Report rep = make_report("relu", kTolLinear);
    Rng rng(derive_seed(seed, "gc.relu"));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor x({8});
    for (auto& v : x.data) {
        do {
            v = dist(rng);
        } while (std::abs(v) < 1e-3); // stay clear of the kink
    }
    Tensor r = random_tensor({8}, rng);
    auto loss = [&] { return dot(nn::relu(x), r); };
    Tensor analytic = nn::relu_backward(x, r);
    fd_tensor(loss, x, analytic, rep);
    finish(rep);
    return rep;
}

Report check_lstm(std::uint64_t seed) {
    Report rep = make_report("lstm", kTolRecurrent);
    Rng rng(derive_seed(seed, "gc.lstm"));
    const std::size_t f = 1 + rng() % 3;
    const std::size_t h = 1 + rng() % 3;
    const std::size_t steps = 1 + rng() % 5;
    nn::LstmWeights w = nn::init_lstm(f, h, rng);
    Tensor x = random_tensor({f, steps}, rng);
    Tensor r = random_tensor({h, steps}, rng);

    auto loss = [&] { return dot(nn::lstm_forward(x, w), r); };
    nn::LstmCache cache;
    nn::lstm_forward(x, w, &cache);
    auto grads = nn::lstm_backward(w, cache, r);
    fd_tensor(loss, x, grads.x, rep);
    fd_tensor(loss, w.W, grads.W, rep);
    fd_tensor(loss, w.U, grads.U, rep);
    fd_tensor(loss, w.b, grads.b, rep);
    finish(rep);
    return rep;
}

Report check_dense(std::uint64_t seed, bool inject_fault) {
    Report rep = make_report("dense", kTolLinear);
    Rng rng(derive_seed(seed, "gc.dense"));
    const std::size_t rows = 1 + rng() % 5;
    const std::size_t cols = 1 + rng() % 5;
    Tensor W = random_tensor({rows, cols}, rng);
    Tensor b = random_tensor({rows}, rng);
    Tensor x = random_tensor({cols}, rng);
    Tensor r = random_tensor({rows}, rng);

    auto loss = [&] { return dot(nn::dense_forward(x, W, b), r); };
    auto grads = nn::dense_backward(x, W, r);
    if (inject_fault) grads.W.data[0] *= 1.1;
    fd_tensor(loss, x, grads.x, rep);
    fd_tensor(loss, W, grads.W, rep);
    fd_tensor(loss, b, grads.b, rep);
    finish(rep);
    return rep;
}

Report check_dropout(std::uint64_t seed) {
    Report rep = make_report("dropout", kTolLinear);
    Rng rng(derive_seed(seed, "gc.dropout"));
    const double p = 0.5;
    Tensor x = random_tensor({10}, rng);
    Tensor r = random_tensor({10}, rng);
    auto fw = nn::dropout(x, p, nn::RunMode::train, rng); // mask frozen from here on
    const double keep = 1.0 - p;

    auto loss = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            s += r.data[i] * x.data[i] * fw.mask.data[i] / keep;
        return s;
    };
    Tensor analytic = nn::dropout_backward(r, fw.mask, p);
    fd_tensor(loss, x, analytic, rep);
    finish(rep);
    return rep;
}

Report check_softmax_ce(std::uint64_t seed) {
    Report rep = make_report("softmax_ce", kTolLinear);
    Rng rng(derive_seed(seed, "gc.softmax_ce"));
    const std::size_t n = 2 + rng() % 4;
    Tensor logits = random_tensor({n}, rng, -2.0, 2.0);
    const std::size_t label = rng() % n;

    auto loss = [&] { return nn::softmax_cross_entropy(logits, label).loss; };
    auto res = nn::softmax_cross_entropy(logits, label);
    fd_tensor(loss, logits, res.grad_logits, rep);
    finish(rep);
    return rep;
}

Report check_model(std::uint64_t seed) {
    Report rep = make_report("model", kTolRecurrent);
    Rng rng(derive_seed(seed, "gc.model"));
    ModelConfig cfg;
    cfg.window = 16;
    cfg.in_features = 2;
    cfg.lstm_hidden = 2;
    cfg.conv1_out = 4;
    cfg.conv2_out = 6;
    cfg.kernel = 3;
    cfg.conv_stride = 1;
    cfg.pool_size = 2;
    cfg.pool_stride = 2;
    cfg.fc_hidden = 8;
    cfg.classes = 2;
    cfg.dropout_p = 0.0;

    ModelParams params = build_model(cfg, rng);
    Tensor x = random_tensor({cfg.in_features, cfg.window}, rng);
    const std::size_t label = rng() % cfg.classes;

    Rng unused(0);
    auto loss = [&] {
        Tensor logits = model_forward(params, x, nn::RunMode::train, unused);
        return nn::softmax_cross_entropy(logits, label).loss;
    };
    ModelCache cache;
    Tensor logits = model_forward(params, x, nn::RunMode::train, unused, &cache);
    auto sm = nn::softmax_cross_entropy(logits, label);
    auto back = model_backward(params, cache, sm.grad_logits);

    auto views = param_views(params);
    auto grad_views = param_views(back.grads);
    for (std::size_t i = 0; i < views.size(); ++i)
        fd_tensor(loss, *views[i].tensor, *grad_views[i].tensor, rep);
    fd_tensor(loss, x, back.grad_input, rep);
    finish(rep);
    return rep;
}

std::vector<Report> run_gradcheck(std::uint64_t base_seed, std::size_t seeds, bool inject_fault) {
    if (seeds == 0) throw ConfigError("run_gradcheck: need at least one seed");
    std::vector<Report> out;
    auto merge = [&out](const Report& r) {
        for (auto& existing : out) {
            if (existing.layer == r.layer) {
                existing.evaluations += r.evaluations;
                existing.max_rel_err = std::max(existing.max_rel_err, r.max_rel_err);
                existing.pass = existing.pass && r.pass;
                return;
            }
        }
        out.push_back(r);
    };
    for (std::size_t i = 0; i < seeds; ++i) {
        const std::uint64_t s = base_seed + i;
        merge(check_conv1d(s));
        merge(check_maxpool(s));
        merge(check_relu(s));
        merge(check_lstm(s));
        merge(check_dense(s, inject_fault));
        merge(check_dropout(s));
        merge(check_softmax_ce(s));
        merge(check_model(s));
    }
    return out;
}

} // namespace pendiag::gradcheck
