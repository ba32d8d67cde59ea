#include "pendiag/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pendiag/errors.hpp"

namespace pendiag::nn {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
    if (fan_in + fan_out == 0) throw ConfigError("glorot_uniform: zero fan");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = dist(rng);
    return t;
}

LstmWeights init_lstm(std::size_t in_features, std::size_t hidden, Rng& rng) {
    if (in_features == 0 || hidden == 0) throw ConfigError("init_lstm: zero-sized layer");
    LstmWeights w;
    w.in_features = in_features;
    w.hidden = hidden;
    w.W = glorot_uniform({4 * hidden, in_features}, in_features, hidden, rng);
    w.U = glorot_uniform({4 * hidden, hidden}, hidden, hidden, rng);
    w.b = Tensor({4 * hidden});
    for (std::size_t r = hidden; r < 2 * hidden; ++r) w.b.data[r] = 1.0; // forget gate
    return w;
}

Conv1dWeights init_conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                          std::size_t stride, Rng& rng) {
    if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0)
        throw ConfigError("init_conv1d: zero-sized layer");
    Conv1dWeights w;
    w.kernels = glorot_uniform({out_channels, in_channels, kernel}, in_channels * kernel,
                               out_channels * kernel, rng);
    w.bias = Tensor({out_channels});
    w.stride = stride;
    return w;
}

std::size_t conv_out_len(std::size_t len, std::size_t k, std::size_t stride) {
    if (k == 0 || stride == 0) throw ConfigError("conv_out_len: kernel and stride must be positive");
    if (len < k)
        throw ConfigError("conv_out_len: input length " + std::to_string(len) +
                          " shorter than kernel " + std::to_string(k));
    return (len - k) / stride + 1;
}

Tensor conv1d_forward(const Tensor& input, const Conv1dWeights& wts) {
    if (input.dims() != 2) throw ConfigError("conv1d_forward: input must be 2-D");
    const std::size_t c_out = wts.kernels.shape[0];
    const std::size_t c_in = wts.kernels.shape[1];
    const std::size_t k = wts.kernels.shape[2];
    if (input.shape[0] != c_in)
        throw ConfigError("conv1d_forward: expected " + std::to_string(c_in) + " channels, got " +
                          std::to_string(input.shape[0]));
    const std::size_t len = input.shape[1];
    const std::size_t out_len = conv_out_len(len, k, wts.stride);
    Tensor out({c_out, out_len});
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t t = 0; t < out_len; ++t) {
            double acc = wts.bias.data[co];
            const std::size_t base = t * wts.stride;
            for (std::size_t ci = 0; ci < c_in; ++ci)
                for (std::size_t j = 0; j < k; ++j)
                    acc += input.at(ci, base + j) * wts.kernels.at(co, ci, j);
            out.at(co, t) = acc;
        }
    }
    return out;
}

Conv1dGrads conv1d_backward(const Tensor& input, const Conv1dWeights& wts,
                            const Tensor& grad_out) {
    const std::size_t c_out = wts.kernels.shape[0];
    const std::size_t c_in = wts.kernels.shape[1];
    const std::size_t k = wts.kernels.shape[2];
    const std::size_t out_len = grad_out.shape[1];
    Conv1dGrads g{Tensor(input.shape), Tensor(wts.kernels.shape), Tensor(wts.bias.shape)};
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t t = 0; t < out_len; ++t) {
            const double go = grad_out.at(co, t);
            g.bias.data[co] += go;
            const std::size_t base = t * wts.stride;
            for (std::size_t ci = 0; ci < c_in; ++ci) {
                for (std::size_t j = 0; j < k; ++j) {
                    g.kernels.at(co, ci, j) += input.at(ci, base + j) * go;
                    g.input.at(ci, base + j) += wts.kernels.at(co, ci, j) * go;
                }
            }
        }
    }
    return g;
}

MaxPoolResult maxpool1d(const Tensor& input, std::size_t k, std::size_t stride) {
    if (input.dims() != 2) throw ConfigError("maxpool1d: input must be 2-D");
    const std::size_t channels = input.shape[0];
    const std::size_t len = input.shape[1];
    const std::size_t out_len = conv_out_len(len, k, stride);
    MaxPoolResult r;
    r.output = Tensor({channels, out_len});
    r.argmax.resize(channels * out_len);
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t t = 0; t < out_len; ++t) {
            std::size_t best = t * stride;
            double best_val = input.at(c, best);
            for (std::size_t j = 1; j < k; ++j) {
                const std::size_t idx = t * stride + j;
                if (input.at(c, idx) > best_val) {
                    best_val = input.at(c, idx);
                    best = idx;
                }
            }
            r.output.at(c, t) = best_val;
            r.argmax[c * out_len + t] = c * len + best;
        }
    }
    return r;
}

Tensor maxpool1d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const std::vector<std::size_t>& input_shape) {
    Tensor g(input_shape);
    if (argmax.size() != grad_out.size())
        throw ConfigError("maxpool1d_backward: argmax/grad size mismatch");
    for (std::size_t i = 0; i < argmax.size(); ++i) g.data[argmax[i]] += grad_out.data[i];
    return g;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape);
    for (std::size_t i = 0; i < input.size(); ++i) out.data[i] = std::max(0.0, input.data[i]);
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    if (!same_shape(input, grad_out)) throw ConfigError("relu_backward: shape mismatch");
    Tensor g(input.shape);
    for (std::size_t i = 0; i < input.size(); ++i)
        g.data[i] = input.data[i] > 0.0 ? grad_out.data[i] : 0.0;
    return g;
}

Tensor lstm_forward(const Tensor& x, const LstmWeights& wts, LstmCache* cache) {
    if (x.dims() != 2) throw ConfigError("lstm_forward: input must be 2-D");
    const std::size_t f = wts.in_features;
    const std::size_t h = wts.hidden;
    if (x.shape[0] != f)
        throw ConfigError("lstm_forward: expected " + std::to_string(f) + " features, got " +
                          std::to_string(x.shape[0]));
    const std::size_t steps = x.shape[1];
    Tensor hseq({h, steps});
    Tensor h_prev({h});
    Tensor c_prev({h});
    if (cache) {
        *cache = LstmCache{};
        cache->x = x;
    }
    for (std::size_t t = 0; t < steps; ++t) {
        Tensor gi({h}), gf({h}), gg({h}), go({h}), ct({h}), ht({h});
        for (std::size_t r = 0; r < h; ++r) {
            double zi = wts.b.data[r];
            double zf = wts.b.data[h + r];
            double zg = wts.b.data[2 * h + r];
            double zo = wts.b.data[3 * h + r];
            for (std::size_t c = 0; c < f; ++c) {
                const double xv = x.at(c, t);
                zi += wts.W.at(r, c) * xv;
                zf += wts.W.at(h + r, c) * xv;
                zg += wts.W.at(2 * h + r, c) * xv;
                zo += wts.W.at(3 * h + r, c) * xv;
            }
            for (std::size_t c = 0; c < h; ++c) {
                const double hv = h_prev.data[c];
                zi += wts.U.at(r, c) * hv;
                zf += wts.U.at(h + r, c) * hv;
                zg += wts.U.at(2 * h + r, c) * hv;
                zo += wts.U.at(3 * h + r, c) * hv;
            }
            gi.data[r] = sigmoid(zi);
            gf.data[r] = sigmoid(zf);
            gg.data[r] = std::tanh(zg);
            go.data[r] = sigmoid(zo);
            ct.data[r] = gf.data[r] * c_prev.data[r] + gi.data[r] * gg.data[r];
            ht.data[r] = go.data[r] * std::tanh(ct.data[r]);
            hseq.at(r, t) = ht.data[r];
        }
        if (cache) {
            cache->gate_i.push_back(gi);
            cache->gate_f.push_back(gf);
            cache->gate_g.push_back(gg);
            cache->gate_o.push_back(go);
            cache->cell.push_back(ct);
            cache->hidden.push_back(ht);
        }
        h_prev = std::move(ht);
        c_prev = std::move(ct);
    }
    return hseq;
}

LstmGrads lstm_backward(const LstmWeights& wts, const LstmCache& cache, const Tensor& grad_hseq) {
    const std::size_t f = wts.in_features;
    const std::size_t h = wts.hidden;
    const std::size_t steps = cache.hidden.size();
    if (grad_hseq.shape != std::vector<std::size_t>{h, steps})
        throw ConfigError("lstm_backward: grad shape mismatch");
    LstmGrads g{Tensor(cache.x.shape), Tensor(wts.W.shape), Tensor(wts.U.shape),
                Tensor(wts.b.shape)};
    Tensor dh_rec({h});
    Tensor dc_rec({h});
    for (std::size_t step = steps; step-- > 0;) {
        const Tensor& gi = cache.gate_i[step];
        const Tensor& gf = cache.gate_f[step];
        const Tensor& gg = cache.gate_g[step];
        const Tensor& go = cache.gate_o[step];
        const Tensor& ct = cache.cell[step];
        Tensor dz({4 * h});
        Tensor dh_next({h});
        Tensor dc_next({h});
        for (std::size_t r = 0; r < h; ++r) {
            const double dh = grad_hseq.at(r, step) + dh_rec.data[r];
            const double tc = std::tanh(ct.data[r]);
            const double dout = dh * tc;
            double dc = dc_rec.data[r] + dh * go.data[r] * (1.0 - tc * tc);
            const double c_before = step > 0 ? cache.cell[step - 1].data[r] : 0.0;
            const double di = dc * gg.data[r];
            const double df = dc * c_before;
            const double dg = dc * gi.data[r];
            dz.data[r] = di * gi.data[r] * (1.0 - gi.data[r]);
            dz.data[h + r] = df * gf.data[r] * (1.0 - gf.data[r]);
            dz.data[2 * h + r] = dg * (1.0 - gg.data[r] * gg.data[r]);
            dz.data[3 * h + r] = dout * go.data[r] * (1.0 - go.data[r]);
            dc_next.data[r] = dc * gf.data[r];
        }
        for (std::size_t r = 0; r < 4 * h; ++r) {
            const double d = dz.data[r];
            g.b.data[r] += d;
            for (std::size_t c = 0; c < f; ++c) {
                g.W.at(r, c) += d * cache.x.at(c, step);
                g.x.at(c, step) += wts.W.at(r, c) * d;
            }
            if (step > 0) {
                for (std::size_t c = 0; c < h; ++c) {
                    g.U.at(r, c) += d * cache.hidden[step - 1].data[c];
                    dh_next.data[c] += wts.U.at(r, c) * d;
                }
            }
        }
        dh_rec = std::move(dh_next);
        dc_rec = std::move(dc_next);
    }
    return g;
}

Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (W.dims() != 2 || x.dims() != 1) throw ConfigError("dense_forward: expected W 2-D, x 1-D");
    const std::size_t rows = W.shape[0];
    const std::size_t cols = W.shape[1];
    if (x.size() != cols || b.size() != rows)
        throw ConfigError("dense_forward: shape mismatch");
    Tensor y({rows});
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b.data[r];
        for (std::size_t c = 0; c < cols; ++c) acc += W.at(r, c) * x.data[c];
        y.data[r] = acc;
    }
    return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& W, const Tensor& grad_out) {
    const std::size_t rows = W.shape[0];
    const std::size_t cols = W.shape[1];
    if (grad_out.size() != rows) throw ConfigError("dense_backward: grad shape mismatch");
    DenseGrads g{Tensor(x.shape), Tensor(W.shape), Tensor({rows})};
    for (std::size_t r = 0; r < rows; ++r) {
        const double d = grad_out.data[r];
        g.b.data[r] = d;
        for (std::size_t c = 0; c < cols; ++c) {
            g.W.at(r, c) = d * x.data[c];
            g.x.data[c] += W.at(r, c) * d;
        }
    }
    return g;
}

DropoutResult dropout(const Tensor& x, double p, RunMode mode, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: p must be in [0, 1)");
    DropoutResult r;
    r.mask = Tensor(x.shape);
    r.mask.fill(1.0);
    if (mode == RunMode::infer || p == 0.0) {
        r.output = x;
        return r;
    }
    const double keep = 1.0 - p;
    std::bernoulli_distribution dist(keep);
    r.output = Tensor(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = dist(rng) ? 1.0 : 0.0;
        r.mask.data[i] = m;
        r.output.data[i] = x.data[i] * m / keep;
    }
    return r;
}

Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask, double p) {
    if (!same_shape(grad_out, mask)) throw ConfigError("dropout_backward: shape mismatch");
    const double keep = 1.0 - p;
    Tensor g(grad_out.shape);
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        g.data[i] = grad_out.data[i] * mask.data[i] / keep;
    return g;
}

SoftmaxCeResult softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    if (logits.dims() != 1 || logits.size() == 0)
        throw ConfigError("softmax_cross_entropy: logits must be a non-empty vector");
    if (label >= logits.size())
        throw ConfigError("softmax_cross_entropy: label " + std::to_string(label) +
                          " out of range");
    SoftmaxCeResult r;
    const double mx = *std::max_element(logits.data.begin(), logits.data.end());
    double denom = 0.0;
    r.probs = Tensor(logits.shape);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        r.probs.data[i] = std::exp(logits.data[i] - mx);
        denom += r.probs.data[i];
    }
    for (auto& v : r.probs.data) v /= denom;
    r.loss = -std::log(r.probs.data[label]);
    r.grad_logits = r.probs;
    r.grad_logits.data[label] -= 1.0;
    return r;
}

} // namespace pendiag::nn
