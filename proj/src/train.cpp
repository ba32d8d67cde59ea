#include "pendiag/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "pendiag/errors.hpp"
#include "pendiag/format.hpp"
#include "pendiag/nn.hpp"
#include "pendiag/rng.hpp"

namespace pendiag {

namespace {

using ordered_json = nlohmann::ordered_json;

std::size_t label_index(ClassLabel l) { return static_cast<std::size_t>(l); }

std::size_t argmax(const Tensor& t) {
    return static_cast<std::size_t>(
        std::max_element(t.data.begin(), t.data.end()) - t.data.begin());
}

void check_patches(const std::vector<Patch>& patches, const ModelConfig& cfg) {
    for (const auto& p : patches) {
        if (p.data.shape != std::vector<std::size_t>{cfg.in_features, cfg.window})
            throw DataError("patch for " + p.subject_id + " does not match model input [" +
                            std::to_string(cfg.in_features) + " x " +
                            std::to_string(cfg.window) + "]");
        if (label_index(p.label) >= cfg.classes)
            throw DataError("patch label out of range for model");
    }
}

void accumulate(ModelParams& acc, const ModelParams& g) {
    auto a = param_views(acc);
    auto b = param_views(g);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].tensor->size(); ++j)
            a[i].tensor->data[j] += b[i].tensor->data[j];
}

void scale(ModelParams& acc, double s) {
    for (auto& v : param_views(acc))
        for (auto& x : v.tensor->data) x *= s;
}

} // namespace

AdamState make_adam(const ModelParams& params, const AdamConfig& cfg) {
    if (cfg.lr <= 0.0 || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 ||
        cfg.beta2 >= 1.0 || cfg.eps <= 0.0)
        throw ConfigError("adam: lr > 0, betas in [0,1), eps > 0 required");
    AdamState st;
    st.config = cfg;
    for (const auto& v : param_views(params)) {
        st.m.emplace_back(v.tensor->shape);
        st.v.emplace_back(v.tensor->shape);
    }
    return st;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state) {
    auto pv = param_views(params);
    auto gv = param_views(grads);
    if (state.m.size() != pv.size()) throw ConfigError("adam state does not match model");
    ++state.step;
    const AdamConfig& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < pv.size(); ++i) {
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        Tensor& theta = *pv[i].tensor;
        const Tensor& g = *gv[i].tensor;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m.data[j] = c.beta1 * m.data[j] + (1.0 - c.beta1) * g.data[j];
            v.data[j] = c.beta2 * v.data[j] + (1.0 - c.beta2) * g.data[j] * g.data[j];
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            theta.data[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

SplitPatches split_patches(std::vector<Patch> patches, double val_fraction, std::uint64_t seed) {
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("val_fraction must be in [0, 1)");
    Rng rng(derive_seed(seed, "split"));
    std::shuffle(patches.begin(), patches.end(), rng);
    const auto n = static_cast<double>(patches.size());
    const auto train_n =
        static_cast<std::size_t>(std::ceil((1.0 - val_fraction) * n));
    SplitPatches out;
    out.train.assign(patches.begin(), patches.begin() + static_cast<std::ptrdiff_t>(train_n));
    out.val.assign(patches.begin() + static_cast<std::ptrdiff_t>(train_n), patches.end());
    return out;
}

EvalStats eval_patches(const ModelParams& params, const std::vector<Patch>& patches) {
    if (patches.empty()) throw DataError("no patches to evaluate");
    Rng unused(0);
    EvalStats st;
    std::size_t correct = 0;
    for (const auto& p : patches) {
        Tensor logits = model_forward(params, p.data, nn::RunMode::infer, unused);
        auto sm = nn::softmax_cross_entropy(logits, label_index(p.label));
        st.loss += sm.loss;
        if (argmax(logits) == label_index(p.label)) ++correct;
    }
    st.loss /= static_cast<double>(patches.size());
    st.acc = static_cast<double>(correct) / static_cast<double>(patches.size());
    return st;
}

TrainResult train_model(const std::vector<Patch>& patches, const ModelConfig& mcfg,
                        const TrainConfig& tcfg) {
    if (tcfg.batch_size == 0) throw ConfigError("batch_size must be positive");
    check_patches(patches, mcfg);

    Rng init_rng(derive_seed(tcfg.seed, "init"));
    TrainResult result;
    result.best = build_model(mcfg, init_rng);
    if (tcfg.epochs == 0) return result;

    if (patches.empty()) throw DataError("no patches to train on");
    auto split = split_patches(patches, tcfg.val_fraction, tcfg.seed);
    if (split.train.empty() || split.val.empty())
        throw DataError("too few patches to split into train and validation sets");

    ModelParams params = result.best;
    AdamState adam = make_adam(params, tcfg.adam);
    Rng drop_rng(derive_seed(tcfg.seed, "dropout"));
    const std::size_t n = split.train.size();

    for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(tcfg.seed, "shuffle", epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += tcfg.batch_size) {
            const std::size_t stop = std::min(n, start + tcfg.batch_size);
            ModelParams acc = zero_like(params);
            for (std::size_t i = start; i < stop; ++i) {
                const Patch& p = split.train[order[i]];
                ModelCache cache;
                Tensor logits = model_forward(params, p.data, nn::RunMode::train, drop_rng, &cache);
                auto sm = nn::softmax_cross_entropy(logits, label_index(p.label));
                if (!std::isfinite(sm.loss))
                    throw NumericError("non-finite loss " + format_double(sm.loss) + " at epoch " +
                                       std::to_string(epoch) + ", batch " +
                                       std::to_string(start / tcfg.batch_size));
                loss_sum += sm.loss;
                if (argmax(logits) == label_index(p.label)) ++correct;
                auto back = model_backward(params, cache, sm.grad_logits);
                accumulate(acc, back.grads);
            }
            scale(acc, 1.0 / static_cast<double>(stop - start));
            adam_step(params, acc, adam);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(n);
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(n);
        EvalStats val = eval_patches(params, split.val);
        stats.val_loss = val.loss;
        stats.val_acc = val.acc;
        result.history.push_back(stats);

        const bool better = result.best_epoch == 0 || stats.val_acc > result.best_val_acc ||
                            (stats.val_acc == result.best_val_acc &&
                             stats.val_loss < result.best_val_loss);
        if (better) {
            result.best = params;
            result.best_epoch = epoch;
            result.best_val_acc = stats.val_acc;
            result.best_val_loss = stats.val_loss;
        }
    }
    return result;
}

std::string history_to_csv(const std::vector<EpochStats>& history) {
    std::ostringstream out;
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (const auto& h : history) {
        out << h.epoch << ',' << format_double(h.train_loss) << ',' << format_double(h.train_acc)
            << ',' << format_double(h.val_loss) << ',' << format_double(h.val_acc) << '\n';
    }
    return out.str();
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
    ordered_json j;
    j["format_version"] = 1;
    const ModelConfig& c = params.config;
    j["model_config"] = {{"window", c.window},
                         {"in_features", c.in_features},
                         {"lstm_hidden", c.lstm_hidden},
                         {"conv1_out", c.conv1_out},
                         {"conv2_out", c.conv2_out},
                         {"kernel", c.kernel},
                         {"conv_stride", c.conv_stride},
                         {"pool_size", c.pool_size},
                         {"pool_stride", c.pool_stride},
                         {"fc_hidden", c.fc_hidden},
                         {"classes", c.classes},
                         {"dropout_p", c.dropout_p}};
    ordered_json weights = ordered_json::object();
    for (const auto& v : param_views(params)) {
        if (!v.tensor->all_finite())
            throw NumericError("refusing to save non-finite weights in " + v.name);
        weights[v.name] = {{"shape", v.tensor->shape}, {"data", v.tensor->data}};
    }
    j["weights"] = std::move(weights);
    j["metadata"] = {{"seed", meta.seed},
                     {"epoch", meta.epoch},
                     {"selection_score", meta.selection_score},
                     {"selection_metric", meta.selection_metric}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    try {
        const int version = j.at("format_version").get<int>();
        if (version != 1)
            throw DataError("unsupported checkpoint format version " + std::to_string(version));
        const auto& mc = j.at("model_config");
        ModelConfig cfg;
        cfg.window = mc.at("window").get<std::size_t>();
        cfg.in_features = mc.at("in_features").get<std::size_t>();
        cfg.lstm_hidden = mc.at("lstm_hidden").get<std::size_t>();
        cfg.conv1_out = mc.at("conv1_out").get<std::size_t>();
        cfg.conv2_out = mc.at("conv2_out").get<std::size_t>();
        cfg.kernel = mc.at("kernel").get<std::size_t>();
        cfg.conv_stride = mc.at("conv_stride").get<std::size_t>();
        cfg.pool_size = mc.at("pool_size").get<std::size_t>();
        cfg.pool_stride = mc.at("pool_stride").get<std::size_t>();
        cfg.fc_hidden = mc.at("fc_hidden").get<std::size_t>();
        cfg.classes = mc.at("classes").get<std::size_t>();
        cfg.dropout_p = mc.at("dropout_p").get<double>();

        Checkpoint ck;
        ck.params = empty_params(cfg);
        const auto& weights = j.at("weights");
        for (auto& v : param_views(ck.params)) {
            const auto& w = weights.at(v.name);
            const auto shape = w.at("shape").get<std::vector<std::size_t>>();
            if (shape != v.tensor->shape)
                throw DataError("checkpoint weight " + v.name + " has wrong shape");
            v.tensor->data = w.at("data").get<std::vector<double>>();
            if (v.tensor->data.size() != Tensor::count(shape))
                throw DataError("checkpoint weight " + v.name + " has wrong length");
            if (!v.tensor->all_finite())
                throw DataError("checkpoint weight " + v.name + " contains non-finite values");
        }
        const auto& meta = j.at("metadata");
        ck.meta.seed = meta.at("seed").get<std::uint64_t>();
        ck.meta.epoch = meta.at("epoch").get<std::size_t>();
        ck.meta.selection_score = meta.at("selection_score").get<double>();
        ck.meta.selection_metric = meta.at("selection_metric").get<std::string>();
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid checkpoint " + path.string() + ": " + e.what());
    }
}

} // namespace pendiag
