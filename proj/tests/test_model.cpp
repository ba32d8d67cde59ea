#include <cmath>
#include <vector>

#include "doctest.h"
#include "pendiag/gradcheck.hpp"
#include "pendiag/model.hpp"

using namespace pendiag;

namespace {

Tensor random_input(const ModelConfig& cfg, Rng& rng) {
    Tensor x({cfg.in_features, cfg.window});
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (auto& v : x.data) v = dist(rng);
    return x;
}

} // namespace

TEST_CASE("default shape chain matches the hand calculation") {
    ModelConfig cfg; // window 128, 2 input channels, 2 hidden units
    auto chain = shape_chain(cfg);
    REQUIRE(chain.size() == 9);

    auto expect = [&](std::size_t i, const char* name, std::size_t ch, std::size_t len) {
        CHECK(chain[i].name == name);
        CHECK(chain[i].channels == ch);
        CHECK(chain[i].length == len);
    };
    expect(0, "input", 2, 128);
    expect(1, "concat", 4, 128);
    expect(2, "conv1", 16, 63);
    expect(3, "pool1", 16, 31);
    expect(4, "conv2", 32, 15);
    expect(5, "pool2", 32, 7);
    expect(6, "flatten", 1, 224);
    expect(7, "fc1", 1, 64);
    expect(8, "fc2", 1, 2);
}

TEST_CASE("parameter count for the default model") {
    ModelConfig cfg;
    CHECK(count_params(cfg) == 16346);
    // per-block tally:
    //   lstm: 4H(F+H+1) = 8*(2+2+1)            = 40
    //   conv1: 16*(4*3)+16                      = 208
    //   conv2: 32*(16*3)+32                     = 1568
    //   fc1: 64*224+64                          = 14400
    //   fc2: 2*64+2                             = 130
    CHECK(40 + 208 + 1568 + 14400 + 130 == 16346);

    SUBCASE("wider dense head") {
        cfg.fc_hidden = 128;
        CHECK(count_params(cfg) == 40 + 208 + 1568 + 128 * 224 + 128 + 2 * 128 + 2);
    }
}

TEST_CASE("too-small windows fail at the stage that collapses") {
    ModelConfig cfg;
    cfg.window = 4; // conv1 -> length 1, pool1 needs 2
    CHECK_THROWS_WITH_AS(shape_chain(cfg), doctest::Contains("pool1"), ConfigError);

    cfg.window = 2; // conv1 kernel no longer fits
    CHECK_THROWS_WITH_AS(shape_chain(cfg), doctest::Contains("conv1"), ConfigError);
}

TEST_CASE("built parameters match the declared shapes and count") {
    ModelConfig cfg;
    Rng rng(derive_seed(9, "build"));
    auto params = build_model(cfg, rng);

    CHECK(params.lstm.W.shape == std::vector<std::size_t>{8, 2});
    CHECK(params.conv1.kernels.shape == std::vector<std::size_t>{16, 4, 3});
    CHECK(params.conv2.kernels.shape == std::vector<std::size_t>{32, 16, 3});
    CHECK(params.fc1_W.shape == std::vector<std::size_t>{64, 224});
    CHECK(params.fc2_W.shape == std::vector<std::size_t>{2, 64});

    std::size_t total = 0;
    for (const auto& view : param_views(params)) total += view.tensor->size();
    CHECK(total == count_params(cfg));

    SUBCASE("view order is the checkpoint order") {
        std::vector<std::string> names;
        for (const auto& view : param_views(params)) names.push_back(view.name);
        CHECK(names == std::vector<std::string>{"lstm.W", "lstm.U", "lstm.b", "conv1.k",
                                                "conv1.b", "conv2.k", "conv2.b", "fc1.W",
                                                "fc1.b", "fc2.W", "fc2.b"});
    }
    SUBCASE("const views alias the same tensors") {
        const ModelParams& cref = params;
        auto mviews = param_views(params);
        auto cviews = param_views(cref);
        REQUIRE(mviews.size() == cviews.size());
        for (std::size_t i = 0; i < mviews.size(); ++i) {
            CHECK(mviews[i].name == cviews[i].name);
            CHECK(mviews[i].tensor == cviews[i].tensor);
        }
    }
}

TEST_CASE("forward pass is deterministic and finite") {
    ModelConfig cfg;
    Rng rng(derive_seed(9, "fwd"));
    auto params = build_model(cfg, rng);
    Tensor x = random_input(cfg, rng);

    Rng unused(1);
    Tensor a = model_forward(params, x, nn::RunMode::infer, unused);
    Tensor b = model_forward(params, x, nn::RunMode::infer, unused);
    REQUIRE(a.shape == std::vector<std::size_t>{2});
    CHECK(a.data == b.data); // inference consumes no randomness
    CHECK(a.all_finite());

    Tensor p = softmax(a);
    CHECK(p.data[0] + p.data[1] == doctest::Approx(1.0));
    CHECK(p.data[0] >= 0.0);
}

TEST_CASE("train mode dropout changes activations, inference does not") {
    ModelConfig cfg;
    Rng rng(derive_seed(10, "drop"));
    auto params = build_model(cfg, rng);
    Tensor x = random_input(cfg, rng);

    Rng d1(derive_seed(10, "d1"));
    Rng d2(derive_seed(10, "d2"));
    Tensor t1 = model_forward(params, x, nn::RunMode::train, d1);
    Tensor t2 = model_forward(params, x, nn::RunMode::train, d2);
    CHECK(t1.data != t2.data); // different masks

    Rng unused(1);
    Tensor i1 = model_forward(params, x, nn::RunMode::infer, unused);
    Tensor i2 = model_forward(params, x, nn::RunMode::infer, unused);
    CHECK(i1.data == i2.data);
}

TEST_CASE("cache shapes line up with the shape chain") {
    ModelConfig cfg;
    Rng rng(derive_seed(12, "cache"));
    auto params = build_model(cfg, rng);
    Tensor x = random_input(cfg, rng);

    ModelCache cache;
    Rng drop(derive_seed(12, "dmask"));
    model_forward(params, x, nn::RunMode::train, drop, &cache);

    CHECK(cache.concat.shape == std::vector<std::size_t>{4, 128});
    CHECK(cache.conv1_act.shape == std::vector<std::size_t>{16, 63});
    CHECK(cache.pool1.output.shape == std::vector<std::size_t>{16, 31});
    CHECK(cache.conv2_act.shape == std::vector<std::size_t>{32, 15});
    CHECK(cache.pool2.output.shape == std::vector<std::size_t>{32, 7});
    CHECK(cache.flat.shape == std::vector<std::size_t>{224});
    CHECK(cache.fc1_act.shape == std::vector<std::size_t>{64});
    CHECK(cache.logits.shape == std::vector<std::size_t>{2});

    // concat rows: raw input first, recurrent output below
    for (std::size_t t = 0; t < 128; ++t) {
        CHECK(cache.concat.at(0, t) == x.at(0, t));
        CHECK(cache.concat.at(1, t) == x.at(1, t));
    }
}

TEST_CASE("backward produces gradients for every parameter") {
    ModelConfig cfg;
    cfg.dropout_p = 0.0;
    Rng rng(derive_seed(14, "bwd"));
    auto params = build_model(cfg, rng);
    Tensor x = random_input(cfg, rng);

    ModelCache cache;
    Rng unused(1);
    Tensor logits = model_forward(params, x, nn::RunMode::train, unused, &cache);
    auto ce = nn::softmax_cross_entropy(logits, 1);
    auto back = model_backward(params, cache, ce.grad_logits);

    CHECK(back.grad_input.shape == x.shape);
    auto gviews = param_views(back.grads);
    auto pviews = param_views(params);
    REQUIRE(gviews.size() == pviews.size());
    bool any_nonzero = false;
    for (std::size_t i = 0; i < gviews.size(); ++i) {
        CHECK(gviews[i].tensor->shape == pviews[i].tensor->shape);
        CHECK(gviews[i].tensor->all_finite());
        for (double v : gviews[i].tensor->data)
            if (v != 0.0) any_nonzero = true;
    }
    CHECK(any_nonzero);
}

TEST_CASE("finite differences confirm the whole-model gradient") {
    auto report = gradcheck::check_model(41);
    INFO("max_rel_err=", report.max_rel_err);
    CHECK(report.pass);
    CHECK(report.max_rel_err <= gradcheck::kTolRecurrent);
}

TEST_CASE("zero_like mirrors shapes with zero values") {
    ModelConfig cfg;
    Rng rng(derive_seed(15, "zl"));
    auto params = build_model(cfg, rng);
    auto zeros = zero_like(params);
    auto zviews = param_views(zeros);
    auto pviews = param_views(params);
    REQUIRE(zviews.size() == pviews.size());
    for (std::size_t i = 0; i < zviews.size(); ++i) {
        CHECK(zviews[i].tensor->shape == pviews[i].tensor->shape);
        for (double v : zviews[i].tensor->data) CHECK(v == 0.0);
    }
}
