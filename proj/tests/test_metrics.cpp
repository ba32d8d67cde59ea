#include <cmath>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "pendiag/metrics.hpp"
#include "pendiag/train.hpp"

using namespace pendiag;

namespace {

// Independent recomputation straight from the count definitions.
struct Oracle {
    double acc, prec, rec, spec, f1, mcc;
};

Oracle oracle_from(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
    double TP = static_cast<double>(tp), FP = static_cast<double>(fp);
    double TN = static_cast<double>(tn), FN = static_cast<double>(fn);
    Oracle o{};
    o.acc = (TP + TN) / (TP + TN + FP + FN);
    o.prec = TP / (TP + FP);
    o.rec = TP / (TP + FN);
    o.spec = TN / (TN + FP);
    o.f1 = 2.0 * TP / (2.0 * TP + FP + FN);
    o.mcc = (TP * TN - FP * FN) /
            std::sqrt((TP + FP) * (TP + FN) * (TN + FP) * (TN + FN));
    return o;
}

} // namespace

TEST_CASE("confusion counting treats PD as positive") {
    ConfusionMatrix cm;
    add_outcome(cm, ClassLabel::PD, ClassLabel::PD);
    add_outcome(cm, ClassLabel::PD, ClassLabel::HC);
    add_outcome(cm, ClassLabel::HC, ClassLabel::HC);
    add_outcome(cm, ClassLabel::HC, ClassLabel::PD);
    CHECK(cm.tp == 1);
    CHECK(cm.fn == 1);
    CHECK(cm.tn == 1);
    CHECK(cm.fp == 1);
}

TEST_CASE("metric values match the count definitions on a fixed matrix") {
    ConfusionMatrix cm{10, 0, 15, 1}; // tp, fp, tn, fn
    auto rep = compute_metrics(cm);
    auto o = oracle_from(10, 0, 15, 1);

    CHECK(std::abs(rep.accuracy.value - o.acc) < 5e-5);
    CHECK(std::abs(rep.precision.value - o.prec) < 5e-5);
    CHECK(std::abs(rep.recall.value - o.rec) < 5e-5);
    CHECK(std::abs(rep.specificity.value - o.spec) < 5e-5);
    CHECK(std::abs(rep.f1.value - o.f1) < 5e-5);
    CHECK(std::abs(rep.mcc.value - o.mcc) < 5e-5);

    // frozen reference numbers for the same matrix
    CHECK(rep.accuracy.value == doctest::Approx(0.961538).epsilon(1e-4));
    CHECK(rep.precision.value == doctest::Approx(1.0));
    CHECK(rep.recall.value == doctest::Approx(0.909091).epsilon(1e-4));
    CHECK(rep.specificity.value == doctest::Approx(1.0));
    CHECK(rep.f1.value == doctest::Approx(0.952381).epsilon(1e-4));
    CHECK(rep.mcc.value == doctest::Approx(0.923185).epsilon(1e-4));
    for (const MetricValue* m : {&rep.accuracy, &rep.precision, &rep.recall,
                                 &rep.specificity, &rep.f1, &rep.mcc})
        CHECK(m->defined);
}

TEST_CASE("metrics agree with the oracle on random matrices") {
    Rng rng(derive_seed(100, "metrics_prop"));
    std::uniform_int_distribution<std::size_t> d(0, 40);
    for (int trial = 0; trial < 500; ++trial) {
        ConfusionMatrix cm{d(rng), d(rng), d(rng), d(rng)};
        if (cm.tp + cm.fp + cm.tn + cm.fn == 0) continue;
        auto rep = compute_metrics(cm);
        auto o = oracle_from(cm.tp, cm.fp, cm.tn, cm.fn);
        if (rep.accuracy.defined) CHECK(rep.accuracy.value == doctest::Approx(o.acc));
        if (rep.precision.defined) CHECK(rep.precision.value == doctest::Approx(o.prec));
        if (rep.recall.defined) CHECK(rep.recall.value == doctest::Approx(o.rec));
        if (rep.specificity.defined) CHECK(rep.specificity.value == doctest::Approx(o.spec));
        if (rep.f1.defined) CHECK(rep.f1.value == doctest::Approx(o.f1));
        if (rep.mcc.defined) CHECK(rep.mcc.value == doctest::Approx(o.mcc));
    }
}

TEST_CASE("vanishing denominators mark metrics undefined instead of NaN") {
    SUBCASE("no positive predictions") {
        auto rep = compute_metrics(ConfusionMatrix{0, 0, 5, 3});
        CHECK_FALSE(rep.precision.defined);
        CHECK(rep.precision.value == 0.0);
        CHECK_FALSE(rep.mcc.defined);
        CHECK(rep.accuracy.defined);
    }
    SUBCASE("no actual positives") {
        auto rep = compute_metrics(ConfusionMatrix{0, 2, 5, 0});
        CHECK_FALSE(rep.recall.defined);
        CHECK_FALSE(rep.mcc.defined);
    }
    SUBCASE("empty matrix") {
        auto rep = compute_metrics(ConfusionMatrix{0, 0, 0, 0});
        CHECK_FALSE(rep.accuracy.defined);
        CHECK_FALSE(rep.f1.defined);
    }
    SUBCASE("all true positives keeps f1 defined") {
        auto rep = compute_metrics(ConfusionMatrix{4, 0, 0, 0});
        CHECK(rep.f1.defined);
        CHECK(rep.f1.value == doctest::Approx(1.0));
        CHECK_FALSE(rep.specificity.defined);
    }
}

TEST_CASE("mcc survives counts that overflow 32-bit intermediate products") {
    ConfusionMatrix cm{100000, 1, 100000, 1};
    auto rep = compute_metrics(cm);
    CHECK(rep.mcc.defined);
    CHECK(rep.mcc.value == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("majority vote counts ballots, mean probability breaks ties") {
    CHECK(majority_vote(3, 5, 0.1) == ClassLabel::PD);
    CHECK(majority_vote(2, 5, 0.9) == ClassLabel::HC);
    CHECK(majority_vote(2, 4, 0.51) == ClassLabel::PD); // tie, lean positive
    CHECK(majority_vote(2, 4, 0.5) == ClassLabel::PD);  // tie at exactly half
    CHECK(majority_vote(2, 4, 0.49) == ClassLabel::HC);
    CHECK_THROWS_AS(majority_vote(0, 0, 0.5), ConfigError);
    CHECK_THROWS_AS(majority_vote(5, 4, 0.5), ConfigError);
}

TEST_CASE("evaluation folds patch votes into per-sequence calls") {
    // deterministic drawing stand-ins: PD sequences oscillate much faster,
    // and the model is replaced by a freshly trained tiny net
    ModelConfig mcfg;
    mcfg.window = 16;
    mcfg.conv_stride = 1;
    mcfg.conv1_out = 4;
    mcfg.conv2_out = 6;
    mcfg.fc_hidden = 8;
    mcfg.dropout_p = 0.0;

    PreprocessConfig pcfg;
    pcfg.window = 16;
    pcfg.base_stride = 4;
    pcfg.eval_stride = 8;

    auto make_seq = [](const std::string& id, ClassLabel label, double freq,
                       std::size_t n) {
        DrawSequence s;
        s.subject_id = id;
        s.label = label;
        for (std::size_t i = 0; i < n; ++i) {
            PenSample smp;
            smp.timestamp = static_cast<double>(i) / 100.0;
            smp.x = std::sin(freq * smp.timestamp);
            smp.y = std::cos(freq * smp.timestamp);
            smp.pressure = 1.0;
            s.samples.push_back(smp);
        }
        return s;
    };

    std::vector<DrawSequence> train_seqs, test_seqs;
    for (int i = 0; i < 4; ++i) {
        train_seqs.push_back(make_seq("HC_t" + std::to_string(i), ClassLabel::HC,
                                      4.0 + 0.2 * i, 240));
        train_seqs.push_back(make_seq("PD_t" + std::to_string(i), ClassLabel::PD,
                                      40.0 + 2.0 * i, 240));
    }
    test_seqs.push_back(make_seq("HC_e", ClassLabel::HC, 4.1, 200));
    test_seqs.push_back(make_seq("PD_e", ClassLabel::PD, 41.0, 200));
    test_seqs.push_back(make_seq("tiny", ClassLabel::HC, 4.0, 10)); // below one window

    auto patches = make_balanced_patches(train_seqs, pcfg);
    TrainConfig tcfg;
    tcfg.epochs = 30;
    tcfg.batch_size = 16;
    tcfg.seed = 11;
    auto trained = train_model(patches, mcfg, tcfg);

    auto result = evaluate(trained.best, test_seqs, pcfg);
    REQUIRE(result.sequences.size() == 2);
    REQUIRE(result.skipped == std::vector<std::string>{"tiny"});

    for (const auto& sp : result.sequences) {
        CHECK(sp.patches > 0);
        CHECK(sp.pd_votes <= sp.patches);
        CHECK(sp.mean_p_pd >= 0.0);
        CHECK(sp.mean_p_pd <= 1.0);
        CHECK(sp.predicted == sp.truth); // the toy problem is separable
    }
    CHECK(result.sequence.accuracy.value == doctest::Approx(1.0));
    // patch totals be consistent with the sequence tallies
    std::size_t patch_total = result.patch.confusion.tp + result.patch.confusion.fp +
                              result.patch.confusion.tn + result.patch.confusion.fn;
    std::size_t from_seqs = 0;
    for (const auto& sp : result.sequences) from_seqs += sp.patches;
    CHECK(patch_total == from_seqs);

    SUBCASE("empty input is an error") {
        CHECK_THROWS_AS(evaluate(trained.best, {}, pcfg), DataError);
    }
    SUBCASE("all-short input is an error") {
        std::vector<DrawSequence> shorts = {make_seq("s1", ClassLabel::HC, 4.0, 8)};
        CHECK_THROWS_AS(evaluate(trained.best, shorts, pcfg), DataError);
    }
    SUBCASE("json rendering carries the full result") {
        auto j = nlohmann::json::parse(metrics_to_json(result));
        CHECK(j.at("patch").at("confusion").at("tp").get<std::size_t>() ==
              result.patch.confusion.tp);
        CHECK(j.at("sequence").at("accuracy").at("value").get<double>() ==
              doctest::Approx(1.0));
        CHECK(j.at("sequence").at("accuracy").at("defined").get<bool>());
        CHECK(j.at("per_sequence").size() == 2);
        CHECK(j.at("per_sequence")[0].at("subject_id").is_string());
        CHECK(j.at("skipped")[0].get<std::string>() == "tiny");
    }
    SUBCASE("text rendering mentions the headline numbers") {
        std::string text = metrics_to_text(result);
        CHECK(text.find("accuracy") != std::string::npos);
        CHECK(text.find("mcc") != std::string::npos);
        CHECK(text.find("skipped") != std::string::npos);
    }
}
