#include "pendiag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "pendiag/errors.hpp"
#include "pendiag/nn.hpp"
#include "pendiag/rng.hpp"

namespace pendiag {

namespace {

using ordered_json = nlohmann::ordered_json;

MetricValue ratio(double num, double denom) {
    if (denom == 0.0) return {0.0, false};
    return {num / denom, true};
}

ordered_json to_json(const MetricValue& m) {
    return ordered_json{{"value", m.value}, {"defined", m.defined}};
}

ordered_json to_json(const MetricReport& r) {
    ordered_json j;
    j["confusion"] = {{"tp", r.confusion.tp},
                      {"fp", r.confusion.fp},
                      {"tn", r.confusion.tn},
                      {"fn", r.confusion.fn}};
    j["accuracy"] = to_json(r.accuracy);
    j["precision"] = to_json(r.precision);
    j["recall"] = to_json(r.recall);
    j["specificity"] = to_json(r.specificity);
    j["f1"] = to_json(r.f1);
    j["mcc"] = to_json(r.mcc);
    return j;
}

std::string cell(const MetricValue& m) {
    if (!m.defined) return "n/a";
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << m.value;
    return out.str();
}

} // namespace

void add_outcome(ConfusionMatrix& cm, ClassLabel truth, ClassLabel predicted) {
    if (truth == ClassLabel::PD) {
        if (predicted == ClassLabel::PD)
            ++cm.tp;
        else
            ++cm.fn;
    } else {
        if (predicted == ClassLabel::PD)
            ++cm.fp;
        else
            ++cm.tn;
    }
}

MetricReport compute_metrics(const ConfusionMatrix& cm) {
    const auto tp = static_cast<double>(cm.tp);
    const auto fp = static_cast<double>(cm.fp);
    const auto tn = static_cast<double>(cm.tn);
    const auto fn = static_cast<double>(cm.fn);
    MetricReport r;
    r.confusion = cm;
    r.accuracy = ratio(tp + tn, tp + tn + fp + fn);
    r.precision = ratio(tp, tp + fp);
    r.recall = ratio(tp, tp + fn);
    r.specificity = ratio(tn, tn + fp);
    r.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom == 0.0)
        r.mcc = {0.0, false};
    else
        r.mcc = {(tp * tn - fp * fn) / std::sqrt(denom), true};
    return r;
}

ClassLabel majority_vote(std::size_t pd_votes, std::size_t total, double mean_p_pd) {
    if (total == 0) throw ConfigError("majority_vote: no votes");
    if (pd_votes > total) throw ConfigError("majority_vote: more votes than ballots");
    if (2 * pd_votes > total) return ClassLabel::PD;
    if (2 * pd_votes < total) return ClassLabel::HC;
    return mean_p_pd >= 0.5 ? ClassLabel::PD : ClassLabel::HC;
}

EvaluationResult evaluate(const ModelParams& params, const std::vector<DrawSequence>& seqs,
                          const PreprocessConfig& cfg) {
    if (seqs.empty()) throw DataError("no sequences to evaluate");
    if (cfg.eval_stride == 0) throw ConfigError("eval_stride must be positive");
    EvaluationResult result;
    Rng unused(0);
    for (const auto& seq : seqs) {
        FeatureSeries series = preprocess_sequence(seq, cfg);
        if (series.length() < cfg.window) {
            result.skipped.push_back(seq.subject_id);
            continue;
        }
        auto patches = segment(series, cfg.window, cfg.eval_stride);
        SequencePrediction sp;
        sp.subject_id = seq.subject_id;
        sp.truth = seq.label;
        sp.patches = patches.size();
        double p_pd_sum = 0.0;
        for (const auto& patch : patches) {
            Tensor logits = model_forward(params, patch.data, nn::RunMode::infer, unused);
            Tensor probs = softmax(logits);
            const double p_pd = probs.data[1];
            p_pd_sum += p_pd;
            const ClassLabel vote = p_pd > probs.data[0] ? ClassLabel::PD : ClassLabel::HC;
            if (vote == ClassLabel::PD) ++sp.pd_votes;
            add_outcome(result.patch.confusion, seq.label, vote);
        }
        sp.mean_p_pd = p_pd_sum / static_cast<double>(patches.size());
        sp.predicted = majority_vote(sp.pd_votes, sp.patches, sp.mean_p_pd);
        add_outcome(result.sequence.confusion, sp.truth, sp.predicted);
        result.sequences.push_back(std::move(sp));
    }
    if (result.sequences.empty())
        throw DataError("every sequence was shorter than one analysis window");
    result.patch = compute_metrics(result.patch.confusion);
    result.sequence = compute_metrics(result.sequence.confusion);
    return result;
}

std::string metrics_to_json(const EvaluationResult& result) {
    ordered_json j;
    j["patch"] = to_json(result.patch);
    j["sequence"] = to_json(result.sequence);
    ordered_json per_seq = ordered_json::array();
    for (const auto& s : result.sequences) {
        per_seq.push_back({{"subject_id", s.subject_id},
                           {"truth", to_string(s.truth)},
                           {"predicted", to_string(s.predicted)},
                           {"patches", s.patches},
                           {"pd_votes", s.pd_votes},
                           {"mean_p_pd", s.mean_p_pd}});
    }
    j["per_sequence"] = std::move(per_seq);
    j["skipped"] = result.skipped;
    return j.dump(2) + "\n";
}

std::string metrics_to_text(const EvaluationResult& result) {
    std::ostringstream out;
    out << std::left << std::setw(14) << "metric" << std::right << std::setw(10) << "patch"
        << std::setw(10) << "sequence" << '\n';
    const std::pair<const char*, std::pair<MetricValue, MetricValue>> rows[] = {
        {"accuracy", {result.patch.accuracy, result.sequence.accuracy}},
        {"precision", {result.patch.precision, result.sequence.precision}},
        {"recall", {result.patch.recall, result.sequence.recall}},
        {"specificity", {result.patch.specificity, result.sequence.specificity}},
        {"f1", {result.patch.f1, result.sequence.f1}},
        {"mcc", {result.patch.mcc, result.sequence.mcc}},
    };
    for (const auto& [name, vals] : rows) {
        out << std::left << std::setw(14) << name << std::right << std::setw(10)
            << cell(vals.first) << std::setw(10) << cell(vals.second) << '\n';
    }
    const auto& pc = result.patch.confusion;
    const auto& sc = result.sequence.confusion;
    out << "patch confusion: tp=" << pc.tp << " fp=" << pc.fp << " tn=" << pc.tn
        << " fn=" << pc.fn << '\n';
    out << "sequence confusion: tp=" << sc.tp << " fp=" << sc.fp << " tn=" << sc.tn
        << " fn=" << sc.fn << '\n';
    if (!result.skipped.empty()) {
        out << "skipped (too short):";
        for (const auto& id : result.skipped) out << ' ' << id;
        out << '\n';
    }
    return out.str();
}

} // namespace pendiag
