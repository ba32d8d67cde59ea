#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pendiag/model.hpp"
#include "pendiag/preprocess.hpp"
#include "pendiag/signal.hpp"

namespace pendiag {

// PD is the positive class throughout.
struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

void add_outcome(ConfusionMatrix& cm, ClassLabel truth, ClassLabel predicted);

// A metric whose denominator vanished reports value 0 and defined=false
// instead of NaN.
struct MetricValue {
    double value = 0.0;
    bool defined = true;
};

struct MetricReport {
    ConfusionMatrix confusion;
    MetricValue accuracy, precision, recall, specificity, f1, mcc;
};

MetricReport compute_metrics(const ConfusionMatrix& cm);

ClassLabel majority_vote(std::size_t pd_votes, std::size_t total, double mean_p_pd);

struct SequencePrediction {
    std::string subject_id;
    ClassLabel truth = ClassLabel::HC;
    ClassLabel predicted = ClassLabel::HC;
    std::size_t patches = 0;
    std::size_t pd_votes = 0;
    double mean_p_pd = 0.0;
};

struct EvaluationResult {
    MetricReport patch;
    MetricReport sequence;
    std::vector<SequencePrediction> sequences;
    std::vector<std::string> skipped; // ids of sequences shorter than one window
};

// Windows each sequence at cfg.eval_stride, classifies every window in
// inference mode, and folds the per-window votes into one prediction per
// sequence. Sequences too short for a single window are skipped and listed.
EvaluationResult evaluate(const ModelParams& params, const std::vector<DrawSequence>& seqs,
                          const PreprocessConfig& cfg);

std::string metrics_to_json(const EvaluationResult& result);
std::string metrics_to_text(const EvaluationResult& result);

} // namespace pendiag
