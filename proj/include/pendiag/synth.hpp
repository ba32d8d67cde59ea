#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pendiag/signal.hpp"

namespace pendiag {

// Drawing model: repeated pi-shaped cells, pen moving at constant speed
// along piecewise-linear strokes. The PD class draws the same geometry
// slower by speed_factor and picks up a sinusoidal tremor on both axes.
struct SynthConfig {
    std::size_t samples_per_sequence = 1200;
    double sample_rate_hz = 240.0;
    double zigzag_amplitude_mm = 8.0; // peak to peak
    double zigzag_period_s = 1.0 / 2.6;
    double drift_speed_mm_s = 25.0; // net rightward speed of the HC pen
    double tremor_freq_lo_hz = 4.0;
    double tremor_freq_hi_hz = 6.0;
    double tremor_amplitude_mm = 0.3;
    double pd_speed_factor = 0.5;
    double noise_std_mm = 0.02;
    double length_jitter_fraction = 0.1;
    double test_fraction = 0.16;
    // When set, generation refuses configurations whose tremor does not
    // clear the noise floor (amplitude > 3x noise std). Tests that probe
    // the hard regime turn it off.
    bool strict_separability = true;
    std::uint64_t seed = 0;
};

void validate_synth_config(const SynthConfig& cfg);

// Deterministic per (label, cfg, seed). The same seed yields an HC and a PD
// sequence over the same underlying pattern, differing only by speed and
// tremor.
DrawSequence generate_sequence(ClassLabel label, const SynthConfig& cfg, std::uint64_t seed,
                               std::string subject_id = "");

struct SynthCorpus {
    std::vector<DrawSequence> train;
    std::vector<DrawSequence> test;
};

// Distinct subject ids, subject-disjoint split with about test_fraction of
// each class held out (at least one subject per class on each side).
SynthCorpus generate_corpus(std::size_t n_hc, std::size_t n_pd, const SynthConfig& cfg);

} // namespace pendiag
