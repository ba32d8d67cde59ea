#include "pendiag/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pendiag/errors.hpp"
#include "pendiag/rng.hpp"

namespace pendiag {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Fractions of one pattern cycle: vertical stroke up, flat, vertical stroke
// down, flat. Chosen so the pattern's velocity harmonics stay well below the
// tremor band's amplitude.
constexpr double kUpFrac = 0.35;
constexpr double kFlatFrac = 0.15;

// Vertical pattern position over one cycle, in [-1/2, 1/2] of the amplitude.
double zigzag_y(double u) {
    if (u < kUpFrac) return -0.5 + u / kUpFrac;
    if (u < kUpFrac + kFlatFrac) return 0.5;
    if (u < 2.0 * kUpFrac + kFlatFrac) return 0.5 - (u - kUpFrac - kFlatFrac) / kUpFrac;
    return -0.5;
}

// Horizontal progress over one cycle, in [0, 1] of the cell width; the pen
// moves sideways only along the flat strokes.
double zigzag_x(double u) {
    if (u < kUpFrac) return 0.0;
    if (u < kUpFrac + kFlatFrac) return 0.5 * (u - kUpFrac) / kFlatFrac;
    if (u < 2.0 * kUpFrac + kFlatFrac) return 0.5;
    return 0.5 + 0.5 * (u - 2.0 * kUpFrac - kFlatFrac) / kFlatFrac;
}

} // namespace

void validate_synth_config(const SynthConfig& cfg) {
    if (cfg.samples_per_sequence < 2)
        throw ConfigError("synth: samples_per_sequence must be at least 2");
    if (cfg.sample_rate_hz <= 0.0) throw ConfigError("synth: sample rate must be positive");
    if (cfg.zigzag_amplitude_mm <= 0.0 || cfg.zigzag_period_s <= 0.0 ||
        cfg.drift_speed_mm_s <= 0.0)
        throw ConfigError("synth: pattern amplitude, period and drift speed must be positive");
    if (cfg.tremor_freq_lo_hz <= 0.0 || cfg.tremor_freq_hi_hz < cfg.tremor_freq_lo_hz)
        throw ConfigError("synth: tremor frequency range must satisfy 0 < lo <= hi");
    if (cfg.sample_rate_hz <= 2.0 * cfg.tremor_freq_hi_hz)
        throw ConfigError("synth: sample rate must exceed twice the top tremor frequency");
    if (cfg.tremor_amplitude_mm < 0.0 || cfg.noise_std_mm < 0.0)
        throw ConfigError("synth: tremor amplitude and noise std cannot be negative");
    if (cfg.strict_separability && cfg.tremor_amplitude_mm <= 3.0 * cfg.noise_std_mm)
        throw ConfigError("synth: tremor amplitude must exceed 3x noise std "
                          "(set strict_separability=false for the hard regime)");
    if (cfg.pd_speed_factor <= 0.0 || cfg.pd_speed_factor > 1.0)
        throw ConfigError("synth: pd_speed_factor must be in (0, 1]");
    if (cfg.length_jitter_fraction < 0.0 || cfg.length_jitter_fraction >= 1.0)
        throw ConfigError("synth: length_jitter_fraction must be in [0, 1)");
    if (cfg.test_fraction <= 0.0 || cfg.test_fraction >= 1.0)
        throw ConfigError("synth: test_fraction must be in (0, 1)");
}

DrawSequence generate_sequence(ClassLabel label, const SynthConfig& cfg, std::uint64_t seed,
                               std::string subject_id) {
    validate_synth_config(cfg);
    Rng rng(derive_seed(seed, "synth.sequence"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    std::uniform_real_distribution<double> tremor_freq(cfg.tremor_freq_lo_hz,
                                                       cfg.tremor_freq_hi_hz);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // One draw order for both classes: a given seed describes one underlying
    // drawing, rendered healthy or parkinsonian.
    const double len_jitter = sym(rng) * cfg.length_jitter_fraction;
    const double phase = unit(rng);
    const double subject_speed = 1.0 + 0.1 * sym(rng);
    const double subject_amp = cfg.zigzag_amplitude_mm * (1.0 + 0.05 * sym(rng));
    const double pressure_phase = unit(rng) * 2.0 * kPi;
    const double azimuth_phase = unit(rng) * 2.0 * kPi;
    const double altitude_phase = unit(rng) * 2.0 * kPi;
    const double tremor_fx = tremor_freq(rng);
    const double tremor_fy = tremor_freq(rng);
    const double tremor_px = unit(rng) * 2.0 * kPi;
    const double tremor_py = unit(rng) * 2.0 * kPi;

    const bool pd = label == ClassLabel::PD;
    const double speed = subject_speed * (pd ? cfg.pd_speed_factor : 1.0);
    const double cell_width = cfg.drift_speed_mm_s * cfg.zigzag_period_s;
    const double cycles_per_s = speed / cfg.zigzag_period_s;

    const auto n = std::max<std::size_t>(
        2, static_cast<std::size_t>(
               std::llround(static_cast<double>(cfg.samples_per_sequence) * (1.0 + len_jitter))));

    DrawSequence seq;
    seq.subject_id = subject_id.empty() ? to_string(label) : std::move(subject_id);
    seq.label = label;
    seq.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / cfg.sample_rate_hz;
        const double tau = t * cycles_per_s + phase;
        const double cycle = std::floor(tau);
        const double u = tau - cycle;
        double x = cell_width * (cycle + zigzag_x(u));
        double y = subject_amp * zigzag_y(u);
        if (pd) {
            x += cfg.tremor_amplitude_mm * std::sin(2.0 * kPi * tremor_fx * t + tremor_px);
            y += cfg.tremor_amplitude_mm * std::sin(2.0 * kPi * tremor_fy * t + tremor_py);
        }
        x += cfg.noise_std_mm * gauss(rng);
        y += cfg.noise_std_mm * gauss(rng);

        PenSample s;
        s.timestamp = t;
        s.x = x;
        s.y = y;
        s.pressure = 1.2 + 0.05 * std::sin(2.0 * kPi * 0.3 * t + pressure_phase) +
                     0.005 * gauss(rng);
        s.azimuth = 180.0 + 30.0 * std::sin(2.0 * kPi * 0.2 * t + azimuth_phase);
        s.altitude = 60.0 + 10.0 * std::sin(2.0 * kPi * 0.15 * t + altitude_phase);
        seq.samples.push_back(s);
    }
    return seq;
}

namespace {

std::string make_subject_id(ClassLabel label, std::size_t index) {
    std::string num = std::to_string(index + 1);
    while (num.size() < 3) num.insert(num.begin(), '0');
    return to_string(label) + "_" + num;
}

} // namespace

SynthCorpus generate_corpus(std::size_t n_hc, std::size_t n_pd, const SynthConfig& cfg) {
    validate_synth_config(cfg);
    if (n_hc < 2 || n_pd < 2)
        throw ConfigError("synth corpus: need at least 2 subjects per class to split");

    SynthCorpus corpus;
    const struct {
        ClassLabel label;
        std::size_t count;
        const char* split_label;
    } classes[] = {{ClassLabel::HC, n_hc, "synth.split.hc"},
                   {ClassLabel::PD, n_pd, "synth.split.pd"}};
    for (const auto& cls : classes) {
        std::vector<std::size_t> order(cls.count);
        std::iota(order.begin(), order.end(), 0);
        Rng split_rng(derive_seed(cfg.seed, cls.split_label));
        std::shuffle(order.begin(), order.end(), split_rng);
        const auto want = static_cast<std::size_t>(
            std::llround(cfg.test_fraction * static_cast<double>(cls.count)));
        const std::size_t n_test = std::clamp<std::size_t>(want, 1, cls.count - 1);
        std::vector<bool> is_test(cls.count, false);
        for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

        const char* gen_label = cls.label == ClassLabel::PD ? "synth.pd" : "synth.hc";
        for (std::size_t i = 0; i < cls.count; ++i) {
            auto seq = generate_sequence(cls.label, cfg, derive_seed(cfg.seed, gen_label, i),
                                         make_subject_id(cls.label, i));
            (is_test[i] ? corpus.test : corpus.train).push_back(std::move(seq));
        }
    }
    return corpus;
}

} // namespace pendiag
