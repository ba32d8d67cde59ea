#include "pendiag/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pendiag {

std::string to_string(Channel c) {
    switch (c) {
        case Channel::vx: return "vx";
        case Channel::vy: return "vy";
        case Channel::azimuth: return "a";
        case Channel::altitude: return "l";
        case Channel::pressure: return "p";
    }
    return "?";
}

Channel parse_channel(std::string_view name) {
    if (name == "vx") return Channel::vx;
    if (name == "vy") return Channel::vy;
    if (name == "a" || name == "azimuth") return Channel::azimuth;
    if (name == "l" || name == "altitude") return Channel::altitude;
    if (name == "p" || name == "pressure") return Channel::pressure;
    throw ConfigError("unknown feature channel \"" + std::string(name) + "\"");
}

std::size_t patch_count(std::size_t len, std::size_t w, std::size_t stride) {
    if (w == 0 || stride == 0) throw ConfigError("window and stride must be positive");
    if (len < w) return 0;
    return (len - w) / stride + 1;
}

FeatureSeries velocity_features(const DrawSequence& seq, const std::vector<Channel>& selected) {
    if (seq.samples.size() < 2) {
        throw DataError("sequence '" + seq.subject_id + "' too short for velocity features");
    }
    if (selected.empty()) throw ConfigError("no feature channels selected");

    const std::size_t len = seq.samples.size() - 1;
    FeatureSeries out;
    out.subject_id = seq.subject_id;
    out.label = seq.label;
    out.channels = Tensor({selected.size(), len});
    out.channel_names.reserve(selected.size());

    for (std::size_t f = 0; f < selected.size(); ++f) {
        out.channel_names.push_back(to_string(selected[f]));
        for (std::size_t t = 0; t < len; ++t) {
            const PenSample& prev = seq.samples[t];
            const PenSample& cur = seq.samples[t + 1];
            double value = 0.0;
            switch (selected[f]) {
                case Channel::vx:
                case Channel::vy: {
                    const double dt = cur.timestamp - prev.timestamp;
                    if (!(dt > 0.0)) {
                        throw DataError("sequence '" + seq.subject_id +
                                        "': non-positive timestamp interval at sample " +
                                        std::to_string(t + 1));
                    }
                    value = selected[f] == Channel::vx ? (cur.x - prev.x) / dt
                                                       : (cur.y - prev.y) / dt;
                    break;
                }
                // raw channels: truncated to length L-1 (drop the last sample)
                case Channel::azimuth: value = prev.azimuth; break;
                case Channel::altitude: value = prev.altitude; break;
                case Channel::pressure: value = prev.pressure; break;
            }
            out.channels.at(f, t) = value;
        }
    }
    return out;
}

FeatureSeries minmax_normalize(const FeatureSeries& series) {
    FeatureSeries out = series;
    const std::size_t F = series.feature_count();
    const std::size_t len = series.length();
    for (std::size_t f = 0; f < F; ++f) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < len; ++t) {
            lo = std::min(lo, series.channels.at(f, t));
            hi = std::max(hi, series.channels.at(f, t));
        }
        const double range = hi - lo;
        for (std::size_t t = 0; t < len; ++t) {
            out.channels.at(f, t) = range > 0.0 ? (series.channels.at(f, t) - lo) / range : 0.0;
        }
    }
    return out;
}

std::vector<Patch> segment(const FeatureSeries& series, std::size_t w, std::size_t stride) {
    const std::size_t n = patch_count(series.length(), w, stride);
    const std::size_t F = series.feature_count();
    std::vector<Patch> out;
    out.reserve(n);
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t offset = p * stride;
        Patch patch;
        patch.subject_id = series.subject_id;
        patch.label = series.label;
        patch.source_offset = offset;
        patch.data = Tensor({F, w});
        for (std::size_t f = 0; f < F; ++f) {
            for (std::size_t t = 0; t < w; ++t) {
                patch.data.at(f, t) = series.channels.at(f, offset + t);
            }
        }
        out.push_back(std::move(patch));
    }
    return out;
}

std::vector<SegmentationPlan> plan_balanced_strides(const std::vector<FeatureSeries>& series,
                                                    std::size_t w, std::size_t base_stride) {
    if (base_stride == 0) throw ConfigError("base stride must be positive");

    auto class_total = [&](ClassLabel label, std::size_t stride) {
        std::size_t total = 0;
        for (const auto& s : series) {
            if (s.label == label) total += patch_count(s.length(), w, stride);
        }
        return total;
    };

    std::vector<SegmentationPlan> plans(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        plans[i].stride = base_stride;
        plans[i].expected_count = patch_count(series[i].length(), w, base_stride);
    }

    // With only one class present there is nothing to balance against.
    const bool has_hc = std::any_of(series.begin(), series.end(),
                                    [](const FeatureSeries& s) { return s.label == ClassLabel::HC; });
    const bool has_pd = std::any_of(series.begin(), series.end(),
                                    [](const FeatureSeries& s) { return s.label == ClassLabel::PD; });
    if (!has_hc || !has_pd) return plans;

    for (ClassLabel label : {ClassLabel::HC, ClassLabel::PD}) {
        const bool any_long = std::any_of(series.begin(), series.end(), [&](const FeatureSeries& s) {
            return s.label == label && s.length() >= w;
        });
        if (!any_long) {
            throw DataError("class " + to_string(label) +
                            " has no sequence long enough for window " + std::to_string(w));
        }
    }

    const std::size_t hc_total = class_total(ClassLabel::HC, base_stride);
    const std::size_t pd_total = class_total(ClassLabel::PD, base_stride);
    if (hc_total == pd_total) return plans;

    const ClassLabel majority = hc_total > pd_total ? ClassLabel::HC : ClassLabel::PD;
    const std::size_t target = std::min(hc_total, pd_total);

    // Indices of majority sequences that actually produce patches, longest first.
    std::vector<std::size_t> adjustable;
    std::size_t floor_total = 0; // one patch per long-enough majority sequence
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].label != majority || series[i].length() < w) continue;
        adjustable.push_back(i);
        ++floor_total;
    }
    std::stable_sort(adjustable.begin(), adjustable.end(), [&](std::size_t a, std::size_t b) {
        return series[a].length() > series[b].length();
    });

    if (floor_total > target) {
        throw DataError("cannot balance classes: the larger class yields at least " +
                        std::to_string(floor_total) + " patches but the target is " +
                        std::to_string(target) + "; increase the base stride");
    }

    // Uniform scaling first: the smallest stride >= base_stride whose class
    // total is at or below the target.
    std::size_t uniform = base_stride;
    while (class_total(majority, uniform) > target) ++uniform;
    if (uniform == base_stride) return plans; // cannot happen: totals differ, majority larger

    // Refine from one step below: bump sequences to `uniform` one at a time,
    // longest first, and stop as soon as the total fits. This leaves the
    // class totals as close as one stride step allows.
    std::size_t total = class_total(majority, uniform - 1);
    for (std::size_t i : adjustable) {
        plans[i].stride = uniform - 1;
        plans[i].expected_count = patch_count(series[i].length(), w, uniform - 1);
    }
    for (std::size_t i : adjustable) {
        if (total <= target) break;
        const std::size_t before = plans[i].expected_count;
        const std::size_t after = patch_count(series[i].length(), w, uniform);
        plans[i].stride = uniform;
        plans[i].expected_count = after;
        total -= before - after;
    }
    return plans;
}

FeatureSeries preprocess_sequence(const DrawSequence& seq, const PreprocessConfig& cfg) {
    return minmax_normalize(velocity_features(seq, cfg.channels));
}

std::vector<Patch> make_balanced_patches(const std::vector<DrawSequence>& seqs,
                                         const PreprocessConfig& cfg) {
    std::vector<FeatureSeries> features;
    features.reserve(seqs.size());
    for (const auto& s : seqs) features.push_back(preprocess_sequence(s, cfg));
    const auto plans = plan_balanced_strides(features, cfg.window, cfg.base_stride);
    std::vector<Patch> patches;
    for (std::size_t i = 0; i < features.size(); ++i) {
        auto cut = segment(features[i], cfg.window, plans[i].stride);
        patches.insert(patches.end(), std::make_move_iterator(cut.begin()),
                       std::make_move_iterator(cut.end()));
    }
    return patches;
}

} // namespace pendiag
