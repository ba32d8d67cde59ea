#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pendiag/signal.hpp"
#include "pendiag/tensor.hpp"

namespace pendiag {

// Feature channels derivable from a DrawSequence. vx/vy are the velocity
// projections (first differences over the timestamp interval); the raw pen
// channels can be passed through for experimentation.
enum class Channel { vx, vy, azimuth, altitude, pressure };

std::string to_string(Channel c);
Channel parse_channel(std::string_view name);

// Per-sequence feature matrix, channels x (L - 1).
struct FeatureSeries {
    std::string subject_id;
    ClassLabel label = ClassLabel::HC;
    Tensor channels; // [F x (L-1)]
    std::vector<std::string> channel_names;

    std::size_t feature_count() const { return channels.shape.empty() ? 0 : channels.dim(0); }
    std::size_t length() const { return channels.shape.size() < 2 ? 0 : channels.dim(1); }
};

// Fixed-length window cut from a FeatureSeries; the model's training unit.
struct Patch {
    std::string subject_id;
    ClassLabel label = ClassLabel::HC;
    Tensor data; // [F x w]
    std::size_t source_offset = 0;
};

struct SegmentationPlan {
    std::size_t stride = 1;
    std::size_t expected_count = 0;
};

// floor((len - w) / stride) + 1 when len >= w, else 0.
std::size_t patch_count(std::size_t len, std::size_t w, std::size_t stride);

// Velocity features from raw coordinates and raw timestamps. Output length
// is input length - 1; raw channels are truncated to match when selected.
FeatureSeries velocity_features(const DrawSequence& seq,
                                const std::vector<Channel>& selected = {Channel::vx, Channel::vy});

// Per-channel, per-sequence min-max scaling into [0,1]. A constant channel
// maps to all zeros so it carries no signal.
FeatureSeries minmax_normalize(const FeatureSeries& series);

// Windows at offsets 0, stride, 2*stride, ... while offset + w <= length.
std::vector<Patch> segment(const FeatureSeries& series, std::size_t w, std::size_t stride);

// Per-class stride balancing: the class producing fewer patches at
// base_stride keeps it and its total becomes the target; the other class
// gets per-sequence strides (mix of two adjacent values, longest sequences
// bumped first) so its total lands at or just below the target.
// Returns one plan per input series, aligned by index.
std::vector<SegmentationPlan> plan_balanced_strides(const std::vector<FeatureSeries>& series,
                                                    std::size_t w, std::size_t base_stride);

struct PreprocessConfig {
    std::size_t window = 128;
    std::size_t base_stride = 8;
    std::size_t eval_stride = 64; // evaluation windows overlap by half by default
    std::vector<Channel> channels = {Channel::vx, Channel::vy};
};

// Velocity features then min-max scaling for cfg.channels.
FeatureSeries preprocess_sequence(const DrawSequence& seq, const PreprocessConfig& cfg);

// Training path: per-sequence features, class-balanced strides, then
// segmentation. Patches keep input sequence order, offsets ascending.
std::vector<Patch> make_balanced_patches(const std::vector<DrawSequence>& seqs,
                                         const PreprocessConfig& cfg);

} // namespace pendiag
