#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pendiag/errors.hpp"

namespace pendiag {

enum class ClassLabel { HC, PD };

std::string to_string(ClassLabel label);

// Case-insensitive; anything outside {"HC","PD"} is a DataError.
ClassLabel parse_label(std::string_view text);

// One tablet scan: azimuth/altitude in radians, pressure in a psi-scaled
// nonnegative unit, timestamp in seconds, pen position in millimeters.
struct PenSample {
    double azimuth = 0.0;
    double altitude = 0.0;
    double pressure = 0.0;
    double timestamp = 0.0;
    double x = 0.0;
    double y = 0.0;

    bool operator==(const PenSample&) const = default;
};

// One subject's drawing test in sample order.
struct DrawSequence {
    std::string subject_id;
    ClassLabel label = ClassLabel::HC;
    std::vector<PenSample> samples;

    bool operator==(const DrawSequence&) const = default;
};

enum class SequenceFormat { csv, jsonl };

enum class IssueKind {
    nonfinite_value,
    nonincreasing_timestamp,
    too_short,
    negative_pressure,
};

std::string to_string(IssueKind kind);

struct ValidationIssue {
    IssueKind kind;
    std::size_t sample_index;
};

struct ValidationReport {
    std::string sequence_id;
    std::vector<ValidationIssue> issues;
    bool usable = false;
};

// CSV: header subject_id,label,a,l,p,t,x,y then one sample per row; a file
// holds exactly one sequence. JSONL: one sequence object per line,
// {"subject_id":str,"label":"HC"|"PD","samples":[[a,l,p,t,x,y],...]}.
std::vector<DrawSequence> parse_sequences(std::istream& in, SequenceFormat format);

// Convenience for single-sequence streams; errors if the stream holds none
// or more than one.
DrawSequence parse_sequence(std::istream& in, SequenceFormat format);

// Writes with round-trip-exact decimal encoding: parse(serialize(x)) == x.
void serialize_sequence(const DrawSequence& seq, std::ostream& out, SequenceFormat format);

// Flags every problem instead of throwing; all four issue kinds are fatal,
// so usable == issues.empty().
ValidationReport validate_sequence(const DrawSequence& seq, std::size_t min_len);

// Loads every *.csv and *.jsonl under dir (non-recursive), sorted by
// filename for deterministic ordering.
std::vector<DrawSequence> load_sequence_dir(const std::filesystem::path& dir);

} // namespace pendiag
