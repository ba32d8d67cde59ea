#include "pendiag/signal.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "pendiag/format.hpp"

namespace pendiag {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_finite(const std::string& text, const char* column, std::size_t line_no) {
    const std::string t = trim(text);
    double value = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
        throw DataError("line " + std::to_string(line_no) + ": cannot parse column '" +
                        column + "' from \"" + t + "\"");
    }
    if (!std::isfinite(value)) {
        throw DataError("line " + std::to_string(line_no) + ": non-finite value in column '" +
                        column + "'");
    }
    return value;
}

const char* kCsvHeader = "subject_id,label,a,l,p,t,x,y";

std::vector<DrawSequence> parse_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV stream");
    std::size_t line_no = 1;

    const auto header = split_csv_line(line);
    const std::vector<std::string> expected = {"subject_id", "label", "a", "l",
                                               "p",          "t",     "x", "y"};
    if (header.size() != expected.size()) {
        throw DataError("CSV schema error: expected header '" + std::string(kCsvHeader) +
                        "', got " + std::to_string(header.size()) + " columns");
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (lower(header[i]) != expected[i]) {
            throw DataError("CSV schema error: missing or misplaced column '" + expected[i] +
                            "' (found '" + header[i] + "')");
        }
    }

    DrawSequence seq;
    bool have_meta = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != expected.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(expected.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        const ClassLabel label = parse_label(fields[1]);
        if (!have_meta) {
            seq.subject_id = fields[0];
            seq.label = label;
            have_meta = true;
        } else if (fields[0] != seq.subject_id || label != seq.label) {
            throw DataError("line " + std::to_string(line_no) +
                            ": subject_id/label differ from the file's first row");
        }
        PenSample s;
        s.azimuth = parse_finite(fields[2], "a", line_no);
        s.altitude = parse_finite(fields[3], "l", line_no);
        s.pressure = parse_finite(fields[4], "p", line_no);
        s.timestamp = parse_finite(fields[5], "t", line_no);
        s.x = parse_finite(fields[6], "x", line_no);
        s.y = parse_finite(fields[7], "y", line_no);
        seq.samples.push_back(s);
    }
    if (!have_meta) throw DataError("CSV stream has a header but no sample rows");
    return {seq};
}

DrawSequence sequence_from_json(const nlohmann::json& obj, std::size_t line_no) {
    if (!obj.is_object()) {
        throw DataError("line " + std::to_string(line_no) + ": expected a JSON object");
    }
    for (const char* key : {"subject_id", "label", "samples"}) {
        if (!obj.contains(key)) {
            throw DataError("line " + std::to_string(line_no) + ": missing key '" + key + "'");
        }
    }
    DrawSequence seq;
    seq.subject_id = obj.at("subject_id").get<std::string>();
    seq.label = parse_label(obj.at("label").get<std::string>());
    const auto& samples = obj.at("samples");
    if (!samples.is_array()) {
        throw DataError("line " + std::to_string(line_no) + ": 'samples' must be an array");
    }
    std::size_t idx = 0;
    for (const auto& row : samples) {
        if (!row.is_array() || row.size() != 6) {
            throw DataError("line " + std::to_string(line_no) + ": sample " +
                            std::to_string(idx) + " must be [a,l,p,t,x,y]");
        }
        PenSample s;
        s.azimuth = row[0].get<double>();
        s.altitude = row[1].get<double>();
        s.pressure = row[2].get<double>();
        s.timestamp = row[3].get<double>();
        s.x = row[4].get<double>();
        s.y = row[5].get<double>();
        for (double v : {s.azimuth, s.altitude, s.pressure, s.timestamp, s.x, s.y}) {
            if (!std::isfinite(v)) {
                throw DataError("line " + std::to_string(line_no) + ": non-finite value in sample " +
                                std::to_string(idx));
            }
        }
        seq.samples.push_back(s);
        ++idx;
    }
    return seq;
}

std::vector<DrawSequence> parse_jsonl(std::istream& in) {
    std::vector<DrawSequence> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        out.push_back(sequence_from_json(obj, line_no));
    }
    if (out.empty()) throw DataError("JSONL stream holds no sequences");
    return out;
}

} // namespace

std::string to_string(ClassLabel label) {
    return label == ClassLabel::PD ? "PD" : "HC";
}

ClassLabel parse_label(std::string_view text) {
    const std::string l = lower(trim(text));
    if (l == "hc") return ClassLabel::HC;
    if (l == "pd") return ClassLabel::PD;
    throw DataError("unknown class label \"" + std::string(text) + "\" (expected HC or PD)");
}

std::string to_string(IssueKind kind) {
    switch (kind) {
        case IssueKind::nonfinite_value: return "nonfinite_value";
        case IssueKind::nonincreasing_timestamp: return "nonincreasing_timestamp";
        case IssueKind::too_short: return "too_short";
        case IssueKind::negative_pressure: return "negative_pressure";
    }
    return "unknown";
}

std::vector<DrawSequence> parse_sequences(std::istream& in, SequenceFormat format) {
    return format == SequenceFormat::csv ? parse_csv(in) : parse_jsonl(in);
}

DrawSequence parse_sequence(std::istream& in, SequenceFormat format) {
    auto all = parse_sequences(in, format);
    if (all.size() != 1) {
        throw DataError("expected exactly one sequence, found " + std::to_string(all.size()));
    }
    return all.front();
}

void serialize_sequence(const DrawSequence& seq, std::ostream& out, SequenceFormat format) {
    if (format == SequenceFormat::csv) {
        out << kCsvHeader << '\n';
        for (const PenSample& s : seq.samples) {
            out << seq.subject_id << ',' << to_string(seq.label) << ',' << format_double(s.azimuth)
                << ',' << format_double(s.altitude) << ',' << format_double(s.pressure) << ','
                << format_double(s.timestamp) << ',' << format_double(s.x) << ','
                << format_double(s.y) << '\n';
        }
    } else {
        nlohmann::json obj;
        obj["subject_id"] = seq.subject_id;
        obj["label"] = to_string(seq.label);
        auto samples = nlohmann::json::array();
        for (const PenSample& s : seq.samples) {
            samples.push_back({s.azimuth, s.altitude, s.pressure, s.timestamp, s.x, s.y});
        }
        obj["samples"] = std::move(samples);
        out << obj.dump() << '\n';
    }
}

ValidationReport validate_sequence(const DrawSequence& seq, std::size_t min_len) {
    ValidationReport report;
    report.sequence_id = seq.subject_id;

    if (seq.samples.size() < min_len) {
        report.issues.push_back({IssueKind::too_short, seq.samples.size()});
    }
    for (std::size_t i = 0; i < seq.samples.size(); ++i) {
        const PenSample& s = seq.samples[i];
        const double values[] = {s.azimuth, s.altitude, s.pressure, s.timestamp, s.x, s.y};
        for (double v : values) {
            if (!std::isfinite(v)) {
                report.issues.push_back({IssueKind::nonfinite_value, i});
                break;
            }
        }
        if (s.pressure < 0.0) {
            report.issues.push_back({IssueKind::negative_pressure, i});
        }
        if (i > 0 && !(s.timestamp > seq.samples[i - 1].timestamp)) {
            report.issues.push_back({IssueKind::nonincreasing_timestamp, i});
        }
    }
    report.usable = report.issues.empty();
    return report;
}

std::vector<DrawSequence> load_sequence_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".csv" || ext == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<DrawSequence> out;
    for (const auto& path : files) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path.string());
        const auto format = path.extension() == ".csv" ? SequenceFormat::csv : SequenceFormat::jsonl;
        try {
            auto seqs = parse_sequences(in, format);
            out.insert(out.end(), std::make_move_iterator(seqs.begin()),
                       std::make_move_iterator(seqs.end()));
        } catch (const DataError& e) {
            throw DataError(path.filename().string() + ": " + e.what());
        }
    }
    return out;
}

} // namespace pendiag
