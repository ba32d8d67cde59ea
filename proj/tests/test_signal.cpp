#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "pendiag/signal.hpp"
#include "test_util.hpp"

using namespace pendiag;

namespace {

DrawSequence sample_sequence() {
    DrawSequence seq;
    seq.subject_id = "S_01";
    seq.label = ClassLabel::PD;
    seq.samples = {
        {0.1, 1.5707963267948966, 0.25, 0.0, -3.5, 12.000000000000002},
        {0.30000000000000004, 1.2, 1e-17, 0.005, 0.1, -0.0},
        {2.9, 0.7, 1500.75, 0.01, 123456.789, 1e300},
    };
    return seq;
}

} // namespace

TEST_CASE("class labels convert both directions") {
    CHECK(to_string(ClassLabel::HC) == "HC");
    CHECK(to_string(ClassLabel::PD) == "PD");
    CHECK(parse_label("HC") == ClassLabel::HC);
    CHECK(parse_label("pd") == ClassLabel::PD);
    CHECK(parse_label("Hc") == ClassLabel::HC);
    CHECK_THROWS_AS(parse_label("healthy"), DataError);
    CHECK_THROWS_AS(parse_label(""), DataError);
}

TEST_CASE("csv round trip preserves every bit") {
    DrawSequence seq = sample_sequence();
    std::stringstream buf;
    serialize_sequence(seq, buf, SequenceFormat::csv);
    DrawSequence back = parse_sequence(buf, SequenceFormat::csv);
    CHECK(back == seq);
}

TEST_CASE("jsonl round trip preserves every bit") {
    DrawSequence seq = sample_sequence();
    std::stringstream buf;
    serialize_sequence(seq, buf, SequenceFormat::jsonl);
    DrawSequence back = parse_sequence(buf, SequenceFormat::jsonl);
    CHECK(back == seq);
}

TEST_CASE("jsonl stream holds many sequences, csv exactly one") {
    DrawSequence a = sample_sequence();
    DrawSequence b = sample_sequence();
    b.subject_id = "S_02";
    b.label = ClassLabel::HC;

    std::stringstream jl;
    serialize_sequence(a, jl, SequenceFormat::jsonl);
    serialize_sequence(b, jl, SequenceFormat::jsonl);
    auto seqs = parse_sequences(jl, SequenceFormat::jsonl);
    REQUIRE(seqs.size() == 2);
    CHECK(seqs[0] == a);
    CHECK(seqs[1] == b);

    std::stringstream two;
    serialize_sequence(a, two, SequenceFormat::jsonl);
    serialize_sequence(b, two, SequenceFormat::jsonl);
    CHECK_THROWS_AS(parse_sequence(two, SequenceFormat::jsonl), DataError);

    std::stringstream empty;
    CHECK_THROWS_AS(parse_sequence(empty, SequenceFormat::csv), DataError);
}

TEST_CASE("csv parser rejects malformed input") {
    SUBCASE("wrong header") {
        std::stringstream in("id,label,a,l,p,t,x,y\nS,HC,0,0,0,0,0,0\n");
        CHECK_THROWS_AS(parse_sequences(in, SequenceFormat::csv), DataError);
    }
    SUBCASE("short row") {
        std::stringstream in("subject_id,label,a,l,p,t,x,y\nS,HC,0,0,0\n");
        CHECK_THROWS_AS(parse_sequences(in, SequenceFormat::csv), DataError);
    }
    SUBCASE("non numeric field") {
        std::stringstream in("subject_id,label,a,l,p,t,x,y\nS,HC,0,0,zero,0,0,0\n");
        CHECK_THROWS_AS(parse_sequences(in, SequenceFormat::csv), DataError);
    }
    SUBCASE("bad label") {
        std::stringstream in("subject_id,label,a,l,p,t,x,y\nS,XX,0,0,0,0,0,0\n");
        CHECK_THROWS_AS(parse_sequences(in, SequenceFormat::csv), DataError);
    }
    SUBCASE("two subject ids in one file") {
        std::stringstream in(
            "subject_id,label,a,l,p,t,x,y\n"
            "S1,HC,0,0,0,0,0,0\n"
            "S2,HC,0,0,0,0.1,0,0\n");
        CHECK_THROWS_AS(parse_sequences(in, SequenceFormat::csv), DataError);
    }
}

TEST_CASE("jsonl parser rejects malformed input") {
    SUBCASE("broken json") {
        std::stringstream in("{\"subject_id\": \"S\", \"label\":\n");
        CHECK_THROWS_AS(parse_sequences(in, SequenceFormat::jsonl), DataError);
    }
    SUBCASE("missing samples key") {
        std::stringstream in("{\"subject_id\":\"S\",\"label\":\"HC\"}\n");
        CHECK_THROWS_AS(parse_sequences(in, SequenceFormat::jsonl), DataError);
    }
    SUBCASE("sample tuple of wrong arity") {
        std::stringstream in(
            "{\"subject_id\":\"S\",\"label\":\"HC\",\"samples\":[[1,2,3]]}\n");
        CHECK_THROWS_AS(parse_sequences(in, SequenceFormat::jsonl), DataError);
    }
}

TEST_CASE("validation flags each defect with its sample index") {
    DrawSequence seq;
    seq.subject_id = "V";
    seq.samples = {
        {0, 0, 1.0, 0.00, 0, 0},
        {0, 0, 1.0, 0.01, 0, 0},
        {0, 0, 1.0, 0.02, 0, 0},
    };

    SUBCASE("clean sequence is usable") {
        auto rep = validate_sequence(seq, 2);
        CHECK(rep.usable);
        CHECK(rep.issues.empty());
        CHECK(rep.sequence_id == "V");
    }
    SUBCASE("nan coordinate") {
        seq.samples[1].x = std::numeric_limits<double>::quiet_NaN();
        auto rep = validate_sequence(seq, 2);
        REQUIRE(rep.issues.size() == 1);
        CHECK(rep.issues[0].kind == IssueKind::nonfinite_value);
        CHECK(rep.issues[0].sample_index == 1);
        CHECK_FALSE(rep.usable);
    }
    SUBCASE("infinite pressure") {
        seq.samples[2].pressure = std::numeric_limits<double>::infinity();
        auto rep = validate_sequence(seq, 2);
        REQUIRE(rep.issues.size() == 1);
        CHECK(rep.issues[0].kind == IssueKind::nonfinite_value);
        CHECK(rep.issues[0].sample_index == 2);
    }
    SUBCASE("timestamp goes backwards") {
        seq.samples[2].timestamp = 0.005;
        auto rep = validate_sequence(seq, 2);
        REQUIRE(rep.issues.size() == 1);
        CHECK(rep.issues[0].kind == IssueKind::nonincreasing_timestamp);
        CHECK(rep.issues[0].sample_index == 2);
    }
    SUBCASE("timestamp repeats") {
        seq.samples[1].timestamp = 0.0;
        auto rep = validate_sequence(seq, 2);
        REQUIRE(rep.issues.size() == 1);
        CHECK(rep.issues[0].kind == IssueKind::nonincreasing_timestamp);
    }
    SUBCASE("negative pressure") {
        seq.samples[0].pressure = -0.25;
        auto rep = validate_sequence(seq, 2);
        REQUIRE(rep.issues.size() == 1);
        CHECK(rep.issues[0].kind == IssueKind::negative_pressure);
        CHECK(rep.issues[0].sample_index == 0);
    }
    SUBCASE("too short") {
        seq.samples.resize(1);
        auto rep = validate_sequence(seq, 2);
        REQUIRE(rep.issues.size() == 1);
        CHECK(rep.issues[0].kind == IssueKind::too_short);
        CHECK_FALSE(rep.usable);
    }
    SUBCASE("several defects accumulate") {
        seq.samples[0].pressure = -1.0;
        seq.samples[1].y = std::numeric_limits<double>::quiet_NaN();
        auto rep = validate_sequence(seq, 4);
        CHECK(rep.issues.size() == 3);
        CHECK_FALSE(rep.usable);
    }
}

TEST_CASE("directory loader sorts by filename and mixes formats") {
    testutil::TempDir tmp("pendiag_signal");

    DrawSequence a = sample_sequence();
    a.subject_id = "A";
    DrawSequence b = sample_sequence();
    b.subject_id = "B";
    DrawSequence c = sample_sequence();
    c.subject_id = "C";

    {
        std::ofstream f(tmp.path / "02_b.jsonl");
        serialize_sequence(b, f, SequenceFormat::jsonl);
    }
    {
        std::ofstream f(tmp.path / "03_c.csv");
        serialize_sequence(c, f, SequenceFormat::csv);
    }
    {
        std::ofstream f(tmp.path / "01_a.csv");
        serialize_sequence(a, f, SequenceFormat::csv);
    }
    {
        std::ofstream f(tmp.path / "notes.txt");
        f << "ignore me\n";
    }

    auto seqs = load_sequence_dir(tmp.path);
    REQUIRE(seqs.size() == 3);
    CHECK(seqs[0] == a);
    CHECK(seqs[1] == b);
    CHECK(seqs[2] == c);

    SUBCASE("empty directory yields empty vector") {
        testutil::TempDir empty("pendiag_signal_empty");
        CHECK(load_sequence_dir(empty.path).empty());
    }
    SUBCASE("missing directory is an io error") {
        CHECK_THROWS_AS(load_sequence_dir(tmp.path / "nope"), IoError);
    }
    SUBCASE("parse failure names the file") {
        std::ofstream f(tmp.path / "00_bad.csv");
        f << "subject_id,label,a,l,p,t,x,y\nS,HC,0,0\n";
        f.close();
        CHECK_THROWS_WITH_AS(load_sequence_dir(tmp.path),
                             doctest::Contains("00_bad.csv"), DataError);
    }
}
