#include "pendiag/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "pendiag/errors.hpp"
#include "pendiag/format.hpp"
#include "pendiag/gradcheck.hpp"
#include "pendiag/metrics.hpp"
#include "pendiag/nn.hpp"
#include "pendiag/rng.hpp"
#include "pendiag/signal.hpp"

namespace pendiag {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// Rethrows pipeline errors with the failing stage in front so a long run
// says where it died.
template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    auto tag = [&](const auto& e) { return std::string(name) + ": " + e.what(); };
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(tag(e));
    } catch (const DataError& e) {
        throw DataError(tag(e));
    } catch (const NumericError& e) {
        throw NumericError(tag(e));
    } catch (const IoError& e) {
        throw IoError(tag(e));
    }
}

void check_keys(const ordered_json& j, const std::vector<std::string>& allowed,
                const std::string& section) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("config: unknown key \"" + key + "\" in " + section);
    }
}

template <typename T>
void read_key(const ordered_json& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: bad value for " + section + "." + key);
    }
}

std::vector<Channel> parse_channel_list(const std::string& text) {
    std::vector<Channel> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto start = item.find_first_not_of(" \t");
        const auto stop = item.find_last_not_of(" \t");
        if (start == std::string::npos) continue;
        out.push_back(parse_channel(item.substr(start, stop - start + 1)));
    }
    if (out.empty()) throw ConfigError("channel list is empty");
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

void make_dirs(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void echo_config(const RunConfig& cfg, const fs::path& out_dir) {
    write_text(out_dir / "resolved-config.json", resolved_config_json(cfg));
}

// Validation failures are data errors here; short sequences are fine (they
// just contribute no patches) but broken ones are not.
void reject_invalid(const std::vector<DrawSequence>& seqs) {
    for (const auto& seq : seqs) {
        auto report = validate_sequence(seq, 2);
        if (!report.usable) {
            const auto& issue = report.issues.front();
            throw DataError("sequence " + seq.subject_id + ": " + to_string(issue.kind) +
                            " at sample " + std::to_string(issue.sample_index));
        }
    }
}

std::vector<DrawSequence> load_data(const fs::path& dir, const char* preferred_subdir) {
    fs::path use = dir;
    if (preferred_subdir && fs::is_directory(dir / preferred_subdir)) use = dir / preferred_subdir;
    auto seqs = load_sequence_dir(use);
    if (seqs.empty()) throw DataError("found 0 sequences in " + use.string());
    return seqs;
}

void check_checkpoint_compat(const Checkpoint& ck, const RunConfig& cfg) {
    if (ck.params.config.window != cfg.preprocess.window)
        throw ConfigError("checkpoint window " + std::to_string(ck.params.config.window) +
                          " does not match configured window " +
                          std::to_string(cfg.preprocess.window));
    if (ck.params.config.in_features != cfg.preprocess.channels.size())
        throw ConfigError("checkpoint expects " + std::to_string(ck.params.config.in_features) +
                          " channels, config selects " +
                          std::to_string(cfg.preprocess.channels.size()));
}

} // namespace

RunConfig load_run_config(const fs::path& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    check_keys(j, {"seed", "runs", "synth", "preprocess", "model", "train"}, "top level");
    read_key(j, "seed", cfg.seed, "top level");
    read_key(j, "runs", cfg.runs, "top level");

    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        check_keys(s,
                   {"n_hc", "n_pd", "samples_per_sequence", "sample_rate_hz",
                    "zigzag_amplitude_mm", "zigzag_period_s", "drift_speed_mm_s",
                    "tremor_freq_lo_hz", "tremor_freq_hi_hz", "tremor_amplitude_mm",
                    "pd_speed_factor", "noise_std_mm", "length_jitter_fraction", "test_fraction",
                    "strict_separability"},
                   "synth");
        read_key(s, "n_hc", cfg.n_hc, "synth");
        read_key(s, "n_pd", cfg.n_pd, "synth");
        read_key(s, "samples_per_sequence", cfg.synth.samples_per_sequence, "synth");
        read_key(s, "sample_rate_hz", cfg.synth.sample_rate_hz, "synth");
        read_key(s, "zigzag_amplitude_mm", cfg.synth.zigzag_amplitude_mm, "synth");
        read_key(s, "zigzag_period_s", cfg.synth.zigzag_period_s, "synth");
        read_key(s, "drift_speed_mm_s", cfg.synth.drift_speed_mm_s, "synth");
        read_key(s, "tremor_freq_lo_hz", cfg.synth.tremor_freq_lo_hz, "synth");
        read_key(s, "tremor_freq_hi_hz", cfg.synth.tremor_freq_hi_hz, "synth");
        read_key(s, "tremor_amplitude_mm", cfg.synth.tremor_amplitude_mm, "synth");
        read_key(s, "pd_speed_factor", cfg.synth.pd_speed_factor, "synth");
        read_key(s, "noise_std_mm", cfg.synth.noise_std_mm, "synth");
        read_key(s, "length_jitter_fraction", cfg.synth.length_jitter_fraction, "synth");
        read_key(s, "test_fraction", cfg.synth.test_fraction, "synth");
        read_key(s, "strict_separability", cfg.synth.strict_separability, "synth");
    }
    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        check_keys(p, {"window", "base_stride", "eval_stride", "channels"}, "preprocess");
        read_key(p, "window", cfg.preprocess.window, "preprocess");
        read_key(p, "base_stride", cfg.preprocess.base_stride, "preprocess");
        read_key(p, "eval_stride", cfg.preprocess.eval_stride, "preprocess");
        if (p.contains("channels")) {
            std::vector<std::string> names;
            read_key(p, "channels", names, "preprocess");
            cfg.preprocess.channels.clear();
            for (const auto& n : names) cfg.preprocess.channels.push_back(parse_channel(n));
        }
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        check_keys(m,
                   {"lstm_hidden", "conv1_out", "conv2_out", "kernel", "conv_stride", "pool_size",
                    "pool_stride", "fc_hidden", "classes", "dropout_p"},
                   "model");
        read_key(m, "lstm_hidden", cfg.model.lstm_hidden, "model");
        read_key(m, "conv1_out", cfg.model.conv1_out, "model");
        read_key(m, "conv2_out", cfg.model.conv2_out, "model");
        read_key(m, "kernel", cfg.model.kernel, "model");
        read_key(m, "conv_stride", cfg.model.conv_stride, "model");
        read_key(m, "pool_size", cfg.model.pool_size, "model");
        read_key(m, "pool_stride", cfg.model.pool_stride, "model");
        read_key(m, "fc_hidden", cfg.model.fc_hidden, "model");
        read_key(m, "classes", cfg.model.classes, "model");
        read_key(m, "dropout_p", cfg.model.dropout_p, "model");
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t, {"epochs", "batch_size", "val_fraction", "lr", "beta1", "beta2", "eps"},
                   "train");
        read_key(t, "epochs", cfg.train.epochs, "train");
        read_key(t, "batch_size", cfg.train.batch_size, "train");
        read_key(t, "val_fraction", cfg.train.val_fraction, "train");
        read_key(t, "lr", cfg.train.adam.lr, "train");
        read_key(t, "beta1", cfg.train.adam.beta1, "train");
        read_key(t, "beta2", cfg.train.adam.beta2, "train");
        read_key(t, "eps", cfg.train.adam.eps, "train");
    }
    return cfg;
}

void apply_overrides(RunConfig& cfg, const CliOverrides& ov) {
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.runs) cfg.runs = *ov.runs;
    if (ov.window) cfg.preprocess.window = *ov.window;
    if (ov.stride) cfg.preprocess.base_stride = *ov.stride;
    if (ov.eval_stride) cfg.preprocess.eval_stride = *ov.eval_stride;
    if (ov.channels) cfg.preprocess.channels = parse_channel_list(*ov.channels);
}

void finalize_run_config(RunConfig& cfg) {
    if (cfg.runs == 0) throw ConfigError("runs must be at least 1");
    if (cfg.preprocess.window < 2) throw ConfigError("window must be at least 2");
    if (cfg.preprocess.base_stride == 0 || cfg.preprocess.eval_stride == 0)
        throw ConfigError("strides must be positive");
    if (cfg.preprocess.channels.empty()) throw ConfigError("channel list is empty");
    for (std::size_t i = 0; i < cfg.preprocess.channels.size(); ++i)
        for (std::size_t k = i + 1; k < cfg.preprocess.channels.size(); ++k)
            if (cfg.preprocess.channels[i] == cfg.preprocess.channels[k])
                throw ConfigError("duplicate channel " + to_string(cfg.preprocess.channels[i]));
    cfg.model.window = cfg.preprocess.window;
    cfg.model.in_features = cfg.preprocess.channels.size();
    shape_chain(cfg.model);
    cfg.synth.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    validate_synth_config(cfg.synth);
}

std::string resolved_config_json(const RunConfig& cfg) {
    ordered_json j;
    j["seed"] = cfg.seed;
    j["runs"] = cfg.runs;
    j["synth"] = {{"n_hc", cfg.n_hc},
                  {"n_pd", cfg.n_pd},
                  {"samples_per_sequence", cfg.synth.samples_per_sequence},
                  {"sample_rate_hz", cfg.synth.sample_rate_hz},
                  {"zigzag_amplitude_mm", cfg.synth.zigzag_amplitude_mm},
                  {"zigzag_period_s", cfg.synth.zigzag_period_s},
                  {"drift_speed_mm_s", cfg.synth.drift_speed_mm_s},
                  {"tremor_freq_lo_hz", cfg.synth.tremor_freq_lo_hz},
                  {"tremor_freq_hi_hz", cfg.synth.tremor_freq_hi_hz},
                  {"tremor_amplitude_mm", cfg.synth.tremor_amplitude_mm},
                  {"pd_speed_factor", cfg.synth.pd_speed_factor},
                  {"noise_std_mm", cfg.synth.noise_std_mm},
                  {"length_jitter_fraction", cfg.synth.length_jitter_fraction},
                  {"test_fraction", cfg.synth.test_fraction},
                  {"strict_separability", cfg.synth.strict_separability}};
    ordered_json channels = ordered_json::array();
    for (const auto& c : cfg.preprocess.channels) channels.push_back(to_string(c));
    j["preprocess"] = {{"window", cfg.preprocess.window},
                       {"base_stride", cfg.preprocess.base_stride},
                       {"eval_stride", cfg.preprocess.eval_stride},
                       {"channels", channels}};
    j["model"] = {{"lstm_hidden", cfg.model.lstm_hidden},
                  {"conv1_out", cfg.model.conv1_out},
                  {"conv2_out", cfg.model.conv2_out},
                  {"kernel", cfg.model.kernel},
                  {"conv_stride", cfg.model.conv_stride},
                  {"pool_size", cfg.model.pool_size},
                  {"pool_stride", cfg.model.pool_stride},
                  {"fc_hidden", cfg.model.fc_hidden},
                  {"classes", cfg.model.classes},
                  {"dropout_p", cfg.model.dropout_p}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"val_fraction", cfg.train.val_fraction},
                  {"lr", cfg.train.adam.lr},
                  {"beta1", cfg.train.adam.beta1},
                  {"beta2", cfg.train.adam.beta2},
                  {"eps", cfg.train.adam.eps}};
    return j.dump(2) + "\n";
}

void cmd_synth(const RunConfig& user_cfg, const fs::path& out_dir) {
    RunConfig cfg = user_cfg;
    finalize_run_config(cfg);
    auto corpus = stage("synth", [&] { return generate_corpus(cfg.n_hc, cfg.n_pd, cfg.synth); });
    make_dirs(out_dir / "train");
    make_dirs(out_dir / "test");

    ordered_json manifest;
    manifest["seed"] = cfg.seed;
    const struct {
        const char* name;
        const std::vector<DrawSequence>* seqs;
    } splits[] = {{"train", &corpus.train}, {"test", &corpus.test}};
    for (const auto& split : splits) {
        ordered_json list = ordered_json::array();
        for (const auto& seq : *split.seqs) {
            const std::string rel = std::string(split.name) + "/" + seq.subject_id + ".csv";
            std::ofstream out(out_dir / rel);
            if (!out) throw IoError("cannot open " + (out_dir / rel).string() + " for writing");
            serialize_sequence(seq, out, SequenceFormat::csv);
            if (!out) throw IoError("failed writing " + (out_dir / rel).string());
            list.push_back({{"file", rel},
                            {"subject_id", seq.subject_id},
                            {"label", to_string(seq.label)},
                            {"samples", seq.samples.size()}});
        }
        manifest[split.name] = std::move(list);
    }
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    echo_config(cfg, out_dir);
    std::cout << "wrote " << corpus.train.size() << " train + " << corpus.test.size()
              << " test sequences to " << out_dir.string() << "\n";
}

void cmd_preprocess(const RunConfig& user_cfg, const fs::path& data_dir, const fs::path& out_dir) {
    RunConfig cfg = user_cfg;
    finalize_run_config(cfg);
    auto seqs = stage("load", [&] { return load_data(data_dir, "train"); });
    stage("validate", [&] {
        reject_invalid(seqs);
        return 0;
    });

    std::vector<FeatureSeries> features;
    std::vector<SegmentationPlan> plans;
    stage("preprocess", [&] {
        for (const auto& s : seqs) features.push_back(preprocess_sequence(s, cfg.preprocess));
        plans = plan_balanced_strides(features, cfg.preprocess.window,
                                      cfg.preprocess.base_stride);
        return 0;
    });

    make_dirs(out_dir);
    std::size_t totals[2] = {0, 0};
    ordered_json per_seq = ordered_json::array();
    std::ostringstream csv;
    csv << "subject_id,label,offset";
    for (std::size_t c = 0; c < cfg.preprocess.channels.size(); ++c)
        for (std::size_t t = 0; t < cfg.preprocess.window; ++t)
            csv << ',' << to_string(cfg.preprocess.channels[c]) << '_' << t;
    csv << '\n';
    for (std::size_t i = 0; i < features.size(); ++i) {
        auto patches = segment(features[i], cfg.preprocess.window, plans[i].stride);
        totals[static_cast<std::size_t>(features[i].label)] += patches.size();
        per_seq.push_back({{"subject_id", features[i].subject_id},
                           {"label", to_string(features[i].label)},
                           {"feature_length", features[i].length()},
                           {"stride", plans[i].stride},
                           {"patches", patches.size()}});
        for (const auto& p : patches) {
            csv << p.subject_id << ',' << to_string(p.label) << ',' << p.source_offset;
            for (double v : p.data.data) csv << ',' << format_double(v);
            csv << '\n';
        }
    }
    ordered_json manifest;
    manifest["window"] = cfg.preprocess.window;
    manifest["base_stride"] = cfg.preprocess.base_stride;
    manifest["sequences"] = std::move(per_seq);
    manifest["patch_totals"] = {{"HC", totals[0]}, {"PD", totals[1]}};
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    write_text(out_dir / "patches.csv", csv.str());
    echo_config(cfg, out_dir);
    std::cout << "wrote " << (totals[0] + totals[1]) << " patches (HC " << totals[0] << ", PD "
              << totals[1] << ") to " << out_dir.string() << "\n";
}

void cmd_train(const RunConfig& user_cfg, const fs::path& data_dir, const fs::path& out_dir) {
    RunConfig cfg = user_cfg;
    finalize_run_config(cfg);
    auto seqs = stage("load", [&] { return load_data(data_dir, "train"); });
    stage("validate", [&] {
        reject_invalid(seqs);
        return 0;
    });
    auto patches =
        stage("preprocess", [&] { return make_balanced_patches(seqs, cfg.preprocess); });

    make_dirs(out_dir);
    const bool multi = cfg.runs > 1;
    ordered_json run_summaries = ordered_json::array();
    std::vector<std::vector<EpochStats>> histories;
    std::size_t best_run = 0;
    double best_acc = -1.0;
    double best_loss = 0.0;

    for (std::size_t r = 0; r < cfg.runs; ++r) {
        TrainConfig tcfg = cfg.train;
        tcfg.seed = cfg.seed + r;
        auto result = stage("train", [&] { return train_model(patches, cfg.model, tcfg); });

        const std::string suffix = multi ? "_run" + std::to_string(r + 1) : "";
        write_text(out_dir / ("history" + suffix + ".csv"), history_to_csv(result.history));
        CheckpointMeta meta;
        meta.seed = tcfg.seed;
        meta.epoch = result.best_epoch;
        meta.selection_score = result.best_val_acc;
        save_checkpoint(out_dir / ("checkpoint" + suffix + ".json"), result.best, meta);

        run_summaries.push_back({{"run", r + 1},
                                 {"seed", tcfg.seed},
                                 {"patches", patches.size()},
                                 {"best_epoch", result.best_epoch},
                                 {"best_val_acc", result.best_val_acc},
                                 {"best_val_loss", result.best_val_loss}});
        histories.push_back(result.history);
        if (result.best_val_acc > best_acc ||
            (result.best_val_acc == best_acc && result.best_val_loss < best_loss)) {
            best_run = r;
            best_acc = result.best_val_acc;
            best_loss = result.best_val_loss;
        }
        std::cout << "run " << (r + 1) << ": best epoch " << result.best_epoch << ", val_acc "
                  << format_double(result.best_val_acc) << "\n";
    }

    if (multi) {
        // per-epoch mean/min/max across runs, one block per history column
        std::ostringstream agg;
        agg << "epoch";
        const char* cols[] = {"train_loss", "train_acc", "val_loss", "val_acc"};
        for (const char* c : cols)
            agg << ',' << c << "_mean," << c << "_min," << c << "_max";
        agg << '\n';
        const std::size_t epochs = histories.front().size();
        for (std::size_t e = 0; e < epochs; ++e) {
            agg << (e + 1);
            auto emit = [&](auto pick) {
                double sum = 0.0, lo = 0.0, hi = 0.0;
                for (std::size_t r = 0; r < histories.size(); ++r) {
                    const double v = pick(histories[r][e]);
                    sum += v;
                    lo = r == 0 ? v : std::min(lo, v);
                    hi = r == 0 ? v : std::max(hi, v);
                }
                agg << ',' << format_double(sum / static_cast<double>(histories.size())) << ','
                    << format_double(lo) << ',' << format_double(hi);
            };
            emit([](const EpochStats& s) { return s.train_loss; });
            emit([](const EpochStats& s) { return s.train_acc; });
            emit([](const EpochStats& s) { return s.val_loss; });
            emit([](const EpochStats& s) { return s.val_acc; });
            agg << '\n';
        }
        write_text(out_dir / "history_aggregate.csv", agg.str());
        std::error_code ec;
        fs::copy_file(out_dir / ("checkpoint_run" + std::to_string(best_run + 1) + ".json"),
                      out_dir / "checkpoint.json", fs::copy_options::overwrite_existing, ec);
        if (ec) throw IoError("cannot copy best checkpoint: " + ec.message());
    }

    ordered_json summary;
    summary["runs"] = std::move(run_summaries);
    summary["best_run"] = best_run + 1;
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    echo_config(cfg, out_dir);
}

void cmd_eval(const RunConfig& user_cfg, const fs::path& checkpoint_path, const fs::path& data_dir,
              const fs::path& out_dir) {
    RunConfig cfg = user_cfg;
    finalize_run_config(cfg);
    auto ck = stage("checkpoint", [&] { return load_checkpoint(checkpoint_path); });
    check_checkpoint_compat(ck, cfg);
    auto seqs = stage("load", [&] { return load_data(data_dir, "test"); });
    stage("validate", [&] {
        reject_invalid(seqs);
        return 0;
    });
    auto result = stage("evaluate", [&] { return evaluate(ck.params, seqs, cfg.preprocess); });
    for (const auto& id : result.skipped)
        std::cerr << "warning: skipped " << id << ": shorter than one window\n";

    make_dirs(out_dir);
    write_text(out_dir / "metrics.json", metrics_to_json(result));
    const std::string table = metrics_to_text(result);
    write_text(out_dir / "metrics.txt", table);
    echo_config(cfg, out_dir);
    std::cout << table;
}

void cmd_predict(const RunConfig& user_cfg, const fs::path& checkpoint_path,
                 const fs::path& input_file, std::ostream& out) {
    RunConfig cfg = user_cfg;
    finalize_run_config(cfg);
    auto ck = stage("checkpoint", [&] { return load_checkpoint(checkpoint_path); });
    check_checkpoint_compat(ck, cfg);

    const auto ext = input_file.extension().string();
    if (ext != ".csv" && ext != ".jsonl")
        throw ConfigError("unsupported sequence file type: " + input_file.string());
    std::ifstream in(input_file);
    if (!in) throw IoError("cannot open " + input_file.string());
    auto seq = stage("parse", [&] {
        return parse_sequence(in, ext == ".csv" ? SequenceFormat::csv : SequenceFormat::jsonl);
    });

    auto series = preprocess_sequence(seq, cfg.preprocess);
    const std::size_t w = cfg.preprocess.window;
    if (series.length() < w)
        throw DataError("sequence too short: " + std::to_string(seq.samples.size()) +
                        " samples give " + std::to_string(series.length()) +
                        " feature steps, need at least " + std::to_string(w) +
                        " (window + 1 samples)");
    auto patches = segment(series, w, cfg.preprocess.eval_stride);

    Rng unused(0);
    ordered_json patch_list = ordered_json::array();
    std::size_t pd_votes = 0;
    double p_pd_sum = 0.0;
    for (const auto& p : patches) {
        Tensor logits = model_forward(ck.params, p.data, nn::RunMode::infer, unused);
        Tensor probs = softmax(logits);
        const double p_pd = probs.data[1];
        p_pd_sum += p_pd;
        const ClassLabel vote = p_pd > probs.data[0] ? ClassLabel::PD : ClassLabel::HC;
        if (vote == ClassLabel::PD) ++pd_votes;
        patch_list.push_back(
            {{"offset", p.source_offset}, {"p_pd", p_pd}, {"vote", to_string(vote)}});
    }
    const double mean_p_pd = p_pd_sum / static_cast<double>(patches.size());
    const ClassLabel verdict = majority_vote(pd_votes, patches.size(), mean_p_pd);

    ordered_json j;
    j["subject_id"] = seq.subject_id;
    j["patches"] = std::move(patch_list);
    j["patch_votes"] = {{"HC", patches.size() - pd_votes}, {"PD", pd_votes}};
    j["mean_p_pd"] = mean_p_pd;
    j["verdict"] = to_string(verdict);
    out << j.dump(2) << "\n";
}

int cmd_gradcheck(const std::string& scope, std::uint64_t seed, std::size_t seeds,
                  bool inject_fault, std::ostream& out) {
    if (scope != "all" && scope != "layer" && scope != "model")
        throw ConfigError("gradcheck scope must be layer, model or all");
    auto reports = gradcheck::run_gradcheck(seed, seeds, inject_fault);
    std::vector<gradcheck::Report> selected;
    for (const auto& r : reports) {
        if (scope == "layer" && r.layer == "model") continue;
        if (scope == "model" && r.layer != "model") continue;
        selected.push_back(r);
    }
    out << std::left << std::setw(12) << "component" << std::right << std::setw(12)
        << "evaluations" << std::setw(14) << "max_rel_err" << std::setw(12) << "tolerance"
        << "  status\n";
    bool all_pass = true;
    for (const auto& r : selected) {
        std::ostringstream err, tol;
        err << std::scientific << std::setprecision(3) << r.max_rel_err;
        tol << std::scientific << std::setprecision(0) << r.tolerance;
        out << std::left << std::setw(12) << r.layer << std::right << std::setw(12)
            << r.evaluations << std::setw(14) << err.str() << std::setw(12) << tol.str() << "  "
            << (r.pass ? "ok" : "FAIL") << "\n";
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
}

int run_cli(std::vector<std::string> args) {
    CLI::App app{"pen-drawing time-series classification toolkit", "pendiag"};
    app.require_subcommand(1);

    std::string config_path;
    CliOverrides ov;
    std::string out_path;
    std::string data_path;
    std::string checkpoint_path;
    std::string input_path;
    std::string scope = "all";
    std::uint64_t gc_seed = 0;
    std::size_t gc_seeds = 20;
    bool inject_fault = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", ov.seed, "root seed");
    };
    auto add_preprocess_flags = [&](CLI::App* sub) {
        sub->add_option("--window", ov.window, "patch window length");
        sub->add_option("--stride", ov.stride, "base segmentation stride");
        sub->add_option("--channels", ov.channels, "comma-separated feature channels");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic drawing corpus");
    add_common(synth);
    synth->add_option("--out", out_path, "output directory")->default_val("out/synth");

    auto* preprocess = app.add_subcommand("preprocess", "turn sequences into training patches");
    add_common(preprocess);
    add_preprocess_flags(preprocess);
    preprocess->add_option("--data", data_path, "sequence directory")->required();
    preprocess->add_option("--out", out_path, "output directory")->default_val("out/preprocess");

    auto* train = app.add_subcommand("train", "train the classifier");
    add_common(train);
    add_preprocess_flags(train);
    train->add_option("--data", data_path, "corpus directory (train/ subdir is used if present)")
        ->required();
    train->add_option("--out", out_path, "output directory")->default_val("out/train");
    train->add_option("--runs", ov.runs, "repeat training with seeds seed..seed+N-1");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out sequences");
    add_common(eval);
    add_preprocess_flags(eval);
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--data", data_path, "corpus directory (test/ subdir is used if present)")
        ->required();
    eval->add_option("--out", out_path, "output directory")->default_val("out/eval");
    eval->add_option("--eval-stride", ov.eval_stride, "stride between evaluation windows");

    auto* predict = app.add_subcommand("predict", "classify one sequence file");
    add_common(predict);
    predict->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    predict->add_option("--input", input_path, "sequence file (.csv or .jsonl)")->required();
    predict->add_option("--eval-stride", ov.eval_stride, "stride between evaluation windows");
    predict->add_option("--channels", ov.channels, "comma-separated feature channels");

    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gradcheck_cmd->add_option("--scope", scope, "layer, model or all")->default_val("all");
    gradcheck_cmd->add_option("--seed", gc_seed, "base seed");
    gradcheck_cmd->add_option("--seeds", gc_seeds, "number of seeds");
    gradcheck_cmd->add_flag("--inject-fault", inject_fault)->group("");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand(gradcheck_cmd))
            return cmd_gradcheck(scope, gc_seed, gc_seeds, inject_fault, std::cout);

        RunConfig cfg = load_run_config(config_path);
        apply_overrides(cfg, ov);
        if (app.got_subcommand(synth)) {
            cmd_synth(cfg, out_path);
        } else if (app.got_subcommand(preprocess)) {
            cmd_preprocess(cfg, data_path, out_path);
        } else if (app.got_subcommand(train)) {
            cmd_train(cfg, data_path, out_path);
        } else if (app.got_subcommand(eval)) {
            cmd_eval(cfg, checkpoint_path, data_path, out_path);
        } else if (app.got_subcommand(predict)) {
            cmd_predict(cfg, checkpoint_path, input_path, std::cout);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace pendiag
