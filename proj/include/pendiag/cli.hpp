#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pendiag/model.hpp"
#include "pendiag/preprocess.hpp"
#include "pendiag/synth.hpp"
#include "pendiag/train.hpp"

namespace pendiag {

// Everything a run needs, resolved from defaults, then an optional JSON
// config file, then command-line overrides, in that order.
struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t runs = 1;
    std::size_t n_hc = 29;
    std::size_t n_pd = 20;
    SynthConfig synth;
    PreprocessConfig preprocess;
    ModelConfig model; // window and in_features are derived from preprocess
    TrainConfig train;
};

RunConfig load_run_config(const std::filesystem::path& path);

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> runs;
    std::optional<std::size_t> window;
    std::optional<std::size_t> stride;
    std::optional<std::size_t> eval_stride;
    std::optional<std::string> channels; // comma separated
};

void apply_overrides(RunConfig& cfg, const CliOverrides& ov);

// Couples the derived fields (model window/in_features, per-stage seeds)
// and validates every section. Commands call this on entry.
void finalize_run_config(RunConfig& cfg);

// Echo that load_run_config accepts back unchanged.
std::string resolved_config_json(const RunConfig& cfg);

void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_preprocess(const RunConfig& cfg, const std::filesystem::path& data_dir,
                    const std::filesystem::path& out_dir);
void cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir);
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint_path,
              const std::filesystem::path& data_dir, const std::filesystem::path& out_dir);
void cmd_predict(const RunConfig& cfg, const std::filesystem::path& checkpoint_path,
                 const std::filesystem::path& input_file, std::ostream& out);
// Returns 0 when every checked component meets its tolerance, 1 otherwise.
int cmd_gradcheck(const std::string& scope, std::uint64_t seed, std::size_t seeds,
                  bool inject_fault, std::ostream& out);

// argv-style entry point without the program name. Exit codes: 0 success,
// 1 generic failure, 2 config, 3 data, 4 numeric, 5 I/O.
int run_cli(std::vector<std::string> args);

} // namespace pendiag
