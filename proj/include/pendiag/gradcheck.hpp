#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pendiag::gradcheck {

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
double rel_err(double analytic, double numeric);

inline constexpr double kFdStep = 1e-5;
inline constexpr double kTolLinear = 1e-6; // conv1d, maxpool, relu, dense, dropout, softmax_ce
inline constexpr double kTolRecurrent = 1e-4; // lstm, full model

struct Report {
    std::string layer;
    std::size_t evaluations = 0; // scalar gradients compared
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Single-seed checks; each draws its own shapes and values from the seed.
// Piecewise-linear layers are sampled away from their kinks.
Report check_conv1d(std::uint64_t seed);
Report check_maxpool(std::uint64_t seed);
Report check_relu(std::uint64_t seed);
Report check_lstm(std::uint64_t seed);
Report check_dense(std::uint64_t seed, bool inject_fault = false);
Report check_dropout(std::uint64_t seed);
Report check_softmax_ce(std::uint64_t seed);
// Reduced end-to-end configuration with dropout disabled.
Report check_model(std::uint64_t seed);

// Aggregates every layer plus the full model across `seeds` consecutive
// seeds starting at base_seed. inject_fault biases one dense gradient by
// 10% so the harness itself can be shown to catch errors.
std::vector<Report> run_gradcheck(std::uint64_t base_seed, std::size_t seeds,
                                  bool inject_fault = false);

} // namespace pendiag::gradcheck
