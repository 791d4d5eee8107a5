#pragma once

#include "tlbench/modelzoo.hpp"
#include "tlbench/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tlbench {

/// Discrete grids plus an optional log-uniform continuous mode for the rate
/// parameters (the continuous mode is the default; the published optimum lies
/// between the grid points).
struct SearchSpace {
    std::vector<double> dropout_rates{0.2, 0.3, 0.4, 0.5};
    std::vector<int> dense_units{32, 64, 128, 256, 512};
    std::vector<double> learning_rates{1e-5, 5e-5, 1e-4};
    std::vector<double> weight_decays{1e-5, 1e-4};
    std::vector<double> freeze_rates{0.01, 0.05, 0.10, 0.20, 0.50, 0.75};
    std::vector<nn::OptimizerFamily> optimizers{
        nn::OptimizerFamily::sgd, nn::OptimizerFamily::rmsprop, nn::OptimizerFamily::adam,
        nn::OptimizerFamily::nadam, nn::OptimizerFamily::adam_decoupled_wd};
    bool continuous_rates = true;
    double lr_bounds[2] = {1e-5, 1e-3};
    double wd_bounds[2] = {1e-6, 1e-3};

    void validate() const;
    bool operator==(const SearchSpace&) const = default;
};

struct TrialConfig {
    double dropout_rate = 0.3;
    int dense_units = 128;
    double learning_rate = 5e-5;
    double weight_decay = 1e-5;
    double freeze_rate = 0.2;
    nn::OptimizerFamily optimizer = nn::OptimizerFamily::adam_decoupled_wd;

    std::string to_json() const;
    bool operator==(const TrialConfig&) const = default;
};

TrialConfig sample_trial(const SearchSpace& space, CounterRng& rng);

struct Rung {
    int configs = 0; // n_i
    int epochs = 0;  // r_i
};

struct Bracket {
    int s = 0; // bracket index, s_max .. 0
    std::vector<Rung> rungs;
};

/// Successive-halving bracket table:
///   s_max = floor(log_eta(max_epochs)), brackets s = s_max..0,
///   n_0 = ceil((s_max+1) * eta^s / (s+1)), n_{i+1} = ceil(n_i / eta),
///   r_i = max(1, floor(max_epochs * eta^(i-s))).
std::vector<Bracket> hyperband_schedule(int max_epochs, int eta);

struct TrialOutcome {
    double objective = 0.0; // best val accuracy seen during the trial
    int epochs_run = 0;
    bool failed = false;
    std::string error;
};

/// Executes one configuration under an epoch budget. Seeds are derived per
/// trial so reruns reproduce the search exactly.
using TrialRunner =
    std::function<TrialOutcome(const TrialConfig&, int budget_epochs, std::uint64_t seed)>;

struct TrialResult {
    int trial_id = 0;
    TrialConfig config;
    int bracket = 0;
    int rung = 0;
    int epochs_run = 0;
    double objective = 0.0;
    bool failed = false;
    std::string error;
};

struct SearchResult {
    TrialConfig best;
    double best_objective = 0.0;
    int best_trial_id = -1;
    std::vector<TrialResult> trials; // one record per executed rung
};

struct SearchOptions {
    std::uint64_t seed = 42;
    std::string log_dir; // one JSON record per execution + leaderboard CSV
    int workers = 1;     // concurrent trials within a rung
};

/// Hyperband: per bracket, sample n_0 configs, run each rung, promote the
/// top ceil(n_i/eta) by objective (ties to the lower trial id). A crashed
/// trial scores -inf and the search continues. Returns the arg-max over all
/// executed trials.
SearchResult run_search(const SearchSpace& space, const TrialRunner& runner,
                        const std::vector<Bracket>& schedule, const SearchOptions& options);

} // namespace tlbench
