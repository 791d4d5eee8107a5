#include "tlbench/tuner.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

namespace fs = std::filesystem;

namespace tlbench {

using nlohmann::json;

void SearchSpace::validate() const {
    if (dropout_rates.empty() || dense_units.empty() || learning_rates.empty() ||
        weight_decays.empty() || freeze_rates.empty() || optimizers.empty())
        throw ConfigError("search space dimensions must be nonempty");
    if (continuous_rates) {
        if (!(lr_bounds[0] > 0.0 && lr_bounds[0] <= lr_bounds[1]))
            throw ConfigError("invalid learning-rate bounds");
        if (!(wd_bounds[0] > 0.0 && wd_bounds[0] <= wd_bounds[1]))
            throw ConfigError("invalid weight-decay bounds");
    }
}

std::string TrialConfig::to_json() const {
    json j;
    j["dropout_rate"] = dropout_rate;
    j["dense_units"] = dense_units;
    j["learning_rate"] = learning_rate;
    j["weight_decay"] = weight_decay;
    j["freeze_rate"] = freeze_rate;
    j["optimizer"] = nn::to_string(optimizer);
    return j.dump();
}

TrialConfig sample_trial(const SearchSpace& space, CounterRng& rng) {
    TrialConfig c;
    c.dropout_rate = space.dropout_rates[rng.next_below(space.dropout_rates.size())];
    c.dense_units = space.dense_units[rng.next_below(space.dense_units.size())];
    if (space.continuous_rates) {
        c.learning_rate = std::exp(
            rng.next_uniform(std::log(space.lr_bounds[0]), std::log(space.lr_bounds[1])));
        c.weight_decay = std::exp(
            rng.next_uniform(std::log(space.wd_bounds[0]), std::log(space.wd_bounds[1])));
    } else {
        c.learning_rate = space.learning_rates[rng.next_below(space.learning_rates.size())];
        c.weight_decay = space.weight_decays[rng.next_below(space.weight_decays.size())];
    }
    c.freeze_rate = space.freeze_rates[rng.next_below(space.freeze_rates.size())];
    c.optimizer = space.optimizers[rng.next_below(space.optimizers.size())];
    return c;
}

std::vector<Bracket> hyperband_schedule(int max_epochs, int eta) {
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (eta < 2) throw ConfigError("reduction factor must be >= 2");

    const int s_max = static_cast<int>(
        std::floor(std::log(static_cast<double>(max_epochs)) / std::log(static_cast<double>(eta))));
    std::vector<Bracket> schedule;
    for (int s = s_max; s >= 0; --s) {
        Bracket bracket;
        bracket.s = s;
        const double n0 = std::ceil(static_cast<double>(s_max + 1) * std::pow(eta, s) /
                                    static_cast<double>(s + 1));
        int n = static_cast<int>(n0);
        for (int i = 0; i <= s; ++i) {
            Rung rung;
            rung.configs = n;
            rung.epochs = std::max(
                1, static_cast<int>(std::floor(max_epochs * std::pow(eta, i - s))));
            bracket.rungs.push_back(rung);
            n = static_cast<int>(std::ceil(static_cast<double>(n) / eta));
        }
        schedule.push_back(bracket);
    }
    return schedule;
}

namespace {

void log_trial(const std::string& dir, const TrialResult& r) {
    if (dir.empty()) return;
    json j;
    j["trial_id"] = r.trial_id;
    j["config"] = json::parse(r.config.to_json());
    j["bracket"] = r.bracket;
    j["rung"] = r.rung;
    j["epochs_run"] = r.epochs_run;
    j["objective"] = r.failed ? json() : json(r.objective);
    j["failed"] = r.failed;
    if (r.failed) j["error"] = r.error;
    std::ofstream out(fs::path(dir) /
                      fmt::format("trial_{:04}_rung_{}.json", r.trial_id, r.rung));
    if (!out) throw IoError("cannot write trial record in " + dir);
    out << j.dump(2) << "\n";
}

void write_leaderboard(const std::string& dir, const std::vector<TrialResult>& trials) {
    if (dir.empty()) return;
    std::vector<const TrialResult*> rows;
    rows.reserve(trials.size());
    for (const auto& t : trials) rows.push_back(&t);
    std::stable_sort(rows.begin(), rows.end(), [](const TrialResult* a, const TrialResult* b) {
        if (a->failed != b->failed) return !a->failed;
        return a->objective > b->objective;
    });
    std::ofstream out(fs::path(dir) / "leaderboard.csv");
    if (!out) throw IoError("cannot write tuning leaderboard in " + dir);
    out << "trial_id,bracket,rung,epochs_run,objective,dropout_rate,dense_units,learning_rate,"
           "weight_decay,freeze_rate,optimizer,failed\n";
    for (const auto* t : rows)
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", t->trial_id, t->bracket,
                           t->rung, t->epochs_run, t->failed ? 0.0 : t->objective,
                           t->config.dropout_rate, t->config.dense_units,
                           t->config.learning_rate, t->config.weight_decay,
                           t->config.freeze_rate, nn::to_string(t->config.optimizer),
                           t->failed ? 1 : 0);
}

struct ActiveTrial {
    int trial_id;
    TrialConfig config;
    std::uint64_t seed;
    double objective = -std::numeric_limits<double>::infinity();
};

} // namespace

SearchResult run_search(const SearchSpace& space, const TrialRunner& runner,
                        const std::vector<Bracket>& schedule, const SearchOptions& options) {
    space.validate();
    if (schedule.empty()) throw ConfigError("empty Hyperband schedule");
    if (!options.log_dir.empty()) fs::create_directories(options.log_dir);
    const int workers = std::max(1, options.workers);

    SearchResult result;
    result.best_objective = -std::numeric_limits<double>::infinity();
    int next_trial_id = 0;

    for (std::size_t bi = 0; bi < schedule.size(); ++bi) {
        const Bracket& bracket = schedule[bi];
        CounterRng sampler(options.seed, 0x5A11, bi);
        std::vector<ActiveTrial> cohort;
        for (int i = 0; i < bracket.rungs.front().configs; ++i) {
            ActiveTrial t;
            t.trial_id = next_trial_id++;
            t.config = sample_trial(space, sampler);
            t.seed = derive_seed(options.seed, 0x7217, bi, static_cast<std::uint64_t>(i));
            cohort.push_back(std::move(t));
        }

        for (std::size_t ri = 0; ri < bracket.rungs.size(); ++ri) {
            const Rung& rung = bracket.rungs[ri];
            if (static_cast<int>(cohort.size()) > rung.configs) cohort.resize(rung.configs);

            std::vector<TrialResult> rung_results(cohort.size());
            std::atomic<std::size_t> cursor{0};
            auto work = [&] {
                for (;;) {
                    const std::size_t i = cursor.fetch_add(1);
                    if (i >= cohort.size()) return;
                    TrialResult r;
                    r.trial_id = cohort[i].trial_id;
                    r.config = cohort[i].config;
                    r.bracket = bracket.s;
                    r.rung = static_cast<int>(ri);
                    try {
                        TrialOutcome outcome = runner(cohort[i].config, rung.epochs,
                                                      cohort[i].seed);
                        r.objective = outcome.failed
                                          ? -std::numeric_limits<double>::infinity()
                                          : outcome.objective;
                        r.epochs_run = outcome.epochs_run;
                        r.failed = outcome.failed;
                        r.error = outcome.error;
                    } catch (const std::exception& e) {
                        r.objective = -std::numeric_limits<double>::infinity();
                        r.failed = true;
                        r.error = e.what();
                    }
                    rung_results[i] = std::move(r);
                }
            };
            if (workers == 1 || cohort.size() <= 1) {
                work();
            } else {
                std::vector<std::thread> pool;
                const std::size_t n_threads =
                    std::min<std::size_t>(static_cast<std::size_t>(workers), cohort.size());
                pool.reserve(n_threads);
                for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
                for (auto& th : pool) th.join();
            }

            for (std::size_t i = 0; i < cohort.size(); ++i) {
                cohort[i].objective = rung_results[i].objective;
                log_trial(options.log_dir, rung_results[i]);
                result.trials.push_back(rung_results[i]);
                if (!rung_results[i].failed &&
                    rung_results[i].objective > result.best_objective) {
                    result.best_objective = rung_results[i].objective;
                    result.best = rung_results[i].config;
                    result.best_trial_id = rung_results[i].trial_id;
                }
            }

            // Promote the top ceil(n_i/eta); ties break toward the lower trial id.
            if (ri + 1 < bracket.rungs.size()) {
                std::sort(cohort.begin(), cohort.end(),
                          [](const ActiveTrial& a, const ActiveTrial& b) {
                              if (a.objective != b.objective) return a.objective > b.objective;
                              return a.trial_id < b.trial_id;
                          });
                cohort.resize(bracket.rungs[ri + 1].configs);
            }
        }
    }

    if (result.best_trial_id < 0) throw ConfigError("every trial failed; no best configuration");
    write_leaderboard(options.log_dir, result.trials);
    return result;
}

} // namespace tlbench
