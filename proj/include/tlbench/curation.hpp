#pragma once

#include "tlbench/records.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tlbench {

enum class ImputeStrategy { country_mean, country_median };

ImputeStrategy impute_strategy_from_string(const std::string& s);
std::string to_string(ImputeStrategy s);

/// Fill missing ages with the per-country central value (mean or median);
/// countries without any observed age fall back to the global central value.
/// Non-missing ages are never touched. Throws ImputationError when every age
/// is missing.
DatasetManifest impute_age(const DatasetManifest& manifest, ImputeStrategy strategy,
                           CurationLog* log = nullptr);

/// Fill missing sex with the per-country mode (global mode as fallback).
/// Mode ties resolve to the lexicographically smallest value ("female").
DatasetManifest impute_sex(const DatasetManifest& manifest, CurationLog* log = nullptr);

/// Attach an AgeGroup to every record. Requires ages to be imputed.
DatasetManifest assign_age_groups(const DatasetManifest& manifest, CurationLog* log = nullptr);

/// Remove every country with fewer than min_count records.
/// Throws EmptyDatasetError when nothing remains.
DatasetManifest drop_low_sample_countries(const DatasetManifest& manifest,
                                          std::size_t min_count = 100,
                                          CurationLog* log = nullptr);

/// Cap per-country counts; selection is uniform at random under the seed and
/// deterministic per seed. Countries absent from caps are left alone.
DatasetManifest undersample(const DatasetManifest& manifest,
                            const std::map<std::string, std::size_t>& caps, std::uint64_t seed,
                            CurationLog* log = nullptr);

enum class StrataKey { label, age_group, country };

StrataKey strata_key_from_string(const std::string& s);
std::string to_string(StrataKey k);

struct SplitSpec {
    std::array<double, 3> fractions{0.8, 0.2, 0.0}; // train, val, test; sum to 1
    std::vector<StrataKey> strata_keys{StrataKey::label, StrataKey::age_group};
    std::uint64_t seed = 42;

    void validate() const; // fractions nonnegative, sum to 1 within 1e-9
    bool operator==(const SplitSpec&) const = default;
};

struct SplitResult {
    DatasetManifest train;
    DatasetManifest val;
    DatasetManifest test;
    std::vector<std::string> warnings; // stratum-too-small fallbacks
};

/// Stratified split with largest-remainder rounding per stratum, so each
/// stratum's per-split count is within one record of fraction*stratum size.
/// A stratum smaller than the number of nonzero splits goes entirely to train
/// (with a warning). Deterministic per seed; splits partition the input.
SplitResult stratified_split(const DatasetManifest& manifest, const SplitSpec& spec,
                             CurationLog* log = nullptr);

} // namespace tlbench
