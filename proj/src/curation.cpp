#include "tlbench/curation.hpp"

#include "tlbench/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tlbench {

ImputeStrategy impute_strategy_from_string(const std::string& s) {
    if (s == "country_mean") return ImputeStrategy::country_mean;
    if (s == "country_median") return ImputeStrategy::country_median;
    throw ConfigError("unknown imputation strategy: '" + s + "'");
}

std::string to_string(ImputeStrategy s) {
    return s == ImputeStrategy::country_mean ? "country_mean" : "country_median";
}

namespace {

double central_value(std::vector<double> values, ImputeStrategy strategy) {
    if (strategy == ImputeStrategy::country_mean)
        return std::accumulate(values.begin(), values.end(), 0.0) /
               static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace

DatasetManifest impute_age(const DatasetManifest& manifest, ImputeStrategy strategy,
                           CurationLog* log) {
    std::map<std::string, std::vector<double>> by_country;
    std::vector<double> all;
    for (const auto& r : manifest.records()) {
        if (r.age) {
            by_country[r.country].push_back(*r.age);
            all.push_back(*r.age);
        }
    }
    if (all.empty()) throw ImputationError("cannot impute age: every age is missing");

    const double global = central_value(all, strategy);
    std::map<std::string, double> fill;
    for (auto& [country, values] : by_country)
        fill[country] = central_value(std::move(values), strategy);

    std::vector<PatientRecord> records = manifest.records();
    std::size_t affected = 0;
    for (auto& r : records) {
        if (r.age) continue;
        auto it = fill.find(r.country);
        r.age = it != fill.end() ? it->second : global;
        ++affected;
    }
    if (log)
        log->add(fmt::format("impute_age strategy={} rows_affected={}", to_string(strategy),
                             affected));
    return DatasetManifest(std::move(records));
}

DatasetManifest impute_sex(const DatasetManifest& manifest, CurationLog* log) {
    // Mode with lexicographic tie-break: female wins ties ("female" < "male").
    struct Tally {
        std::size_t male = 0, female = 0;
        std::optional<Sex> mode() const {
            if (male + female == 0) return std::nullopt;
            return male > female ? Sex::male : Sex::female;
        }
    };
    std::map<std::string, Tally> by_country;
    Tally global;
    for (const auto& r : manifest.records()) {
        if (!r.sex) continue;
        auto& t = by_country[r.country];
        if (*r.sex == Sex::male) ++t.male, ++global.male;
        else ++t.female, ++global.female;
    }
    auto global_mode = global.mode();
    if (!global_mode) throw ImputationError("cannot impute sex: every value is missing");

    std::vector<PatientRecord> records = manifest.records();
    std::size_t affected = 0;
    for (auto& r : records) {
        if (r.sex) continue;
        auto it = by_country.find(r.country);
        auto mode = it != by_country.end() ? it->second.mode() : std::nullopt;
        r.sex = mode ? mode : global_mode;
        ++affected;
    }
    if (log) log->add(fmt::format("impute_sex rows_affected={}", affected));
    return DatasetManifest(std::move(records));
}

DatasetManifest assign_age_groups(const DatasetManifest& manifest, CurationLog* log) {
    std::vector<PatientRecord> records = manifest.records();
    for (auto& r : records) {
        if (!r.age)
            throw ImputationError("assign_age_groups requires imputed ages (missing for " +
                                  r.image_ref + ")");
        r.age_group = age_group_for(*r.age);
    }
    if (log) log->add(fmt::format("assign_age_groups rows_affected={}", records.size()));
    return DatasetManifest(std::move(records));
}

DatasetManifest drop_low_sample_countries(const DatasetManifest& manifest, std::size_t min_count,
                                          CurationLog* log) {
    const auto& by_country = manifest.counts().by_country;
    std::vector<std::string> dropped;
    for (const auto& [country, n] : by_country)
        if (n < min_count) dropped.push_back(country);

    if (dropped.empty()) {
        if (log)
            log->add(fmt::format("drop_low_sample_countries min_count={} rows_affected=0",
                                 min_count));
        return manifest;
    }

    std::vector<PatientRecord> kept;
    kept.reserve(manifest.size());
    std::size_t removed = 0;
    for (const auto& r : manifest.records()) {
        if (std::find(dropped.begin(), dropped.end(), r.country) != dropped.end()) ++removed;
        else kept.push_back(r);
    }
    if (kept.empty())
        throw EmptyDatasetError(
            fmt::format("drop_low_sample_countries(min_count={}) removed every record", min_count));
    if (log)
        log->add(fmt::format("drop_low_sample_countries min_count={} rows_affected={} dropped={}",
                             min_count, removed, fmt::join(dropped, "|")));
    return DatasetManifest(std::move(kept));
}

DatasetManifest undersample(const DatasetManifest& manifest,
                            const std::map<std::string, std::size_t>& caps, std::uint64_t seed,
                            CurationLog* log) {
    // Positions of each capped country's records, in manifest order.
    std::map<std::string, std::vector<std::size_t>> positions;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& country = manifest.records()[i].country;
        if (caps.count(country)) positions[country].push_back(i);
    }

    std::vector<bool> keep(manifest.size(), true);
    std::size_t removed = 0;
    for (auto& [country, pos] : positions) {
        const std::size_t cap = caps.at(country);
        if (pos.size() <= cap) continue;
        // Partial Fisher-Yates keyed by (seed, country) so per-country picks are
        // independent of manifest composition elsewhere.
        CounterRng rng(seed, derive_seed(0, country));
        for (std::size_t i = 0; i < cap; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng.next_below(pos.size() - i));
            std::swap(pos[i], pos[j]);
        }
        for (std::size_t i = cap; i < pos.size(); ++i) keep[pos[i]] = false;
        removed += pos.size() - cap;
    }

    std::vector<PatientRecord> kept;
    kept.reserve(manifest.size() - removed);
    for (std::size_t i = 0; i < manifest.size(); ++i)
        if (keep[i]) kept.push_back(manifest.records()[i]);

    if (log) {
        std::vector<std::string> parts;
        for (const auto& [country, cap] : caps) parts.push_back(fmt::format("{}:{}", country, cap));
        log->add(fmt::format("undersample seed={} caps={} rows_affected={}", seed,
                             fmt::join(parts, "|"), removed));
    }
    return DatasetManifest(std::move(kept));
}

StrataKey strata_key_from_string(const std::string& s) {
    if (s == "label") return StrataKey::label;
    if (s == "age_group") return StrataKey::age_group;
    if (s == "country") return StrataKey::country;
    throw ConfigError("unknown strata key: '" + s + "'");
}

std::string to_string(StrataKey k) {
    switch (k) {
    case StrataKey::label: return "label";
    case StrataKey::age_group: return "age_group";
    case StrataKey::country: return "country";
    }
    return "?";
}

void SplitSpec::validate() const {
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw ConfigError("split fractions must be nonnegative");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError(fmt::format("split fractions sum to {}, expected 1", sum));
}

namespace {

std::string stratum_key(const PatientRecord& r, const std::vector<StrataKey>& keys) {
    std::string out;
    for (StrataKey k : keys) {
        switch (k) {
        case StrataKey::label: out += to_string(r.label); break;
        case StrataKey::age_group:
            if (!r.age_group)
                throw ImputationError("stratified_split on age_group requires assign_age_groups");
            out += to_string(*r.age_group);
            break;
        case StrataKey::country: out += r.country; break;
        }
        out.push_back('/');
    }
    return out;
}

} // namespace

SplitResult stratified_split(const DatasetManifest& manifest, const SplitSpec& spec,
                             CurationLog* log) {
    spec.validate();
    if (manifest.empty()) throw EmptyDatasetError("stratified_split on empty manifest");

    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < manifest.size(); ++i)
        strata[stratum_key(manifest.records()[i], spec.strata_keys)].push_back(i);

    int nonzero_splits = 0;
    for (double f : spec.fractions)
        if (f > 0.0) ++nonzero_splits;

    SplitResult result;
    std::array<std::vector<std::size_t>, 3> assignment;
    for (auto& [key, indices] : strata) {
        const std::size_t n = indices.size();
        if (n < static_cast<std::size_t>(nonzero_splits)) {
            result.warnings.push_back(fmt::format(
                "stratum '{}' has {} record(s), fewer than {} nonzero splits; assigned to train",
                key, n, nonzero_splits));
            for (auto idx : indices) assignment[0].push_back(idx);
            continue;
        }
        // Shuffle within the stratum, keyed by (seed, stratum) so the outcome
        // does not depend on which other strata exist.
        CounterRng rng(spec.seed, derive_seed(0, key));
        for (std::size_t i = 0; i + 1 < n; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
            std::swap(indices[i], indices[j]);
        }
        // Largest-remainder rounding: |count_k - fraction_k * n| < 1 per split.
        std::array<std::size_t, 3> quota{};
        std::array<double, 3> remainder{};
        std::size_t assigned = 0;
        for (int k = 0; k < 3; ++k) {
            double exact = spec.fractions[k] * static_cast<double>(n);
            quota[k] = static_cast<std::size_t>(std::floor(exact));
            remainder[k] = exact - static_cast<double>(quota[k]);
            assigned += quota[k];
        }
        std::array<int, 3> order{0, 1, 2};
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return remainder[a] > remainder[b]; });
        for (std::size_t extra = 0; extra < n - assigned; ++extra) ++quota[order[extra % 3]];

        std::size_t cursor = 0;
        for (int k = 0; k < 3; ++k)
            for (std::size_t c = 0; c < quota[k]; ++c) assignment[k].push_back(indices[cursor++]);
    }

    auto build = [&](std::vector<std::size_t>& idx) {
        std::sort(idx.begin(), idx.end()); // restore manifest order
        std::vector<PatientRecord> recs;
        recs.reserve(idx.size());
        for (auto i : idx) recs.push_back(manifest.records()[i]);
        return DatasetManifest(std::move(recs));
    };
    result.train = build(assignment[0]);
    result.val = build(assignment[1]);
    result.test = build(assignment[2]);

    if (log) {
        std::vector<std::string> keys;
        for (auto k : spec.strata_keys) keys.push_back(to_string(k));
        log->add(fmt::format("stratified_split fractions={},{},{} strata={} seed={} "
                             "rows_affected={} sizes={}/{}/{}",
                             spec.fractions[0], spec.fractions[1], spec.fractions[2],
                             fmt::join(keys, "+"), spec.seed, manifest.size(), result.train.size(),
                             result.val.size(), result.test.size()));
        for (const auto& w : result.warnings) log->add("warning " + w);
    }
    return result;
}

} // namespace tlbench
