#include "tlbench/balance.hpp"

#include "tlbench/image.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>

namespace fs = std::filesystem;

namespace tlbench {

std::size_t BalancingPlan::total_synth() const {
    std::size_t n = 0;
    for (const auto& [key, cell] : cells) n += cell.synth_needed;
    return n;
}

std::size_t BalancingPlan::total_drop() const {
    std::size_t n = 0;
    for (const auto& [key, cell] : cells) n += cell.drop_needed;
    return n;
}

std::string BalancingPlan::summary() const {
    std::string out;
    for (const auto& [key, cell] : cells)
        out += fmt::format("{}/{}: existing={} target={} synth={} drop={}\n", key.country,
                           to_string(key.label), cell.existing, cell.target, cell.synth_needed,
                           cell.drop_needed);
    out += fmt::format("total synth={} drop={}\n", total_synth(), total_drop());
    return out;
}

BalancingPlan plan_balancing(const DatasetManifest& manifest,
                             const std::map<Label, std::size_t>& targets,
                             bool allow_downsampling) {
    std::map<CellKey, std::size_t> existing;
    for (const auto& r : manifest.records())
        if (targets.count(r.label)) ++existing[CellKey{r.country, r.label}];

    BalancingPlan plan;
    for (const auto& [country, n_country] : manifest.counts().by_country) {
        for (const auto& [label, target] : targets) {
            CellKey key{country, label};
            BalancingCell cell;
            cell.target = target;
            auto it = existing.find(key);
            cell.existing = it != existing.end() ? it->second : 0;
            if (cell.existing > target) {
                if (!allow_downsampling)
                    throw PlanError(fmt::format(
                        "cell {}/{} holds {} records, above target {}; enable downsampling "
                        "or raise the target",
                        country, to_string(label), cell.existing, target));
                cell.drop_needed = cell.existing - target;
            } else {
                cell.synth_needed = target - cell.existing;
            }
            plan.cells[key] = cell;
        }
    }
    return plan;
}

namespace {

std::string resolve_ref(const std::string& image_root, const std::string& ref) {
    fs::path p(ref);
    if (p.is_absolute() || image_root.empty()) return ref;
    return (fs::path(image_root) / p).string();
}

} // namespace

DatasetManifest execute_plan(const DatasetManifest& manifest, const BalancingPlan& plan,
                             const AugmentationPolicy& policy, const ExecutePlanOptions& options,
                             CurationLog* log) {
    // Cell membership in manifest order.
    std::map<CellKey, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& r = manifest.records()[i];
        CellKey key{r.country, r.label};
        if (plan.cells.count(key)) members[key].push_back(i);
    }
    for (const auto& [key, cell] : plan.cells) {
        if (cell.synth_needed > 0 && members[key].empty())
            throw PlanError(fmt::format("cell {}/{} needs {} synthetic records but has no "
                                        "source records",
                                        key.country, to_string(key.label), cell.synth_needed));
    }

    std::vector<bool> keep(manifest.size(), true);
    std::vector<PatientRecord> synthetic;
    std::vector<std::string> completed;
    std::size_t cell_index = 0;
    for (const auto& [key, cell] : plan.cells) {
        const std::string cell_name = key.country + "/" + to_string(key.label);
        if (cell.drop_needed > 0) {
            auto pos = members[key];
            CounterRng rng(options.seed, derive_seed(0, cell_name), 0xD609);
            for (std::size_t i = 0; i < cell.target; ++i) {
                std::size_t j = i + static_cast<std::size_t>(rng.next_below(pos.size() - i));
                std::swap(pos[i], pos[j]);
            }
            for (std::size_t i = cell.target; i < pos.size(); ++i) keep[pos[i]] = false;
        }
        if (cell.synth_needed > 0) {
            fs::path cell_dir = fs::path(options.staging_dir) / key.country / to_string(key.label);
            try {
                fs::create_directories(cell_dir);
                const auto& sources = members[key];
                for (std::size_t k = 0; k < cell.synth_needed; ++k) {
                    const auto& src = manifest.records()[sources[k % sources.size()]];
                    ImageTensor img =
                        decode_grayscale(resolve_ref(options.image_root, src.image_ref));
                    CounterRng rng(policy.seed, derive_seed(0, cell_name), k);
                    ImageTensor augmented = apply_augmentation(img, policy, rng);
                    std::string stem = fs::path(src.image_ref).stem().string();
                    fs::path out_path = cell_dir / fmt::format("{}_{}.png", stem, k);
                    encode_png(augmented, out_path.string());

                    PatientRecord rec = src;
                    rec.image_ref = out_path.string();
                    synthetic.push_back(std::move(rec));
                }
            } catch (const Error& e) {
                throw PartialPlanError(fmt::format(
                    "plan aborted in cell {} ({}); completed cells: [{}]", cell_name, e.what(),
                    fmt::join(completed, ", ")));
            }
        }
        completed.push_back(cell_name);
        ++cell_index;
    }

    std::vector<PatientRecord> records;
    records.reserve(manifest.size() + synthetic.size());
    for (std::size_t i = 0; i < manifest.size(); ++i)
        if (keep[i]) records.push_back(manifest.records()[i]);
    for (auto& r : synthetic) records.push_back(std::move(r));

    if (log)
        log->add(fmt::format("execute_plan cells={} synthesized={} dropped={} staging={}",
                             plan.cells.size(), plan.total_synth(), plan.total_drop(),
                             options.staging_dir));
    return DatasetManifest(std::move(records));
}

} // namespace tlbench
