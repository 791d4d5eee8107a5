#pragma once

#include "tlbench/augment.hpp"
#include "tlbench/records.hpp"

#include <map>
#include <string>

namespace tlbench {

struct CellKey {
    std::string country;
    Label label;
    auto operator<=>(const CellKey&) const = default;
};

struct BalancingCell {
    std::size_t existing = 0;
    std::size_t target = 0;
    std::size_t synth_needed = 0; // max(0, target - existing)
    std::size_t drop_needed = 0;  // only when downsampling is enabled
};

struct BalancingPlan {
    std::map<CellKey, BalancingCell> cells;
    std::size_t total_synth() const;
    std::size_t total_drop() const;
    std::string summary() const;
};

/// Build per-(country,label) synthesis counts toward the per-label targets.
/// A cell above its target raises PlanError unless allow_downsampling is set,
/// in which case the surplus is scheduled for removal.
BalancingPlan plan_balancing(const DatasetManifest& manifest,
                             const std::map<Label, std::size_t>& targets,
                             bool allow_downsampling = false);

struct ExecutePlanOptions {
    std::string image_root;  // prefix for relative image_refs
    std::string staging_dir; // augmented images land under <staging>/<country>/<label>/
    std::uint64_t seed = 42;
};

/// Materialize the plan: write augmented copies of cell source images into the
/// staging directory and append records referencing them (metadata copied from
/// the source record). Downsampled cells lose uniformly chosen records. The
/// result hits every cell target exactly. An I/O failure raises
/// PartialPlanError listing the cells already completed.
DatasetManifest execute_plan(const DatasetManifest& manifest, const BalancingPlan& plan,
                             const AugmentationPolicy& policy, const ExecutePlanOptions& options,
                             CurationLog* log = nullptr);

} // namespace tlbench
