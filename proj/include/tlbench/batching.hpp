#pragma once

#include "tlbench/records.hpp"
#include "tlbench/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tlbench {

struct BatchingConfig {
    std::size_t batch_size = 128;
    std::size_t shuffle_buffer = 10000;
    std::uint64_t seed = 42;
    bool cache = true;

    void validate() const;

    bool operator==(const BatchingConfig&) const = default;
};

/// ceil(n / batch_size). n == 0 raises EmptyDatasetError.
std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size);

/// Index-level batch stream. Training streams shuffle through a bounded buffer
/// (reshuffled each epoch, deterministic per seed); evaluation streams keep
/// manifest order. Consumers map indices back to records/images.
class BatchStream {
  public:
    BatchStream(std::size_t n, BatchingConfig config, bool shuffle);

    /// Record visitation order for the given epoch (a permutation of [0,n)).
    std::vector<std::size_t> epoch_order(std::size_t epoch) const;

    /// The order chunked into ceil(n/batch_size) batches.
    std::vector<std::vector<std::size_t>> epoch_batches(std::size_t epoch) const;

    std::size_t size() const { return n_; }
    std::size_t steps() const;
    const BatchingConfig& config() const { return config_; }
    bool shuffled() const { return shuffle_; }
    std::string summary() const;

  private:
    std::size_t n_;
    BatchingConfig config_;
    bool shuffle_;
};

BatchStream make_batches(const DatasetManifest& manifest, const BatchingConfig& config,
                         bool shuffle);

} // namespace tlbench
