#include "tlbench/batching.hpp"

#include <fmt/format.h>

#include <numeric>

namespace tlbench {

void BatchingConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (shuffle_buffer < 1) throw ConfigError("shuffle_buffer must be >= 1");
}

std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (n == 0) throw EmptyDatasetError("steps_per_epoch over an empty dataset");
    return (n + batch_size - 1) / batch_size;
}

BatchStream::BatchStream(std::size_t n, BatchingConfig config, bool shuffle)
    : n_(n), config_(config), shuffle_(shuffle) {
    config_.validate();
    if (n_ == 0) throw EmptyDatasetError("batch stream over an empty manifest");
}

std::vector<std::size_t> BatchStream::epoch_order(std::size_t epoch) const {
    std::vector<std::size_t> order;
    order.reserve(n_);
    if (!shuffle_) {
        order.resize(n_);
        std::iota(order.begin(), order.end(), std::size_t{0});
        return order;
    }
    // Bounded-buffer shuffle: hold `shuffle_buffer` records, emit a uniformly
    // chosen one, refill from the remaining stream.
    CounterRng rng(config_.seed, 0x5u, epoch);
    const std::size_t buffer_size = std::min(config_.shuffle_buffer, n_);
    std::vector<std::size_t> buffer(buffer_size);
    std::iota(buffer.begin(), buffer.end(), std::size_t{0});
    std::size_t next = buffer_size;
    while (!buffer.empty()) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(buffer.size()));
        order.push_back(buffer[j]);
        if (next < n_) {
            buffer[j] = next++;
        } else {
            buffer[j] = buffer.back();
            buffer.pop_back();
        }
    }
    return order;
}

std::vector<std::vector<std::size_t>> BatchStream::epoch_batches(std::size_t epoch) const {
    const auto order = epoch_order(epoch);
    std::vector<std::vector<std::size_t>> batches;
    batches.reserve(steps());
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
        const std::size_t end = std::min(order.size(), start + config_.batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

std::size_t BatchStream::steps() const { return steps_per_epoch(n_, config_.batch_size); }

std::string BatchStream::summary() const {
    return fmt::format("records={} batch_size={} steps_per_epoch={} shuffle={} buffer={} "
                       "cache={} seed={}",
                       n_, config_.batch_size, steps(), shuffle_ ? "on" : "off",
                       config_.shuffle_buffer, config_.cache ? "on" : "off", config_.seed);
}

BatchStream make_batches(const DatasetManifest& manifest, const BatchingConfig& config,
                         bool shuffle) {
    return BatchStream(manifest.size(), config, shuffle);
}

} // namespace tlbench
