#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "cola/tensor.hpp"

namespace cola {

// Flat classification dataset: inputs scaled to working range, one integer
// label per row. Stored as f32 and materialized into batches at the run
// precision.
struct DatasetHandle {
    std::string name;
    std::string split; // "train" / "test" / ...
    std::size_t n = 0;
    std::size_t dim = 0;
    int classes = 0;
    std::vector<float> inputs; // n * dim row-major
    std::vector<int> labels;   // n

    // Materializes the given rows (in order) as a tensor of the requested
    // precision plus their labels.
    Tensor gather(std::span<const std::int64_t> rows, Dtype dt) const;
    std::vector<int> gather_labels(std::span<const std::int64_t> rows) const;
};

// IDX-format loader (big-endian magic 0x00000803 for images, 0x00000801 for
// labels). Pixels are scaled by 1/255.
DatasetHandle load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// Gaussian blobs: `classes` class means at pairwise distance ~separation
// along random orthogonal directions, unit noise. Deterministic by seed.
DatasetHandle synth_dataset(int classes, int per_class, int dims, double separation, std::uint64_t seed);

// Prefix/suffix row split (rows are already class-interleaved and shuffled).
std::pair<DatasetHandle, DatasetHandle> split_dataset(const DatasetHandle& ds, double train_frac);

} // namespace cola
