#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scnn/tensor.hpp"

namespace scnn {

struct Sample {
    std::filesystem::path path;
    std::size_t label = 0;
};

// Files grouped by class folder. Class order is byte-lexicographic by folder name.
struct DatasetIndex {
    std::vector<Sample> samples;
    std::vector<std::string> classes;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

struct SplitSpec {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    std::uint64_t seed = 888;

    // Ratios must be non-negative and sum to 1 within 1e-9.
    void validate() const;
};

struct ClassSplitCounts {
    std::string name;
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

// Per class of n files (sorted by name, then shuffled with the seed): the first
// floor(n*train) go to train, the next floor(n*val) to val, the rest to test.
// Files are copied to dst/{train,val,test}/<class>/<filename>.
std::vector<ClassSplitCounts> split_folders(const std::filesystem::path& src, const std::filesystem::path& dst,
                                            const SplitSpec& spec);
std::vector<ClassSplitCounts> split_counts(const std::vector<std::size_t>& class_sizes, const SplitSpec& spec);

// Count table: one row per subset, one column per class, plus totals.
std::string format_split_table(const std::vector<ClassSplitCounts>& counts);

std::vector<std::string> discover_classes(const std::filesystem::path& dir);
DatasetIndex index_dataset(const std::filesystem::path& dir);
// Regular, non-hidden files directly inside dir, sorted by filename.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir);

// Decodes to luminance (0.299 R + 0.587 G + 0.114 B for colour sources),
// bilinearly resizes when the size differs, and scales to [0, 1].
Tensor load_grayscale_image(const std::filesystem::path& path, std::size_t target_h, std::size_t target_w);

struct Batch {
    Tensor x;       // (b, h, w, 1)
    Tensor onehot;  // (b, k)
    std::vector<std::size_t> indices;
};

// Splits 0..n-1 into batches; shuffled when a seed is given, in order otherwise.
std::vector<std::vector<std::size_t>> plan_batches(std::size_t n, std::size_t batch_size,
                                                   std::optional<std::uint64_t> shuffle_seed);

Batch load_batch(const DatasetIndex& ds, const std::vector<std::size_t>& indices, std::size_t h, std::size_t w);

// Lazily decodes one batch at a time in the planned order.
class BatchStream {
public:
    BatchStream(const DatasetIndex& ds, std::size_t batch_size, std::optional<std::uint64_t> epoch_seed, std::size_t h,
                std::size_t w);

    std::size_t batch_count() const { return plan_.size(); }
    const std::vector<std::vector<std::size_t>>& plan() const { return plan_; }
    std::optional<Batch> next();

private:
    const DatasetIndex& ds_;
    std::vector<std::vector<std::size_t>> plan_;
    std::size_t h_, w_;
    std::size_t cursor_ = 0;
};

}  // namespace scnn
