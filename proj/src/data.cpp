#include "scnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "scnn/errors.hpp"
#include "scnn/image_io.hpp"
#include "scnn/random.hpp"

namespace fs = std::filesystem;

namespace scnn {

void SplitSpec::validate() const {
    if (!(train >= 0.0 && val >= 0.0 && test >= 0.0)) throw std::invalid_argument("split ratios must be non-negative");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
}

namespace {

// n * ratio, floored. The small slack keeps products such as 100 * 0.29
// (28.999999999999996 in binary) on the intended integer.
std::size_t floor_share(std::size_t n, double ratio) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
}

bool is_hidden(const fs::path& p) {
    const std::string name = p.filename().string();
    return !name.empty() && name[0] == '.';
}

}  // namespace

std::vector<ClassSplitCounts> split_counts(const std::vector<std::size_t>& class_sizes, const SplitSpec& spec) {
    spec.validate();
    std::vector<ClassSplitCounts> out;
    for (std::size_t n : class_sizes) {
        ClassSplitCounts c;
        c.train = std::min(n, floor_share(n, spec.train));
        c.val = std::min(n - c.train, floor_share(n, spec.val));
        c.test = n - c.train - c.val;
        out.push_back(c);
    }
    return out;
}

std::vector<fs::path> list_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && !is_hidden(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

std::vector<std::string> discover_classes(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory() && !is_hidden(entry.path())) classes.push_back(entry.path().filename().string());
    if (classes.empty()) throw IoError("no class subdirectories in " + dir.string());
    std::sort(classes.begin(), classes.end());
    return classes;
}

DatasetIndex index_dataset(const fs::path& dir) {
    DatasetIndex ds;
    ds.classes = discover_classes(dir);
    for (std::size_t c = 0; c < ds.classes.size(); ++c)
        for (auto& f : list_files(dir / ds.classes[c])) ds.samples.push_back({std::move(f), c});
    return ds;
}

std::vector<ClassSplitCounts> split_folders(const fs::path& src, const fs::path& dst, const SplitSpec& spec) {
    spec.validate();
    const std::vector<std::string> classes = discover_classes(src);

    struct Plan {
        fs::path from, to;
    };
    std::vector<Plan> copies;
    std::vector<ClassSplitCounts> counts;
    Rng rng(spec.seed);
    static const char* kSubsets[3] = {"train", "val", "test"};

    for (const auto& cls : classes) {
        std::vector<fs::path> files = list_files(src / cls);
        if (files.empty()) throw IoError("empty class folder: " + (src / cls).string());
        rng.shuffle(std::span<fs::path>(files));
        ClassSplitCounts c = split_counts({files.size()}, spec).front();
        c.name = cls;
        const std::size_t bounds[3] = {c.train, c.train + c.val, files.size()};
        std::size_t subset = 0;
        for (std::size_t i = 0; i < files.size(); ++i) {
            while (i >= bounds[subset]) ++subset;
            copies.push_back({files[i], dst / kSubsets[subset] / cls / files[i].filename()});
        }
        counts.push_back(std::move(c));
    }

    for (const auto& p : copies)
        if (fs::exists(p.to)) throw IoError("destination already exists: " + p.to.string());
    for (const auto& p : copies) {
        fs::create_directories(p.to.parent_path());
        fs::copy_file(p.from, p.to, fs::copy_options::none);
    }
    return counts;
}

std::string format_split_table(const std::vector<ClassSplitCounts>& counts) {
    std::size_t name_w = 16;
    std::vector<std::size_t> widths;
    for (const auto& c : counts) widths.push_back(std::max<std::size_t>(c.name.size(), 6) + 2);

    std::size_t tt = 0, tv = 0, te = 0;
    for (const auto& c : counts) {
        tt += c.train;
        tv += c.val;
        te += c.test;
    }
    const std::size_t all = tt + tv + te;
    auto pct = [all](std::size_t n) {
        std::ostringstream os;
        os << n << " (" << (all ? static_cast<long>(std::lround(100.0 * static_cast<double>(n) / static_cast<double>(all))) : 0L)
           << "%)";
        return os.str();
    };

    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(name_w)) << "Datasets";
    for (std::size_t i = 0; i < counts.size(); ++i) os << std::setw(static_cast<int>(widths[i])) << counts[i].name;
    os << "Total\n";
    auto row = [&](const char* label, auto field, std::size_t total) {
        os << std::setw(static_cast<int>(name_w)) << label;
        for (std::size_t i = 0; i < counts.size(); ++i) os << std::setw(static_cast<int>(widths[i])) << field(counts[i]);
        os << pct(total) << '\n';
    };
    row("Training set", [](const ClassSplitCounts& c) { return c.train; }, tt);
    row("Validation set", [](const ClassSplitCounts& c) { return c.val; }, tv);
    row("Test set", [](const ClassSplitCounts& c) { return c.test; }, te);
    os << std::setw(static_cast<int>(name_w)) << "Total";
    for (std::size_t i = 0; i < counts.size(); ++i)
        os << std::setw(static_cast<int>(widths[i])) << (counts[i].train + counts[i].val + counts[i].test);
    os << all << '\n';
    return os.str();
}

Tensor load_grayscale_image(const fs::path& path, std::size_t target_h, std::size_t target_w) {
    const Image8 img = decode_image(path);
    const std::size_t n = img.height * img.width;
    std::vector<float> gray(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (img.channels == 1) {
            gray[i] = static_cast<float>(img.pixels[i]) / 255.0f;
        } else {
            const std::uint8_t* px = &img.pixels[i * img.channels];
            const double luma = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
            gray[i] = static_cast<float>(std::clamp(luma / 255.0, 0.0, 1.0));
        }
    }
    if (img.height != target_h || img.width != target_w)
        gray = resize_bilinear_plane(gray, img.height, img.width, target_h, target_w);
    for (float& v : gray) v = std::clamp(v, 0.0f, 1.0f);
    return Tensor(Shape{target_h, target_w, 1}, std::move(gray));
}

std::vector<std::vector<std::size_t>> plan_batches(std::size_t n, std::size_t batch_size,
                                                   std::optional<std::uint64_t> shuffle_seed) {
    if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle_seed) {
        Rng rng(*shuffle_seed);
        rng.shuffle(std::span<std::size_t>(order));
    }
    std::vector<std::vector<std::size_t>> plan;
    for (std::size_t start = 0; start < n; start += batch_size)
        plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                          order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
    return plan;
}

Batch load_batch(const DatasetIndex& ds, const std::vector<std::size_t>& indices, std::size_t h, std::size_t w) {
    const std::size_t b = indices.size();
    const std::size_t k = ds.classes.size();
    if (b == 0) throw std::invalid_argument("empty batch");
    if (k == 0) throw std::invalid_argument("dataset has no classes");
    Batch batch{Tensor(Shape{b, h, w, 1}), Tensor(Shape{b, k}), indices};
    const std::size_t per = h * w;
    for (std::size_t i = 0; i < b; ++i) {
        const Sample& s = ds.samples.at(indices[i]);
        if (s.label >= k) throw std::invalid_argument("sample label out of range: " + s.path.string());
        const Tensor img = load_grayscale_image(s.path, h, w);
        std::copy(img.data().begin(), img.data().end(), batch.x.raw() + i * per);
        batch.onehot[i * k + s.label] = 1.0f;
    }
    return batch;
}

BatchStream::BatchStream(const DatasetIndex& ds, std::size_t batch_size, std::optional<std::uint64_t> epoch_seed,
                         std::size_t h, std::size_t w)
    : ds_(ds), plan_(plan_batches(ds.size(), batch_size, epoch_seed)), h_(h), w_(w) {}

std::optional<Batch> BatchStream::next() {
    if (cursor_ >= plan_.size()) return std::nullopt;
    return load_batch(ds_, plan_[cursor_++], h_, w_);
}

}  // namespace scnn
