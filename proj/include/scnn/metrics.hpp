#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace scnn {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t k);

    std::size_t classes() const { return k_; }
    std::uint64_t& at(std::size_t truth, std::size_t pred) { return cells_.at(truth * k_ + pred); }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return cells_.at(truth * k_ + pred); }

    std::uint64_t total() const;
    std::uint64_t trace() const;
    std::uint64_t row_sum(std::size_t truth) const;
    std::uint64_t col_sum(std::size_t pred) const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t k_;
    std::vector<std::uint64_t> cells_;
};

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t k);

struct ClassMetrics {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

struct AverageMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct Report {
    std::vector<ClassMetrics> classes;
    double accuracy = 0.0;
    std::uint64_t correct = 0;
    std::uint64_t total = 0;
    AverageMetrics macro;
    AverageMetrics weighted;
};

// Rates with a zero denominator are reported as 0. Throws on an empty matrix.
Report classification_report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);

// Aligned text with 2-decimal rates, then an exact accuracy line (4 decimals).
std::string format_report(const Report& r);
std::string format_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);
std::string report_csv(const Report& r);
void write_report_csv(const Report& r, const std::filesystem::path& path);

}  // namespace scnn
