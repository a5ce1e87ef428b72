#include "scnn/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "scnn/errors.hpp"

namespace scnn {

ConfusionMatrix::ConfusionMatrix(std::size_t k) : k_(k), cells_(k * k, 0) {
    if (k == 0) throw std::invalid_argument("confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto c : cells_) t += c;
    return t;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < k_; ++i) t += at(i, i);
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::uint64_t t = 0;
    for (std::size_t j = 0; j < k_; ++j) t += at(truth, j);
    return t;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < k_; ++i) t += at(i, pred);
    return t;
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t k) {
    if (truth.size() != pred.size()) throw std::invalid_argument("confusion_matrix: truth and prediction lengths differ");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= k || pred[i] >= k) throw std::out_of_range("confusion_matrix: class index out of range");
        ++cm.at(truth[i], pred[i]);
    }
    return cm;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Report classification_report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
    const std::size_t k = cm.classes();
    if (class_names.size() != k) throw std::invalid_argument("classification_report: class name count mismatch");
    Report r;
    r.total = cm.total();
    if (r.total == 0) throw std::invalid_argument("classification_report: no samples");
    r.correct = cm.trace();
    r.accuracy = ratio(r.correct, r.total);

    for (std::size_t c = 0; c < k; ++c) {
        ClassMetrics m;
        m.name = class_names[c];
        m.support = cm.row_sum(c);
        m.precision = ratio(cm.at(c, c), cm.col_sum(c));
        m.recall = ratio(cm.at(c, c), m.support);
        m.f1 = (m.precision + m.recall) == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
        r.macro.precision += m.precision;
        r.macro.recall += m.recall;
        r.macro.f1 += m.f1;
        const double w = static_cast<double>(m.support);
        r.weighted.precision += w * m.precision;
        r.weighted.recall += w * m.recall;
        r.weighted.f1 += w * m.f1;
        r.classes.push_back(std::move(m));
    }
    const double kd = static_cast<double>(k), n = static_cast<double>(r.total);
    r.macro = {r.macro.precision / kd, r.macro.recall / kd, r.macro.f1 / kd};
    r.weighted = {r.weighted.precision / n, r.weighted.recall / n, r.weighted.f1 / n};
    return r;
}

std::string format_report(const Report& r) {
    std::size_t label_w = 12;
    for (const auto& c : r.classes) label_w = std::max(label_w, c.name.size());
    label_w += 2;

    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << std::setw(static_cast<int>(label_w)) << "" << std::setw(11) << "precision" << std::setw(10) << "recall"
       << std::setw(10) << "f1-score" << std::setw(10) << "support" << "\n\n";
    for (const auto& c : r.classes)
        os << std::setw(static_cast<int>(label_w)) << c.name << std::setw(11) << c.precision << std::setw(10) << c.recall
           << std::setw(10) << c.f1 << std::setw(10) << c.support << '\n';
    os << '\n';
    os << std::setw(static_cast<int>(label_w)) << "accuracy" << std::setw(11) << "" << std::setw(10) << ""
       << std::setw(10) << r.accuracy << std::setw(10) << r.total << '\n';
    auto avg = [&](const char* label, const AverageMetrics& a) {
        os << std::setw(static_cast<int>(label_w)) << label << std::setw(11) << a.precision << std::setw(10) << a.recall
           << std::setw(10) << a.f1 << std::setw(10) << r.total << '\n';
    };
    avg("macro avg", r.macro);
    avg("weighted avg", r.weighted);
    os << '\n' << std::setprecision(4) << "accuracy = " << r.correct << '/' << r.total << " = " << r.accuracy << '\n';
    return os.str();
}

std::string format_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
    const std::size_t k = cm.classes();
    std::size_t label_w = 10;
    for (const auto& n : class_names) label_w = std::max(label_w, n.size());
    label_w += 2;
    std::size_t cell_w = 8;
    for (const auto& n : class_names) cell_w = std::max(cell_w, n.size() + 2);

    std::ostringstream os;
    os << "true \\ predicted\n" << std::setw(static_cast<int>(label_w)) << "";
    for (std::size_t j = 0; j < k; ++j) os << std::setw(static_cast<int>(cell_w)) << (j < class_names.size() ? class_names[j] : std::to_string(j));
    os << '\n';
    for (std::size_t i = 0; i < k; ++i) {
        os << std::setw(static_cast<int>(label_w)) << (i < class_names.size() ? class_names[i] : std::to_string(i));
        for (std::size_t j = 0; j < k; ++j) os << std::setw(static_cast<int>(cell_w)) << cm.at(i, j);
        os << '\n';
    }
    return os.str();
}

std::string report_csv(const Report& r) {
    std::ostringstream os;
    char buf[256];
    os << "label,precision,recall,f1,support\n";
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    };
    for (const auto& c : r.classes) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%llu\n", c.precision, c.recall, c.f1,
                      static_cast<unsigned long long>(c.support));
        os << quote(c.name) << buf;
    }
    std::snprintf(buf, sizeof buf, "accuracy,,,%.17g,%llu\n", r.accuracy, static_cast<unsigned long long>(r.total));
    os << buf;
    std::snprintf(buf, sizeof buf, "macro avg,%.17g,%.17g,%.17g,%llu\n", r.macro.precision, r.macro.recall, r.macro.f1,
                  static_cast<unsigned long long>(r.total));
    os << buf;
    std::snprintf(buf, sizeof buf, "weighted avg,%.17g,%.17g,%.17g,%llu\n", r.weighted.precision, r.weighted.recall,
                  r.weighted.f1, static_cast<unsigned long long>(r.total));
    os << buf;
    return os.str();
}

void write_report_csv(const Report& r, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << report_csv(r);
}

}  // namespace scnn
