#include "scnn/scnn.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <string>

#include "scnn/data.hpp"
#include "scnn/errors.hpp"
#include "scnn/gradcam.hpp"
#include "scnn/metrics.hpp"
#include "scnn/model.hpp"
#include "scnn/training.hpp"

namespace fs = std::filesystem;

struct scnn_model {
    scnn::Model model;
};

struct scnn_explanation {
    struct Case {
        std::string image, truth, predicted, overlay;
    };
    std::vector<Case> cases;
    std::string grid;
};

struct scnn_report {
    scnn::ConfusionMatrix confusion;
    scnn::Report report;
    std::vector<std::string> classes;
};

namespace {

thread_local std::string g_last_error;

scnn_status fail(scnn_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

// Runs body, translating exceptions into status codes.
template <typename Body>
scnn_status guarded(Body&& body) {
    g_last_error.clear();
    try {
        return body();
    } catch (const scnn::FormatError& e) {
        return fail(SCNN_ERR_FORMAT, e.what());
    } catch (const scnn::IoError& e) {
        return fail(SCNN_ERR_IO, e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(SCNN_ERR_IO, e.what());
    } catch (const scnn::NumericError& e) {
        return fail(SCNN_ERR_NUMERIC, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(SCNN_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::out_of_range& e) {
        return fail(SCNN_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(SCNN_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(SCNN_ERR_INTERNAL, "unknown error");
    }
}

scnn_status copy_text(const std::string& text, char* buf, size_t cap, size_t* needed) {
    if (needed) *needed = text.size() + 1;
    if (!buf) return SCNN_OK;
    if (cap < text.size() + 1) return fail(SCNN_ERR_BUFFER_TOO_SMALL, "buffer too small");
    std::memcpy(buf, text.c_str(), text.size() + 1);
    return SCNN_OK;
}

scnn::SlimCnnConfig to_config(const scnn_arch* arch) {
    scnn::SlimCnnConfig c;
    if (!arch) return c;
    auto pick = [](uint32_t v, std::size_t fallback) { return v ? static_cast<std::size_t>(v) : fallback; };
    c.height = pick(arch->height, c.height);
    c.width = pick(arch->width, c.width);
    c.channels = pick(arch->channels, c.channels);
    for (int i = 0; i < 3; ++i) c.filters[i] = pick(arch->filters[i], c.filters[i]);
    c.kernel = pick(arch->kernel, c.kernel);
    c.conv_padding = arch->conv_padding;
    c.pool = pick(arch->pool, c.pool);
    c.dense_units = pick(arch->dense_units, c.dense_units);
    c.classes = pick(arch->classes, c.classes);
    return c;
}

fs::path subset_or_root(const fs::path& dir, const char* subset) {
    return fs::is_directory(dir / subset) ? dir / subset : dir;
}

#define SCNN_REQUIRE(cond, msg) \
    if (!(cond)) return fail(SCNN_ERR_INVALID_ARGUMENT, msg)

}  // namespace

extern "C" {

const char* scnn_last_error(void) { return g_last_error.c_str(); }

const char* scnn_status_string(scnn_status status) {
    switch (status) {
        case SCNN_OK: return "ok";
        case SCNN_ERR_INVALID_ARGUMENT: return "invalid argument";
        case SCNN_ERR_IO: return "i/o error";
        case SCNN_ERR_FORMAT: return "format error";
        case SCNN_ERR_NUMERIC: return "numeric error";
        case SCNN_ERR_BUFFER_TOO_SMALL: return "buffer too small";
        case SCNN_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* scnn_version(void) { return "1.0.0"; }

void scnn_arch_default(scnn_arch* arch) {
    if (!arch) return;
    const scnn::SlimCnnConfig c;
    arch->height = static_cast<uint32_t>(c.height);
    arch->width = static_cast<uint32_t>(c.width);
    arch->channels = static_cast<uint32_t>(c.channels);
    for (int i = 0; i < 3; ++i) arch->filters[i] = static_cast<uint32_t>(c.filters[i]);
    arch->kernel = static_cast<uint32_t>(c.kernel);
    arch->conv_padding = static_cast<uint32_t>(c.conv_padding);
    arch->pool = static_cast<uint32_t>(c.pool);
    arch->dense_units = static_cast<uint32_t>(c.dense_units);
    arch->classes = static_cast<uint32_t>(c.classes);
}

scnn_status scnn_model_build(const scnn_arch* arch, scnn_model** out) {
    SCNN_REQUIRE(out, "out is null");
    return guarded([&] {
        *out = new scnn_model{scnn::build_slim_cnn(to_config(arch))};
        return SCNN_OK;
    });
}

scnn_status scnn_model_load(const char* path, scnn_model** out) {
    SCNN_REQUIRE(path && out, "null argument");
    return guarded([&] {
        *out = new scnn_model{scnn::load_checkpoint(path)};
        return SCNN_OK;
    });
}

scnn_status scnn_model_save(const scnn_model* model, const char* path) {
    SCNN_REQUIRE(model && path, "null argument");
    return guarded([&] {
        scnn::save_checkpoint(model->model, path);
        return SCNN_OK;
    });
}

void scnn_model_free(scnn_model* model) { delete model; }

scnn_status scnn_model_init(scnn_model* model, uint64_t seed) {
    SCNN_REQUIRE(model, "model is null");
    return guarded([&] {
        scnn::init_weights(model->model, seed);
        return SCNN_OK;
    });
}

scnn_status scnn_model_param_count(const scnn_model* model, uint64_t* out) {
    SCNN_REQUIRE(model && out, "null argument");
    *out = model->model.param_count();
    return SCNN_OK;
}

scnn_status scnn_model_num_classes(const scnn_model* model, size_t* out) {
    SCNN_REQUIRE(model && out, "null argument");
    *out = model->model.num_classes();
    return SCNN_OK;
}

scnn_status scnn_model_input_shape(const scnn_model* model, size_t* h, size_t* w, size_t* c) {
    SCNN_REQUIRE(model, "model is null");
    const scnn::Shape& s = model->model.input_shape();
    if (h) *h = s[0];
    if (w) *w = s[1];
    if (c) *c = s[2];
    return SCNN_OK;
}

scnn_status scnn_model_summary(const scnn_model* model, char* buf, size_t cap, size_t* needed) {
    SCNN_REQUIRE(model, "model is null");
    return guarded([&] { return copy_text(scnn::summary(model->model), buf, cap, needed); });
}

scnn_status scnn_model_forward(const scnn_model* model, const float* batch, size_t n, float* logits) {
    SCNN_REQUIRE(model && batch && logits && n > 0, "null argument or empty batch");
    return guarded([&] {
        const scnn::Shape& in = model->model.input_shape();
        scnn::Tensor x(scnn::Shape{n, in[0], in[1], in[2]}, std::vector<float>(batch, batch + n * in.count()));
        const scnn::ForwardResult r = scnn::forward(model->model, x);
        std::memcpy(logits, r.logits.raw(), r.logits.size() * sizeof(float));
        return SCNN_OK;
    });
}

scnn_status scnn_model_predict(const scnn_model* model, const float* batch, size_t n, size_t* classes) {
    SCNN_REQUIRE(model && batch && classes && n > 0, "null argument or empty batch");
    return guarded([&] {
        const scnn::Shape& in = model->model.input_shape();
        scnn::Tensor x(scnn::Shape{n, in[0], in[1], in[2]}, std::vector<float>(batch, batch + n * in.count()));
        const auto p = scnn::predict(model->model, x);
        std::copy(p.begin(), p.end(), classes);
        return SCNN_OK;
    });
}

scnn_status scnn_gradcam(const scnn_model* model, const float* image, int32_t target_class, float* heatmap, size_t cap,
                         size_t* out_h, size_t* out_w) {
    SCNN_REQUIRE(model && image, "null argument");
    return guarded([&] {
        const scnn::Model& m = model->model;
        const scnn::Shape& in = m.input_shape();
        scnn::Tensor x(in, std::vector<float>(image, image + in.count()));
        std::optional<std::size_t> target;
        if (target_class >= 0) target = static_cast<std::size_t>(target_class);
        const scnn::GradcamResult r = scnn::gradcam(m, x, scnn::kLastConvName, target);
        if (out_h) *out_h = r.heatmap.height;
        if (out_w) *out_w = r.heatmap.width;
        if (!heatmap) return SCNN_OK;
        if (cap < r.heatmap.values.size()) return fail(SCNN_ERR_BUFFER_TOO_SMALL, "heatmap buffer too small");
        std::copy(r.heatmap.values.begin(), r.heatmap.values.end(), heatmap);
        return SCNN_OK;
    });
}

scnn_status scnn_split(const char* src, const char* dst, double train, double val, double test, uint64_t seed) {
    SCNN_REQUIRE(src && dst, "null path");
    return guarded([&] {
        scnn::split_folders(src, dst, scnn::SplitSpec{train, val, test, seed});
        return SCNN_OK;
    });
}

scnn_status scnn_split_table(const char* src, double train, double val, double test, char* table, size_t cap,
                             size_t* needed) {
    SCNN_REQUIRE(src, "null path");
    return guarded([&] {
        const scnn::SplitSpec spec{train, val, test};
        spec.validate();
        const auto classes = scnn::discover_classes(src);
        std::vector<std::size_t> sizes;
        for (const auto& c : classes) sizes.push_back(scnn::list_files(fs::path(src) / c).size());
        auto counts = scnn::split_counts(sizes, spec);
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i].name = classes[i];
        return copy_text(scnn::format_split_table(counts), table, cap, needed);
    });
}

scnn_status scnn_count_classes(const char* dir, size_t* out) {
    SCNN_REQUIRE(dir && out, "null argument");
    return guarded([&] {
        *out = scnn::discover_classes(subset_or_root(dir, "train")).size();
        return SCNN_OK;
    });
}

scnn_status scnn_train(scnn_model* model, const scnn_train_options* options) {
    SCNN_REQUIRE(model && options && options->data_dir, "null argument");
    SCNN_REQUIRE(options->batch_size > 0, "batch size must be at least 1");
    return guarded([&] {
        const fs::path root = options->data_dir;
        if (!fs::is_directory(root / "train") || !fs::is_directory(root / "val"))
            throw scnn::IoError("expected train/ and val/ under " + root.string());
        const scnn::DatasetIndex train = scnn::index_dataset(root / "train");
        const scnn::DatasetIndex val = scnn::index_dataset(root / "val");
        scnn::Model& m = model->model;
        if (train.classes.size() != m.num_classes())
            throw std::invalid_argument("model emits " + std::to_string(m.num_classes()) + " scores but " + root.string() +
                                        " has " + std::to_string(train.classes.size()) + " classes");
        m.class_names = train.classes;

        scnn::FitOptions fit;
        fit.epochs = options->epochs;
        fit.batch_size = options->batch_size;
        fit.seed = options->seed;
        if (options->learning_rate > 0.0f) fit.adam.lr = options->learning_rate;
        if (options->out_dir) fit.checkpoint_dir = options->out_dir;
        if (options->on_epoch) {
            fit.on_epoch = [cb = options->on_epoch, user = options->user](const scnn::EpochRecord& r) {
                const scnn_epoch e{r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc};
                cb(&e, user);
            };
        }
        scnn::fit(m, train, val, fit);
        return SCNN_OK;
    });
}

scnn_status scnn_evaluate(const scnn_model* model, const char* data_dir, scnn_report** out) {
    SCNN_REQUIRE(model && data_dir && out, "null argument");
    return guarded([&] {
        const scnn::DatasetIndex ds = scnn::index_dataset(subset_or_root(data_dir, "test"));
        const scnn::Model& m = model->model;
        if (!m.class_names.empty() && m.class_names != ds.classes)
            throw std::invalid_argument("test classes do not match the classes the model was trained on");
        const scnn::Evaluation ev = scnn::evaluate(m, ds);
        scnn::ConfusionMatrix cm = scnn::confusion_matrix(ev.truth, ev.predicted, m.num_classes());
        scnn::Report r = scnn::classification_report(cm, ds.classes);
        *out = new scnn_report{std::move(cm), std::move(r), ds.classes};
        return SCNN_OK;
    });
}

scnn_status scnn_report_text(const scnn_report* report, char* buf, size_t cap, size_t* needed) {
    SCNN_REQUIRE(report, "report is null");
    return guarded([&] {
        std::string text = "Confusion matrix\n" + scnn::format_confusion(report->confusion, report->classes) +
                           "\nClassification report\n" + scnn::format_report(report->report);
        return copy_text(text, buf, cap, needed);
    });
}

scnn_status scnn_report_accuracy(const scnn_report* report, double* out) {
    SCNN_REQUIRE(report && out, "null argument");
    *out = report->report.accuracy;
    return SCNN_OK;
}

scnn_status scnn_report_confusion(const scnn_report* report, uint64_t* cells, size_t cap, size_t* k) {
    SCNN_REQUIRE(report, "report is null");
    const std::size_t n = report->confusion.classes();
    if (k) *k = n;
    if (!cells) return SCNN_OK;
    if (cap < n * n) return fail(SCNN_ERR_BUFFER_TOO_SMALL, "confusion buffer too small");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cells[i * n + j] = report->confusion.at(i, j);
    return SCNN_OK;
}

scnn_status scnn_report_write_csv(const scnn_report* report, const char* path) {
    SCNN_REQUIRE(report && path, "null argument");
    return guarded([&] {
        scnn::write_report_csv(report->report, path);
        return SCNN_OK;
    });
}

void scnn_report_free(scnn_report* report) { delete report; }

scnn_status scnn_explain(const scnn_model* model, const scnn_explain_options* options, scnn_explanation** out) {
    SCNN_REQUIRE(model && options && options->out_dir && out, "null argument");
    SCNN_REQUIRE(options->case_count == 0 || options->cases, "case list is null");
    return guarded([&] {
        scnn::ExplainOptions ex;
        for (std::size_t i = 0; i < options->case_count; ++i) ex.cases.emplace_back(options->cases[i]);
        if (options->data_dir) ex.data_dir = options->data_dir;
        ex.m = options->m;
        ex.seed = options->seed;
        ex.alpha = options->alpha;
        if (options->target_class >= 0) ex.target_class = static_cast<std::size_t>(options->target_class);
        const scnn::CaseGrid grid = scnn::render_cases(model->model, ex);
        const auto written = scnn::write_explanations(grid, options->out_dir);

        auto e = std::make_unique<scnn_explanation>();
        for (std::size_t i = 0; i < grid.cases.size(); ++i) {
            const auto& c = grid.cases[i];
            e->cases.push_back({c.path.string(), c.truth, c.predicted_name, written[i].string()});
        }
        e->grid = written.back().string();
        *out = e.release();
        return SCNN_OK;
    });
}

size_t scnn_explanation_count(const scnn_explanation* e) { return e ? e->cases.size() : 0; }

scnn_status scnn_explanation_case(const scnn_explanation* e, size_t i, const char** image, const char** truth,
                                  const char** predicted, const char** overlay_png) {
    SCNN_REQUIRE(e, "explanation is null");
    SCNN_REQUIRE(i < e->cases.size(), "case index out of range");
    const auto& c = e->cases[i];
    if (image) *image = c.image.c_str();
    if (truth) *truth = c.truth.c_str();
    if (predicted) *predicted = c.predicted.c_str();
    if (overlay_png) *overlay_png = c.overlay.c_str();
    return SCNN_OK;
}

const char* scnn_explanation_grid_png(const scnn_explanation* e) { return e ? e->grid.c_str() : ""; }

void scnn_explanation_free(scnn_explanation* e) { delete e; }

}  // extern "C"
