// scnn: split, summary, train, evaluate and explain on top of the C API.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "scnn/scnn.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError {
    std::string message;
};

struct RuntimeError {
    scnn_status status;
    std::string message;
};

void check(scnn_status s, const char* what) {
    if (s != SCNN_OK) throw RuntimeError{s, std::string(what) + ": " + scnn_last_error()};
}

// Calls fn(buf, cap, needed) twice: once for the size, once for the text.
template <typename Fn>
std::string fetch_text(Fn&& fn, const char* what) {
    size_t needed = 0;
    check(fn(nullptr, 0, &needed), what);
    std::string text(needed, '\0');
    check(fn(text.data(), text.size(), &needed), what);
    text.resize(needed ? needed - 1 : 0);
    return text;
}

struct ModelHandle {
    scnn_model* ptr = nullptr;
    ModelHandle() = default;
    ModelHandle(const ModelHandle&) = delete;
    ModelHandle& operator=(const ModelHandle&) = delete;
    ~ModelHandle() { scnn_model_free(ptr); }
};

struct ArchFlags {
    unsigned image_size = 0;
    std::vector<unsigned> filters;
    unsigned dense = 0;
    unsigned padding = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--image-size", image_size, "Square input size (default 128)")->check(CLI::PositiveNumber);
        cmd->add_option("--filters", filters, "Filters of the three conv layers (default 128 256 256)")
            ->expected(3)
            ->check(CLI::PositiveNumber);
        cmd->add_option("--dense", dense, "Hidden dense units (default 256)")->check(CLI::PositiveNumber);
        cmd->add_option("--padding", padding, "Zero padding of every conv layer (default 0)");
    }

    scnn_arch arch(size_t classes) const {
        scnn_arch a{};
        scnn_arch_default(&a);
        if (image_size) a.height = a.width = image_size;
        for (size_t i = 0; i < filters.size() && i < 3; ++i) a.filters[i] = filters[i];
        if (dense) a.dense_units = dense;
        a.conv_padding = padding;
        if (classes) a.classes = static_cast<uint32_t>(classes);
        return a;
    }
};

int cmd_split(const std::string& src, const std::string& dst, const std::vector<double>& ratios, uint64_t seed) {
    if (ratios.size() != 3) throw UsageError{"--ratios takes exactly three values"};
    for (double r : ratios)
        if (!(r >= 0.0 && r <= 1.0)) throw UsageError{"--ratios values must lie in [0, 1]"};
    if (std::fabs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-6) throw UsageError{"--ratios must sum to 1"};
    check(scnn_split(src.c_str(), dst.c_str(), ratios[0], ratios[1], ratios[2], seed), "split");
    const std::string table = fetch_text(
        [&](char* b, size_t c, size_t* n) {
            return scnn_split_table(src.c_str(), ratios[0], ratios[1], ratios[2], b, c, n);
        },
        "split");
    std::fputs(table.c_str(), stdout);
    return 0;
}

int cmd_summary(const ArchFlags& flags, unsigned classes) {
    const scnn_arch a = flags.arch(classes);
    ModelHandle m;
    check(scnn_model_build(&a, &m.ptr), "summary");
    const std::string text =
        fetch_text([&](char* b, size_t c, size_t* n) { return scnn_model_summary(m.ptr, b, c, n); }, "summary");
    std::fputs(text.c_str(), stdout);
    return 0;
}

void print_epoch(const scnn_epoch* e, void*) {
    std::printf("epoch %zu: train_loss=%.4f train_acc=%.4f val_loss=%.4f val_acc=%.4f\n", e->epoch, e->train_loss,
                e->train_acc, e->val_loss, e->val_acc);
    std::fflush(stdout);
}

int cmd_train(const std::string& data, const std::string& out, size_t epochs, size_t batch, uint64_t seed, float lr,
              const ArchFlags& flags) {
    size_t classes = 0;
    check(scnn_count_classes(data.c_str(), &classes), "train");
    const scnn_arch a = flags.arch(classes);
    ModelHandle m;
    check(scnn_model_build(&a, &m.ptr), "train");
    check(scnn_model_init(m.ptr, seed), "train");

    scnn_train_options o{};
    o.data_dir = data.c_str();
    o.out_dir = out.c_str();
    o.epochs = epochs;
    o.batch_size = batch;
    o.seed = seed;
    o.learning_rate = lr;
    o.on_epoch = print_epoch;
    check(scnn_train(m.ptr, &o), "train");
    std::printf("wrote %s/history.csv\n", out.c_str());
    return 0;
}

int cmd_evaluate(const std::string& data, const std::string& ckpt, const std::string& csv) {
    ModelHandle m;
    check(scnn_model_load(ckpt.c_str(), &m.ptr), "evaluate");
    scnn_report* report = nullptr;
    check(scnn_evaluate(m.ptr, data.c_str(), &report), "evaluate");
    std::string text;
    scnn_status s = SCNN_OK;
    try {
        text = fetch_text([&](char* b, size_t c, size_t* n) { return scnn_report_text(report, b, c, n); }, "evaluate");
        if (!csv.empty()) s = scnn_report_write_csv(report, csv.c_str());
    } catch (...) {
        scnn_report_free(report);
        throw;
    }
    scnn_report_free(report);
    check(s, "evaluate");
    std::fputs(text.c_str(), stdout);
    return 0;
}

int cmd_explain(const std::string& ckpt, const std::vector<std::string>& cases, const std::string& data, size_t m_cases,
                double alpha, uint64_t seed, int target, const std::string& out) {
    if (cases.empty() && data.empty()) throw UsageError{"explain needs --cases or --data"};
    if (!(alpha >= 0.0)) throw UsageError{"--alpha must be non-negative"};
    ModelHandle m;
    check(scnn_model_load(ckpt.c_str(), &m.ptr), "explain");
    std::vector<const char*> case_ptrs;
    for (const auto& c : cases) case_ptrs.push_back(c.c_str());

    scnn_explain_options o{};
    o.cases = case_ptrs.empty() ? nullptr : case_ptrs.data();
    o.case_count = case_ptrs.size();
    o.data_dir = data.empty() ? nullptr : data.c_str();
    o.m = m_cases;
    o.seed = seed;
    o.alpha = alpha;
    o.target_class = target;
    o.out_dir = out.c_str();
    scnn_explanation* e = nullptr;
    check(scnn_explain(m.ptr, &o, &e), "explain");
    for (size_t i = 0; i < scnn_explanation_count(e); ++i) {
        const char *image = nullptr, *truth = nullptr, *predicted = nullptr, *overlay = nullptr;
        scnn_explanation_case(e, i, &image, &truth, &predicted, &overlay);
        std::printf("%s  predicted: %s  true: %s  -> %s\n", image, predicted, truth, overlay);
    }
    std::printf("wrote %s\n", scnn_explanation_grid_png(e));
    scnn_explanation_free(e);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Slim CNN engine: dataset split, training, evaluation and Grad-CAM explanations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(scnn_version()));

    uint64_t seed = 888;

    auto* split = app.add_subcommand("split", "Split class folders into train/val/test");
    std::string src, dst;
    std::vector<double> ratios{0.8, 0.1, 0.1};
    split->add_option("--src", src, "Folder of class directories")->required();
    split->add_option("--dst", dst, "Output split root")->required();
    split->add_option("--seed", seed, "Shuffle seed");
    split->add_option("--ratios", ratios, "Train, validation and test fractions")->expected(3);

    auto* summary = app.add_subcommand("summary", "Print the layer table of the slim CNN");
    ArchFlags summary_arch;
    unsigned summary_classes = 0;
    summary_arch.attach(summary);
    summary->add_option("--classes", summary_classes, "Output classes (default 4)")->check(CLI::PositiveNumber);

    auto* train = app.add_subcommand("train", "Train on <data>/train with <data>/val for validation");
    std::string data, out;
    size_t epochs = 50, batch = 32;
    float lr = 0.001f;
    ArchFlags train_arch;
    train->add_option("--data", data, "Split root with train/ and val/")->required();
    train->add_option("--epochs", epochs, "Training epochs");
    train->add_option("--batch", batch, "Batch size")->check(CLI::PositiveNumber);
    train->add_option("--seed", seed, "Seed for initialisation and shuffling");
    train->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    train->add_option("--out", out, "Checkpoint directory")->required();
    train_arch.attach(train);

    auto* evaluate = app.add_subcommand("evaluate", "Confusion matrix and classification report on the test set");
    std::string ckpt, csv;
    evaluate->add_option("--data", data, "Split root (its test/ is used) or folder of class directories")->required();
    evaluate->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    evaluate->add_option("--csv", csv, "Also write the report as CSV");

    auto* explain = app.add_subcommand("explain", "Render Grad-CAM heatmaps");
    std::vector<std::string> cases;
    size_t m_cases = 4;
    double alpha = 0.4;
    int target = -1;
    explain->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    auto* cases_opt = explain->add_option("--cases", cases, "Images to explain");
    auto* data_opt = explain->add_option("--data", data, "Split root or folder of class directories to sample from");
    cases_opt->excludes(data_opt);
    explain->add_option("--m", m_cases, "Number of sampled cases")->check(CLI::PositiveNumber);
    explain->add_option("--alpha", alpha, "Heatmap weight in the overlay");
    explain->add_option("--seed", seed, "Sampling seed");
    explain->add_option("--class", target, "Explain this class index instead of the prediction");
    explain->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n\n%s", e.what(), app.help().c_str());
        return kExitUsage;
    }

    try {
        if (split->parsed()) return cmd_split(src, dst, ratios, seed);
        if (summary->parsed()) return cmd_summary(summary_arch, summary_classes);
        if (train->parsed()) return cmd_train(data, out, epochs, batch, seed, lr, train_arch);
        if (evaluate->parsed()) return cmd_evaluate(data, ckpt, csv);
        if (explain->parsed()) return cmd_explain(ckpt, cases, data, m_cases, alpha, seed, target, out);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n\n%s", e.message.c_str(), app.help().c_str());
        return kExitUsage;
    } catch (const RuntimeError& e) {
        std::fprintf(stderr, "error (%s) %s\n", scnn_status_string(e.status), e.message.c_str());
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
