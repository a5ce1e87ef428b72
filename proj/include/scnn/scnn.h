/*
 * C interface to the slim CNN engine: model building, checkpoints, dataset
 * splitting, training, evaluation and Grad-CAM explanations.
 *
 * Every fallible call returns an scnn_status. On failure a message for the
 * calling thread is available from scnn_last_error() until the next call.
 * Text results use the two-call pattern: pass buf = NULL / cap = 0 to learn
 * the required size (including the terminating NUL) through *needed.
 */
#ifndef SCNN_H
#define SCNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SCNN_BUILDING_LIBRARY)
#    define SCNN_API __declspec(dllexport)
#  else
#    define SCNN_API __declspec(dllimport)
#  endif
#else
#  define SCNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum scnn_status {
    SCNN_OK = 0,
    SCNN_ERR_INVALID_ARGUMENT = 1,
    SCNN_ERR_IO = 2,
    SCNN_ERR_FORMAT = 3,
    SCNN_ERR_NUMERIC = 4,
    SCNN_ERR_BUFFER_TOO_SMALL = 5,
    SCNN_ERR_INTERNAL = 6
} scnn_status;

typedef struct scnn_model scnn_model;
typedef struct scnn_report scnn_report;
typedef struct scnn_explanation scnn_explanation;

/* Architecture of the slim CNN family. Zero-initialised fields take the
 * defaults: 128x128x1 input, filters 128/256/256, 3x3 kernels, no padding,
 * 2x2 pooling, 256 hidden units, 4 classes. */
typedef struct scnn_arch {
    uint32_t height, width, channels;
    uint32_t filters[3];
    uint32_t kernel;
    uint32_t conv_padding;
    uint32_t pool;
    uint32_t dense_units;
    uint32_t classes;
} scnn_arch;

typedef struct scnn_epoch {
    size_t epoch;
    double train_loss, train_acc, val_loss, val_acc;
} scnn_epoch;

typedef void (*scnn_epoch_callback)(const scnn_epoch* record, void* user);

typedef struct scnn_train_options {
    const char* data_dir;   /* split root containing train/ and val/ */
    const char* out_dir;    /* epoch_<n>.scnn + history.csv */
    size_t epochs;
    size_t batch_size;
    uint64_t seed;
    float learning_rate;
    scnn_epoch_callback on_epoch; /* may be NULL */
    void* user;
} scnn_train_options;

typedef struct scnn_explain_options {
    const char* const* cases; /* may be NULL when sampling from data_dir */
    size_t case_count;
    const char* data_dir;     /* split root or class-folder root; may be NULL when cases given */
    size_t m;
    uint64_t seed;
    double alpha;
    int32_t target_class;     /* -1 = top predicted class */
    const char* out_dir;
} scnn_explain_options;

SCNN_API const char* scnn_last_error(void);
SCNN_API const char* scnn_status_string(scnn_status status);
SCNN_API const char* scnn_version(void);

/* Fills *arch with the default slim CNN configuration. */
SCNN_API void scnn_arch_default(scnn_arch* arch);

SCNN_API scnn_status scnn_model_build(const scnn_arch* arch, scnn_model** out);
SCNN_API scnn_status scnn_model_load(const char* path, scnn_model** out);
SCNN_API scnn_status scnn_model_save(const scnn_model* model, const char* path);
SCNN_API void scnn_model_free(scnn_model* model);

SCNN_API scnn_status scnn_model_init(scnn_model* model, uint64_t seed);
SCNN_API scnn_status scnn_model_param_count(const scnn_model* model, uint64_t* out);
SCNN_API scnn_status scnn_model_num_classes(const scnn_model* model, size_t* out);
SCNN_API scnn_status scnn_model_input_shape(const scnn_model* model, size_t* h, size_t* w, size_t* c);
SCNN_API scnn_status scnn_model_summary(const scnn_model* model, char* buf, size_t cap, size_t* needed);

/* batch: n * h * w * c floats (row-major NHWC). logits: n * classes floats. */
SCNN_API scnn_status scnn_model_forward(const scnn_model* model, const float* batch, size_t n, float* logits);
SCNN_API scnn_status scnn_model_predict(const scnn_model* model, const float* batch, size_t n, size_t* classes);

/* Grad-CAM heatmap of one image. heatmap receives *out_h * *out_w floats;
 * pass heatmap = NULL to query the size. target_class = -1 uses the top class. */
SCNN_API scnn_status scnn_gradcam(const scnn_model* model, const float* image, int32_t target_class, float* heatmap,
                                  size_t cap, size_t* out_h, size_t* out_w);

/* Copies the files of src/<class>/ into dst/{train,val,test}/<class>/. Fails
 * without copying anything if any destination file already exists. */
SCNN_API scnn_status scnn_split(const char* src, const char* dst, double train, double val, double test, uint64_t seed);
/* Per-class count table that scnn_split would produce for src. Reads only. */
SCNN_API scnn_status scnn_split_table(const char* src, double train, double val, double test, char* table, size_t cap,
                                      size_t* needed);

/* Number of class folders under dir (its train/ subset when present). */
SCNN_API scnn_status scnn_count_classes(const char* dir, size_t* out);

/* Fits from the model's current weights (see scnn_model_init). The model's
 * output size must equal the class count; class names are taken from the data. */
SCNN_API scnn_status scnn_train(scnn_model* model, const scnn_train_options* options);

/* Evaluates on data_dir/test (or data_dir itself when it has no test/). */
SCNN_API scnn_status scnn_evaluate(const scnn_model* model, const char* data_dir, scnn_report** out);
SCNN_API scnn_status scnn_report_text(const scnn_report* report, char* buf, size_t cap, size_t* needed);
SCNN_API scnn_status scnn_report_accuracy(const scnn_report* report, double* out);
SCNN_API scnn_status scnn_report_confusion(const scnn_report* report, uint64_t* cells, size_t cap, size_t* k);
SCNN_API scnn_status scnn_report_write_csv(const scnn_report* report, const char* path);
SCNN_API void scnn_report_free(scnn_report* report);

/* Renders <stem>_gradcam.png per case and cases_grid.png into out_dir. */
SCNN_API scnn_status scnn_explain(const scnn_model* model, const scnn_explain_options* options, scnn_explanation** out);
SCNN_API size_t scnn_explanation_count(const scnn_explanation* e);
/* Strings stay valid until scnn_explanation_free. Any out pointer may be NULL. */
SCNN_API scnn_status scnn_explanation_case(const scnn_explanation* e, size_t i, const char** image, const char** truth,
                                           const char** predicted, const char** overlay_png);
SCNN_API const char* scnn_explanation_grid_png(const scnn_explanation* e);
SCNN_API void scnn_explanation_free(scnn_explanation* e);

#ifdef __cplusplus
}
#endif

#endif /* SCNN_H */
