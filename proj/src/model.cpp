#include "scnn/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "scnn/errors.hpp"

namespace scnn {

std::string_view kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Input: return "input";
        case LayerKind::Conv2D: return "conv2d";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Dense: return "dense";
    }
    return "?";
}

namespace {

std::string_view type_label(LayerKind kind) {
    switch (kind) {
        case LayerKind::Input: return "InputLayer";
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::MaxPool: return "MaxPooling2D";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::Dense: return "Dense";
    }
    return "?";
}

std::string_view default_base(LayerKind kind) {
    switch (kind) {
        case LayerKind::Input: return "input";
        case LayerKind::Conv2D: return "conv2d";
        case LayerKind::MaxPool: return "max_pooling2d";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Dense: return "dense";
    }
    return "layer";
}

bool valid_layer_name(std::string_view name) {
    return !name.empty() && std::none_of(name.begin(), name.end(), [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r';
    });
}

}  // namespace

std::uint64_t LayerNode::param_count() const {
    switch (kind) {
        case LayerKind::Conv2D: {
            const auto& p = conv();
            return conv2d_params(p.kh(), p.kw(), p.in_channels(), p.out_channels());
        }
        case LayerKind::Dense: return dense_params(dense().inputs(), dense().outputs());
        default: return 0;
    }
}

Model::Model(Shape input_shape) {
    if (input_shape.rank() != 3) throw std::invalid_argument("model input must be (h, w, c), got " + input_shape.str());
    LayerNode in;
    in.kind = LayerKind::Input;
    in.name = "input";
    in.out_shape = std::move(input_shape);
    layers_.push_back(std::move(in));
}

std::string Model::unique_name(std::string requested, std::string_view base) {
    if (!requested.empty()) {
        if (!valid_layer_name(requested)) throw std::invalid_argument("layer names must be non-empty without whitespace");
        if (find(requested)) throw std::invalid_argument("duplicate layer name \"" + requested + "\"");
        return requested;
    }
    std::string candidate(base);
    for (std::size_t n = 1; find(candidate); ++n) candidate = std::string(base) + "_" + std::to_string(n);
    return candidate;
}

Extent2 Model::last_spatial(const char* what) const {
    const Shape& s = layers_.back().out_shape;
    if (s.rank() != 3) throw std::invalid_argument(std::string(what) + " needs an (h, w, c) predecessor, got " + s.str());
    return {s[0], s[1]};
}

Model& Model::conv2d(std::size_t filters, Extent2 kernel, bool relu, std::string name, Extent2 stride, Extent2 padding) {
    const Extent2 in = last_spatial("conv2d");
    const std::size_t cin = layers_.back().out_shape[2];
    const Extent2 out = conv2d_out_shape(in, kernel, padding, stride);
    LayerNode node;
    node.kind = LayerKind::Conv2D;
    node.name = unique_name(std::move(name), default_base(LayerKind::Conv2D));
    node.relu = relu;
    node.params = ConvParams::zeros(kernel.h, kernel.w, cin, filters, stride, padding);
    node.out_shape = Shape{out.h, out.w, filters};
    layers_.push_back(std::move(node));
    return *this;
}

Model& Model::maxpool(PoolParams pool, std::string name) {
    const Extent2 in = last_spatial("maxpool");
    const Extent2 out = maxpool_out_shape(in, pool);
    LayerNode node;
    node.kind = LayerKind::MaxPool;
    node.name = unique_name(std::move(name), default_base(LayerKind::MaxPool));
    node.params = pool;
    node.out_shape = Shape{out.h, out.w, layers_.back().out_shape[2]};
    layers_.push_back(std::move(node));
    return *this;
}

Model& Model::flatten(std::string name) {
    LayerNode node;
    node.kind = LayerKind::Flatten;
    node.name = unique_name(std::move(name), default_base(LayerKind::Flatten));
    node.out_shape = Shape{layers_.back().out_shape.count()};
    layers_.push_back(std::move(node));
    return *this;
}

Model& Model::dense(std::size_t units, bool relu, std::string name) {
    const Shape& prev = layers_.back().out_shape;
    if (prev.rank() != 1) throw std::invalid_argument("dense needs a flat predecessor, got " + prev.str());
    LayerNode node;
    node.kind = LayerKind::Dense;
    node.name = unique_name(std::move(name), default_base(LayerKind::Dense));
    node.relu = relu;
    node.params = DenseParams::zeros(prev[0], units);
    node.out_shape = Shape{units};
    layers_.push_back(std::move(node));
    return *this;
}

std::optional<std::size_t> Model::find(std::string_view name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].name == name) return i;
    return std::nullopt;
}

std::size_t Model::index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw std::invalid_argument("unknown layer \"" + std::string(name) + "\"");
}

std::uint64_t Model::param_count() const {
    std::uint64_t total = 0;
    for (const auto& l : layers_) total += l.param_count();
    return total;
}

std::vector<Tensor*> Model::parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers_) {
        if (l.kind == LayerKind::Conv2D) {
            out.push_back(&l.conv().kernels);
            out.push_back(&l.conv().bias);
        } else if (l.kind == LayerKind::Dense) {
            out.push_back(&l.dense().weights);
            out.push_back(&l.dense().bias);
        }
    }
    return out;
}

std::vector<const Tensor*> Model::parameters() const {
    std::vector<const Tensor*> out;
    for (auto* t : const_cast<Model*>(this)->parameters()) out.push_back(t);
    return out;
}

Model build_slim_cnn(const SlimCnnConfig& c) {
    const Extent2 k{c.kernel, c.kernel};
    const Extent2 pad{c.conv_padding, c.conv_padding};
    Model m(Shape{c.height, c.width, c.channels});
    m.conv2d(c.filters[0], k, true, {}, {1, 1}, pad)
        .maxpool(PoolParams::square(c.pool))
        .conv2d(c.filters[1], k, true, {}, {1, 1}, pad)
        .maxpool(PoolParams::square(c.pool))
        .conv2d(c.filters[2], k, true, std::string(kLastConvName), {1, 1}, pad)
        .flatten()
        .dense(c.dense_units, true)
        .dense(c.classes, false, std::string(kOutputLayerName));
    return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

Tensor run_layer(const LayerNode& node, const Tensor& in, std::vector<std::uint32_t>* argmax_out) {
    switch (node.kind) {
        case LayerKind::Input: return in;
        case LayerKind::Conv2D: {
            Tensor y = conv2d_forward(in, node.conv());
            if (node.relu) relu_inplace(y);
            return y;
        }
        case LayerKind::MaxPool: {
            PoolResult r = maxpool_forward(in, node.pool());
            if (argmax_out) *argmax_out = std::move(r.argmax);
            return std::move(r.y);
        }
        case LayerKind::Flatten: return flatten(in);
        case LayerKind::Dense: {
            Tensor y = dense_forward(in, node.dense());
            if (node.relu) relu_inplace(y);
            return y;
        }
    }
    throw std::logic_error("unhandled layer kind");
}

void require_sample(const Model& m, const Tensor& sample) {
    if (!(sample.shape() == m.input_shape()))
        throw std::invalid_argument("sample shape " + sample.shape().str() + " does not match model input " +
                                    m.input_shape().str());
}

}  // namespace

Trace forward_trace(const Model& m, const Tensor& sample) {
    require_sample(m, sample);
    Trace t;
    t.outputs.reserve(m.size());
    t.argmax.resize(m.size());
    t.outputs.push_back(sample);
    for (std::size_t i = 1; i < m.size(); ++i) t.outputs.push_back(run_layer(m.layer(i), t.outputs.back(), &t.argmax[i]));
    return t;
}

Tensor forward_from(const Model& m, std::size_t first_layer, const Tensor& input) {
    if (first_layer == 0 || first_layer >= m.size()) throw std::out_of_range("forward_from: bad layer index");
    Tensor cur = input;
    for (std::size_t i = first_layer; i < m.size(); ++i) cur = run_layer(m.layer(i), cur, nullptr);
    return cur;
}

ForwardResult forward(const Model& m, const Tensor& batch, std::optional<std::string_view> capture) {
    const Shape& in = m.input_shape();
    if (batch.shape().rank() != 4 || batch.shape()[1] != in[0] || batch.shape()[2] != in[1] || batch.shape()[3] != in[2])
        throw std::invalid_argument("batch shape " + batch.shape().str() + " does not match model input " + in.str());
    std::optional<std::size_t> cap_idx;
    if (capture) cap_idx = m.index_of(*capture);

    const std::size_t b = batch.shape()[0];
    const std::size_t k = m.num_classes();
    ForwardResult r{Tensor(Shape{b, k}), std::nullopt};
    if (cap_idx) {
        std::vector<std::size_t> dims{b};
        for (std::size_t d : m.layer(*cap_idx).out_shape.dims()) dims.push_back(d);
        r.captured = Tensor(Shape(dims));
    }

    const std::size_t per = in.count();
    for (std::size_t s = 0; s < b; ++s) {
        Tensor cur(in, std::vector<float>(batch.raw() + s * per, batch.raw() + (s + 1) * per));
        for (std::size_t i = 1; i < m.size(); ++i) {
            cur = run_layer(m.layer(i), cur, nullptr);
            if (cap_idx && *cap_idx == i) std::copy(cur.data().begin(), cur.data().end(), r.captured->raw() + s * cur.size());
        }
        if (cap_idx && *cap_idx == 0)
            std::copy(batch.raw() + s * per, batch.raw() + (s + 1) * per, r.captured->raw() + s * per);
        std::copy(cur.data().begin(), cur.data().end(), r.logits.raw() + s * k);
    }
    return r;
}

std::size_t argmax(std::span<const float> values) {
    if (values.empty()) throw std::invalid_argument("argmax of empty sequence");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

std::vector<std::size_t> predict(const Model& m, const Tensor& batch) {
    const ForwardResult r = forward(m, batch);
    const std::size_t b = r.logits.shape()[0], k = r.logits.shape()[1];
    std::vector<std::size_t> out(b);
    for (std::size_t s = 0; s < b; ++s) out[s] = argmax(r.logits.data().subspan(s * k, k));
    return out;
}

void Gradients::zero() {
    for (auto& t : tensors) t.fill(0.0f);
}

Gradients zero_gradients(const Model& m) {
    Gradients g;
    for (const Tensor* p : m.parameters()) g.tensors.emplace_back(p->shape());
    return g;
}

Tensor backward(const Model& m, const Trace& trace, const Tensor& dlogits, Gradients* grads,
                std::optional<std::size_t> wrt_layer) {
    const std::size_t n = m.size();
    if (trace.outputs.size() != n) throw std::invalid_argument("backward: trace does not belong to this model");
    if (wrt_layer && *wrt_layer >= n) throw std::out_of_range("backward: bad layer index");
    if (dlogits.size() != trace.logits().size()) throw std::invalid_argument("backward: dlogits size mismatch");

    // Offset of each layer's first tensor in Model::parameters() order.
    std::vector<std::size_t> param_slot(n, 0);
    for (std::size_t i = 0, slot = 0; i < n; ++i) {
        param_slot[i] = slot;
        if (m.layer(i).kind == LayerKind::Conv2D || m.layer(i).kind == LayerKind::Dense) slot += 2;
    }

    Tensor d = reshape(dlogits, trace.logits().shape());
    Tensor captured;
    for (std::size_t i = n - 1; i >= 1; --i) {
        if (wrt_layer && *wrt_layer == i) captured = d;
        const bool more_below = wrt_layer && *wrt_layer < i;
        if (!grads && !more_below) break;
        const bool need_dx = more_below || (grads && i > 1);

        const LayerNode& node = m.layer(i);
        const Tensor& in = trace.outputs[i - 1];
        if (node.relu) d = relu_grad(trace.outputs[i], d);

        Tensor dx;
        switch (node.kind) {
            case LayerKind::Input: break;
            case LayerKind::Conv2D: {
                const auto& p = node.conv();
                if (grads) {
                    conv2d_backward_accumulate(in, p, d, need_dx ? &dx : nullptr, grads->tensors[param_slot[i]],
                                               grads->tensors[param_slot[i] + 1]);
                } else {
                    Tensor sk(p.kernels.shape()), sb(p.bias.shape());
                    conv2d_backward_accumulate(in, p, d, &dx, sk, sb);
                }
                break;
            }
            case LayerKind::MaxPool:
                if (need_dx) dx = maxpool_backward(trace.argmax[i], d, in.shape());
                break;
            case LayerKind::Flatten:
                if (need_dx) dx = reshape(d, in.shape());
                break;
            case LayerKind::Dense: {
                const auto& p = node.dense();
                if (grads) {
                    dense_backward_accumulate(in, p, d, need_dx ? &dx : nullptr, grads->tensors[param_slot[i]],
                                              grads->tensors[param_slot[i] + 1]);
                } else {
                    Tensor sw(p.weights.shape()), sb(p.bias.shape());
                    dense_backward_accumulate(in, p, d, &dx, sw, sb);
                }
                break;
            }
        }
        if (!need_dx) break;
        d = std::move(dx);
        if (i == 1 && wrt_layer && *wrt_layer == 0) captured = d;
    }
    return captured;
}

// ---------------------------------------------------------------------------
// Summary

std::string format_thousands(std::uint64_t value) {
    std::string digits = std::to_string(value);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

std::string summary(const Model& m) {
    struct Row {
        std::string layer, shape, params;
    };
    std::vector<Row> rows;
    for (const auto& l : m.layers()) {
        std::string shape = "(None";
        for (std::size_t d : l.out_shape.dims()) shape += ", " + std::to_string(d);
        shape += ')';
        rows.push_back({l.name + " (" + std::string(type_label(l.kind)) + ")", shape, format_thousands(l.param_count())});
    }
    std::size_t w0 = 12, w1 = 12;
    for (const auto& r : rows) {
        w0 = std::max(w0, r.layer.size());
        w1 = std::max(w1, r.shape.size());
    }
    w0 += 4;
    w1 += 4;
    const std::size_t width = w0 + w1 + 10;

    const std::uint64_t total = m.param_count();
    const double mb = static_cast<double>(total) * 4.0 / (1024.0 * 1024.0);

    std::ostringstream os;
    os << std::left;
    os << std::string(width, '_') << '\n';
    os << std::setw(static_cast<int>(w0)) << "Layer (type)" << std::setw(static_cast<int>(w1)) << "Output Shape"
       << "Param #" << '\n';
    os << std::string(width, '=') << '\n';
    for (const auto& r : rows)
        os << std::setw(static_cast<int>(w0)) << r.layer << std::setw(static_cast<int>(w1)) << r.shape << r.params << '\n';
    os << std::string(width, '=') << '\n';
    os << "Total (trainable) params: " << format_thousands(total) << " (" << std::fixed << std::setprecision(2) << mb
       << " MB)\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// "SCNN" | u32 version | u64 manifest bytes | manifest text | u64 value count
// | float32 LE values, layer order, kernels before biases.

namespace {

constexpr char kMagic[4] = {'S', 'C', 'N', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_le(std::ostream& os, T value) {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const char* what) {
    unsigned char bytes[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw FormatError(std::string("checkpoint truncated reading ") + what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
    return v;
}

std::string manifest_text(const Model& m) {
    std::ostringstream os;
    const Shape& in = m.input_shape();
    os << "input " << in[0] << ' ' << in[1] << ' ' << in[2] << '\n';
    for (std::size_t i = 1; i < m.size(); ++i) {
        const LayerNode& l = m.layer(i);
        os << kind_name(l.kind) << ' ' << l.name;
        switch (l.kind) {
            case LayerKind::Conv2D: {
                const auto& p = l.conv();
                os << ' ' << p.out_channels() << ' ' << p.kh() << ' ' << p.kw() << ' ' << p.stride.h << ' ' << p.stride.w
                   << ' ' << p.padding.h << ' ' << p.padding.w << ' ' << (l.relu ? "relu" : "linear");
                break;
            }
            case LayerKind::MaxPool: {
                const auto& p = l.pool();
                os << ' ' << p.pool.h << ' ' << p.pool.w << ' ' << p.stride.h << ' ' << p.stride.w;
                break;
            }
            case LayerKind::Dense: os << ' ' << l.dense().outputs() << ' ' << (l.relu ? "relu" : "linear"); break;
            default: break;
        }
        os << '\n';
    }
    for (const auto& c : m.class_names) {
        if (c.find('\n') != std::string::npos) throw std::invalid_argument("class names cannot contain newlines");
        os << "class " << c << '\n';
    }
    os << "end\n";
    return os.str();
}

bool parse_activation(const std::string& token) {
    if (token == "relu") return true;
    if (token == "linear") return false;
    throw FormatError("checkpoint manifest: bad activation \"" + token + "\"");
}

Model parse_manifest(const std::string& text) {
    std::istringstream lines(text);
    std::string line;
    std::optional<Model> model;
    bool ended = false;
    try {
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            if (ended) throw FormatError("checkpoint manifest: content after end");
            if (line.rfind("class ", 0) == 0) {
                if (!model) throw FormatError("checkpoint manifest: class before input");
                model->class_names.push_back(line.substr(6));
                continue;
            }
            std::istringstream ls(line);
            std::string kind, name;
            ls >> kind;
            if (kind == "end") {
                ended = true;
                continue;
            }
            if (kind == "input") {
                std::size_t h = 0, w = 0, c = 0;
                if (model || !(ls >> h >> w >> c)) throw FormatError("checkpoint manifest: bad input line");
                model.emplace(Shape{h, w, c});
                continue;
            }
            if (!model) throw FormatError("checkpoint manifest: layer before input");
            if (!(ls >> name)) throw FormatError("checkpoint manifest: missing layer name");
            if (kind == "conv2d") {
                std::size_t f, kh, kw, sh, sw, ph, pw;
                std::string act;
                if (!(ls >> f >> kh >> kw >> sh >> sw >> ph >> pw >> act)) throw FormatError("checkpoint manifest: bad conv2d line");
                model->conv2d(f, {kh, kw}, parse_activation(act), name, {sh, sw}, {ph, pw});
            } else if (kind == "maxpool") {
                std::size_t ph, pw, sh, sw;
                if (!(ls >> ph >> pw >> sh >> sw)) throw FormatError("checkpoint manifest: bad maxpool line");
                model->maxpool(PoolParams{{ph, pw}, {sh, sw}}, name);
            } else if (kind == "flatten") {
                model->flatten(name);
            } else if (kind == "dense") {
                std::size_t units;
                std::string act;
                if (!(ls >> units >> act)) throw FormatError("checkpoint manifest: bad dense line");
                model->dense(units, parse_activation(act), name);
            } else {
                throw FormatError("checkpoint manifest: unknown layer kind \"" + kind + "\"");
            }
        }
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("checkpoint manifest inconsistent: ") + e.what());
    }
    if (!model) throw FormatError("checkpoint manifest: no input layer");
    if (!ended) throw FormatError("checkpoint manifest: missing end marker");
    if (model->layers().back().kind != LayerKind::Dense) throw FormatError("checkpoint manifest: last layer must be dense");
    if (!model->class_names.empty() && model->class_names.size() != model->num_classes())
        throw FormatError("checkpoint manifest: class name count does not match output size");
    return std::move(*model);
}

}  // namespace

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    const std::string manifest = manifest_text(m);
    os.write(kMagic, 4);
    write_le<std::uint32_t>(os, kFormatVersion);
    write_le<std::uint64_t>(os, manifest.size());
    os.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    write_le<std::uint64_t>(os, m.param_count());

    std::vector<unsigned char> buf;
    for (const Tensor* t : m.parameters()) {
        buf.resize(t->size() * 4);
        for (std::size_t i = 0; i < t->size(); ++i) {
            const auto bits = std::bit_cast<std::uint32_t>((*t)[i]);
            buf[4 * i + 0] = static_cast<unsigned char>(bits & 0xFF);
            buf[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xFF);
            buf[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xFF);
            buf[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xFF);
        }
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError("checkpoint truncated reading magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic): " + path.string());
    const auto version = read_le<std::uint32_t>(is, "version");
    if (version != kFormatVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kFormatVersion) + ")");
    const auto manifest_bytes = read_le<std::uint64_t>(is, "manifest size");
    if (manifest_bytes > (1u << 24)) throw FormatError("checkpoint manifest implausibly large");
    std::string manifest(manifest_bytes, '\0');
    if (!is.read(manifest.data(), static_cast<std::streamsize>(manifest_bytes)))
        throw FormatError("checkpoint truncated reading manifest");
    Model m = parse_manifest(manifest);

    const auto declared = read_le<std::uint64_t>(is, "value count");
    if (declared != m.param_count())
        throw FormatError("checkpoint declares " + std::to_string(declared) + " values but manifest implies " +
                          std::to_string(m.param_count()));

    std::vector<unsigned char> buf;
    for (Tensor* t : m.parameters()) {
        buf.resize(t->size() * 4);
        if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
            throw FormatError("checkpoint truncated: weights shorter than manifest shape " + t->shape().str());
        for (std::size_t i = 0; i < t->size(); ++i) {
            const std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * i]) | (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                                       (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                                       (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
            (*t)[i] = std::bit_cast<float>(bits);
        }
    }
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint has trailing bytes after weights");
    return m;
}

}  // namespace scnn
