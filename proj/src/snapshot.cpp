#include <fstream>
#include <map>

#include "binary_io.hpp"
#include "mmorient/errors.hpp"
#include "mmorient/model.hpp"

namespace mmorient {

namespace fs = std::filesystem;

namespace {

constexpr char kSnapshotMagic[4] = {'M', 'M', 'O', 'S'};
constexpr std::uint32_t kSnapshotVersion = 1;
constexpr const char* kThresholdsName = "config.thresholds";

struct RawTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> payload;
};

std::string shape_string(const std::vector<std::uint64_t>& dims) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s;
}

std::vector<RawTensor> read_raw(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("missing file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    const std::string what = "snapshot " + path.filename().string();
    char magic[4];
    if (!in.read(magic, 4)) throw DataError(what + ": unexpected end of file");
    if (std::memcmp(magic, kSnapshotMagic, 4) != 0) throw DataError(what + ": bad magic bytes");
    const auto version = detail::get_le<std::uint32_t>(in, what);
    if (version != kSnapshotVersion) {
        throw DataError(what + ": unsupported version " + std::to_string(version));
    }
    const auto count = detail::get_le<std::uint32_t>(in, what);
    std::vector<RawTensor> tensors(count);
    std::uint64_t payload_bytes = 0;
    for (auto& t : tensors) {
        const auto len = detail::get_le<std::uint32_t>(in, what);
        if (len == 0 || len > 4096) throw DataError(what + ": invalid tensor name length");
        t.name.resize(len);
        if (!in.read(t.name.data(), len)) throw DataError(what + ": unexpected end of file");
        const auto rank = detail::get_le<std::uint32_t>(in, what);
        if (rank == 0 || rank > 8) throw DataError(what + ": invalid rank for '" + t.name + "'");
        t.dims.resize(rank);
        std::uint64_t n = 1;
        for (auto& d : t.dims) {
            d = detail::get_le<std::uint64_t>(in, what);
            n *= d;
        }
        payload_bytes += n * sizeof(double);
    }
    const auto header_end = static_cast<std::uint64_t>(in.tellg());
    if (fs::file_size(path) != header_end + payload_bytes) {
        throw DataError(what + ": size mismatch (truncated or trailing bytes)");
    }
    for (auto& t : tensors) {
        std::uint64_t n = 1;
        for (auto d : t.dims) n *= d;
        t.payload.resize(n);
        for (auto& v : t.payload) v = detail::get_f64(in, what);
    }
    return tensors;
}

const RawTensor& find(const std::vector<RawTensor>& tensors, const std::string& name) {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    throw ShapeError("snapshot is missing tensor '" + name + "'");
}

std::uint64_t dim(const RawTensor& t, std::size_t i) {
    if (t.dims.size() != 2) throw ShapeError("snapshot tensor '" + t.name + "' must have rank 2");
    return t.dims[i];
}

ModelConfig infer_config(const std::vector<RawTensor>& tensors) {
    ModelConfig c;
    const auto& txt = find(tensors, "hima.txt.w1");
    const auto& img = find(tensors, "hima.img.w1");
    const auto& conv = find(tensors, "cmrl.img-img.w");
    c.token_width = dim(txt, 0);
    c.beta = dim(txt, 1);
    c.region_width = dim(img, 0);
    c.joint_width = dim(conv, 0) / 2;
    c.conv_out = dim(conv, 1);
    c.mlp_hidden.clear();
    c.tasks.clear();
    std::uint64_t fused = 0;
    for (const auto& t : tensors) {
        const auto& n = t.name;
        if (n.starts_with("mlp.") && n.ends_with(".w")) {
            if (c.mlp_hidden.empty()) fused = dim(t, 0);
            c.mlp_hidden.push_back(dim(t, 1));
        } else if (n.starts_with("head.") && n.ends_with(".w")) {
            if (c.mlp_hidden.empty() && c.tasks.empty()) fused = dim(t, 0);
            c.tasks.push_back({n.substr(5, n.size() - 7), dim(t, 1)});
        }
    }
    const std::size_t fixed = c.attention_width() + c.relation_width();
    if (fused <= fixed) throw ShapeError("snapshot: fused width inconsistent with component widths");
    c.task_width = fused - fixed;
    return c;
}

Model assemble(const std::vector<RawTensor>& tensors, const ModelConfig& config) {
    Model m{config, ModelParams::zeros(config)};
    const auto& thr = find(tensors, kThresholdsName);
    if (thr.payload.size() != 4) throw ShapeError("snapshot tensor 'config.thresholds' must hold 4 values");
    m.config.thresholds = {thr.payload[0], thr.payload[1], thr.payload[2], thr.payload[3]};

    auto expected = named_tensors(m.params, m.config);
    if (tensors.size() != expected.size() + 1) {
        throw ShapeError("snapshot holds " + std::to_string(tensors.size() - 1) +
                         " parameter tensors, model expects " + std::to_string(expected.size()));
    }
    for (auto& [name, tensor] : expected) {
        const auto& raw = find(tensors, name);
        const std::vector<std::uint64_t> want = {tensor->rows(), tensor->cols()};
        if (raw.dims != want) {
            throw ShapeError("snapshot tensor '" + name + "' has shape " + shape_string(raw.dims) +
                             ", expected " + shape_string(want));
        }
        *tensor = Matrix(tensor->rows(), tensor->cols(), raw.payload);
    }
    return m;
}

}  // namespace

void save_snapshot(const Model& model, const fs::path& path) {
    const auto tensors = named_tensors(model.params, model.config);
    const auto& t = model.config.thresholds;
    const std::vector<double> thresholds = {t.txt_txt, t.img_img, t.txt_img, t.img_txt};

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(kSnapshotMagic, 4);
    detail::put_le<std::uint32_t>(out, kSnapshotVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size() + 1));
    auto put_entry = [&out](const std::string& name, const std::vector<std::uint64_t>& dims) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
        for (auto d : dims) detail::put_le<std::uint64_t>(out, d);
    };
    put_entry(kThresholdsName, {4});
    for (const auto& [name, tensor] : tensors) put_entry(name, {tensor->rows(), tensor->cols()});
    for (double v : thresholds) detail::put_f64(out, v);
    for (const auto& [name, tensor] : tensors) {
        for (double v : tensor->values()) detail::put_f64(out, v);
    }
    if (!out) throw DataError("write failed: " + path.string());
}

Model load_snapshot(const fs::path& path) {
    const auto tensors = read_raw(path);
    return assemble(tensors, infer_config(tensors));
}

Model load_snapshot(const fs::path& path, const ModelConfig& expected) {
    return assemble(read_raw(path), expected);
}

}  // namespace mmorient
