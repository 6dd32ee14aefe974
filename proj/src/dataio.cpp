#include "mmorient/dataio.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "mmorient/errors.hpp"

namespace mmorient {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<TaskSpec> default_task_specs() {
    return {{"sentiment", 3}, {"humor", 4}, {"sarcasm", 4}, {"offensiveness", 4}, {"motivational", 2}};
}

// ---------------------------------------------------------------------------
// Text cleaning

namespace {

bool is_kept_punctuation(char c) {
    switch (c) {
        case '.': case ',': case '!': case '?': case ';': case ':': case '\'':
            return true;
        default:
            return false;
    }
}

std::string clean_once(std::string_view raw) {
    static const std::regex url(R"(([a-z][a-z0-9+.\-]*://|www\.)\S*)", std::regex::icase);
    static const std::regex user(R"(@[A-Za-z0-9_]+)");

    std::string text(raw);
    text = std::regex_replace(text, url, " ");
    text = std::regex_replace(text, user, " ");

    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const bool keep = c < 0x80 && (std::isalnum(c) || is_kept_punctuation(ch));
        if (!keep) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

}  // namespace

std::string clean_text(std::string_view raw) {
    // URL/username removal can expose new matches (e.g. "a_www.x" becomes
    // "a www.x"), so iterate to the fixed point. Every non-final pass shortens
    // the string, which bounds the loop.
    std::string current = clean_once(raw);
    for (;;) {
        std::string next = clean_once(current);
        if (next == current) return current;
        current = std::move(next);
    }
}

// ---------------------------------------------------------------------------
// Tensor files

namespace tensor_io {

namespace {

void write_header(std::ostream& out, const std::vector<std::uint64_t>& dims) {
    out.write(kMagic, 4);
    detail::put_le<std::uint32_t>(out, kVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) detail::put_le<std::uint64_t>(out, d);
}

std::uint64_t element_count(const std::vector<std::uint64_t>& dims) {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

std::ifstream open_tensor(const fs::path& path, std::vector<std::uint64_t>& dims,
                          std::size_t element_size) {
    const std::string name = path.filename().string();
    if (!fs::exists(path)) throw DataError("missing file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());

    char magic[4];
    if (!in.read(magic, 4)) throw DataError(name + ": unexpected end of file");
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError(name + ": bad magic bytes");
    const auto version = detail::get_le<std::uint32_t>(in, name);
    if (version != kVersion) {
        throw DataError(name + ": unsupported format version " + std::to_string(version));
    }
    const auto rank = detail::get_le<std::uint32_t>(in, name);
    if (rank == 0 || rank > 8) throw DataError(name + ": invalid rank " + std::to_string(rank));
    dims.resize(rank);
    for (auto& d : dims) d = detail::get_le<std::uint64_t>(in, name);

    const auto header = static_cast<std::uintmax_t>(12 + 8 * rank);
    const auto expected = header + element_count(dims) * element_size;
    const auto actual = fs::file_size(path);
    if (actual != expected) {
        throw DataError(name + ": payload size mismatch (file has " + std::to_string(actual) +
                        " bytes, header implies " + std::to_string(expected) + ")");
    }
    return in;
}

}  // namespace

void write_f64(const fs::path& path, const std::vector<std::uint64_t>& dims,
               std::span<const double> payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    write_header(out, dims);
    for (double v : payload) detail::put_f64(out, v);
    if (!out) throw DataError("write failed: " + path.string());
}

void write_u8(const fs::path& path, const std::vector<std::uint64_t>& dims,
              std::span<const std::uint8_t> payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    write_header(out, dims);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

F64Tensor read_f64(const fs::path& path) {
    F64Tensor t;
    auto in = open_tensor(path, t.dims, sizeof(double));
    const std::string name = path.filename().string();
    t.payload.resize(element_count(t.dims));
    for (std::size_t i = 0; i < t.payload.size(); ++i) {
        t.payload[i] = detail::get_f64(in, name);
        if (!std::isfinite(t.payload[i])) {
            throw DataError(name + ": non-finite value at flat index " + std::to_string(i));
        }
    }
    return t;
}

U8Tensor read_u8(const fs::path& path) {
    U8Tensor t;
    auto in = open_tensor(path, t.dims, 1);
    t.payload.resize(element_count(t.dims));
    if (!in.read(reinterpret_cast<char*>(t.payload.data()),
                 static_cast<std::streamsize>(t.payload.size()))) {
        throw DataError(path.filename().string() + ": unexpected end of file");
    }
    return t;
}

}  // namespace tensor_io

// ---------------------------------------------------------------------------
// Bundle validation and I/O

void DatasetBundle::validate() const {
    const std::size_t n = records.size();
    auto expect_rows = [n](const std::string& what, std::size_t rows) {
        if (rows != n) {
            throw DataError("dimension mismatch in " + what + ": expected " + std::to_string(n) +
                            " samples, found " + std::to_string(rows));
        }
    };
    expect_rows("joint_txt", joint_txt.rows());
    expect_rows("joint_img", joint_img.rows());
    expect_rows("token_feats", token_feats.count());
    expect_rows("region_feats", region_feats.count());
    expect_rows("toxicity", toxicity.rows());
    expect_rows("sentiment", sentiment.size());
    if (joint_txt.cols() != joint_img.cols()) {
        throw DataError("dimension mismatch: joint_txt width " + std::to_string(joint_txt.cols()) +
                        " != joint_img width " + std::to_string(joint_img.cols()));
    }
    if (tasks.empty()) throw DataError("tasks: at least one task is required");
    std::set<std::string> names;
    for (const auto& t : tasks) {
        if (t.classes < 2) throw DataError("tasks: task '" + t.name + "' has fewer than 2 classes");
        if (!names.insert(t.name).second) throw DataError("tasks: duplicate task '" + t.name + "'");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (sentiment[i] > 4) {
            throw DataError("sentiment: code " + std::to_string(sentiment[i]) +
                            " out of range [0,4] at sample " + std::to_string(i));
        }
        const auto& rec = records[i];
        if (rec.labels.size() != tasks.size()) {
            throw DataError("manifest: sample " + std::to_string(i) + " has " +
                            std::to_string(rec.labels.size()) + " labels for " +
                            std::to_string(tasks.size()) + " tasks");
        }
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            const int label = rec.labels[t];
            if (label == kAbsentLabel) continue;
            if (label < 0 || static_cast<std::size_t>(label) >= tasks[t].classes) {
                throw DataError("manifest: label " + std::to_string(label) + " for task '" +
                                tasks[t].name + "' out of range at sample " + std::to_string(i));
            }
        }
    }
    auto check_finite = [](const std::string& what, std::span<const double> values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!std::isfinite(values[i])) {
                throw DataError(what + ": non-finite value at flat index " + std::to_string(i));
            }
        }
    };
    check_finite("joint_txt", joint_txt.values());
    check_finite("joint_img", joint_img.values());
    check_finite("token_feats", token_feats.values());
    check_finite("region_feats", region_feats.values());
    check_finite("toxicity", toxicity.values());
}

bool bitwise_equal(const DatasetBundle& a, const DatasetBundle& b) {
    return bitwise_equal(a.joint_txt, b.joint_txt) && bitwise_equal(a.joint_img, b.joint_img) &&
           bitwise_equal(a.token_feats, b.token_feats) &&
           bitwise_equal(a.region_feats, b.region_feats) &&
           bitwise_equal(a.toxicity, b.toxicity) && a.sentiment == b.sentiment &&
           a.records == b.records && a.tasks == b.tasks;
}

namespace {

constexpr const char* kManifest = "manifest.jsonl";
constexpr const char* kTasks = "tasks.json";

std::vector<std::uint64_t> dims_of(const Matrix& m) { return {m.rows(), m.cols()}; }
std::vector<std::uint64_t> dims_of(const Tensor3& t) { return {t.count(), t.rows(), t.cols()}; }

Matrix read_matrix(const fs::path& path) {
    auto t = tensor_io::read_f64(path);
    if (t.dims.size() != 2) {
        throw DataError(path.filename().string() + ": expected rank 2, found rank " +
                        std::to_string(t.dims.size()));
    }
    return Matrix(t.dims[0], t.dims[1], std::move(t.payload));
}

Tensor3 read_tensor3(const fs::path& path) {
    auto t = tensor_io::read_f64(path);
    if (t.dims.size() != 3) {
        throw DataError(path.filename().string() + ": expected rank 3, found rank " +
                        std::to_string(t.dims.size()));
    }
    Tensor3 out(t.dims[0], t.dims[1], t.dims[2]);
    std::copy(t.payload.begin(), t.payload.end(), out.values().begin());
    return out;
}

std::vector<TaskSpec> read_tasks(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("missing file: " + path.string());
    std::ifstream in(path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(std::string(kTasks) + ": " + e.what());
    }
    if (!doc.is_array()) throw DataError(std::string(kTasks) + ": expected an array");
    std::vector<TaskSpec> tasks;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& entry = doc[i];
        if (!entry.is_object() || !entry.contains("name") || !entry.contains("classes") ||
            !entry["name"].is_string() || !entry["classes"].is_number_unsigned()) {
            throw DataError(std::string(kTasks) + ": malformed task at index " + std::to_string(i));
        }
        tasks.push_back({entry["name"].get<std::string>(), entry["classes"].get<std::size_t>()});
    }
    return tasks;
}

std::vector<SampleRecord> read_manifest(const fs::path& path, const std::vector<TaskSpec>& tasks) {
    if (!fs::exists(path)) throw DataError("missing file: " + path.string());
    std::ifstream in(path);
    std::vector<SampleRecord> records;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = std::string(kManifest) + " line " + std::to_string(line_no);
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
        if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string() ||
            !doc.contains("raw_text") || !doc["raw_text"].is_string()) {
            throw DataError(where + ": record needs string fields 'id' and 'raw_text'");
        }
        SampleRecord rec;
        rec.id = doc["id"].get<std::string>();
        if (!ids.insert(rec.id).second) throw DataError(where + ": duplicate id '" + rec.id + "'");
        rec.raw_text = doc["raw_text"].get<std::string>();
        rec.cleaned_text = clean_text(rec.raw_text);
        rec.labels.assign(tasks.size(), kAbsentLabel);
        if (doc.contains("labels")) {
            const auto& labels = doc["labels"];
            if (!labels.is_object()) throw DataError(where + ": 'labels' must be an object");
            for (const auto& [key, value] : labels.items()) {
                std::size_t t = 0;
                while (t < tasks.size() && tasks[t].name != key) ++t;
                if (t == tasks.size()) throw DataError(where + ": unknown task '" + key + "'");
                if (value.is_null()) continue;
                if (!value.is_number_integer()) {
                    throw DataError(where + ": label for '" + key + "' is not an integer");
                }
                const auto label = value.get<long long>();
                if (label < 0 || static_cast<unsigned long long>(label) >= tasks[t].classes) {
                    throw DataError(where + ": label " + std::to_string(label) + " for task '" +
                                    key + "' out of range at sample " +
                                    std::to_string(records.size()));
                }
                rec.labels[t] = static_cast<int>(label);
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace

DatasetBundle load_bundle(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("missing dataset directory: " + dir.string());
    DatasetBundle b;
    b.tasks = read_tasks(dir / kTasks);
    b.records = read_manifest(dir / kManifest, b.tasks);
    b.joint_txt = read_matrix(dir / "joint_txt.bin");
    b.joint_img = read_matrix(dir / "joint_img.bin");
    b.token_feats = read_tensor3(dir / "token_feats.bin");
    b.region_feats = read_tensor3(dir / "region_feats.bin");
    b.toxicity = read_matrix(dir / "toxicity.bin");
    auto sentiment = tensor_io::read_u8(dir / "sentiment.bin");
    if (sentiment.dims.size() != 1) throw DataError("sentiment.bin: expected rank 1");
    b.sentiment = std::move(sentiment.payload);

    const std::size_t n = b.records.size();
    auto expect_rows = [n](const char* file, std::uint64_t rows) {
        if (rows != n) {
            throw DataError(std::string("dimension mismatch in ") + file + ": manifest has " +
                            std::to_string(n) + " samples, tensor has " + std::to_string(rows));
        }
    };
    expect_rows("joint_txt.bin", b.joint_txt.rows());
    expect_rows("joint_img.bin", b.joint_img.rows());
    expect_rows("token_feats.bin", b.token_feats.count());
    expect_rows("region_feats.bin", b.region_feats.count());
    expect_rows("toxicity.bin", b.toxicity.rows());
    expect_rows("sentiment.bin", b.sentiment.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (b.sentiment[i] > 4) {
            throw DataError("sentiment.bin: code " + std::to_string(b.sentiment[i]) +
                            " out of range [0,4] at index " + std::to_string(i));
        }
    }
    b.validate();
    return b;
}

void write_bundle(const DatasetBundle& bundle, const fs::path& dir) {
    bundle.validate();
    fs::create_directories(dir);

    json tasks = json::array();
    for (const auto& t : bundle.tasks) tasks.push_back({{"name", t.name}, {"classes", t.classes}});
    {
        std::ofstream out(dir / kTasks, std::ios::trunc);
        out << tasks.dump() << '\n';
        if (!out) throw DataError("write failed: " + (dir / kTasks).string());
    }
    {
        std::ofstream out(dir / kManifest, std::ios::trunc);
        for (const auto& rec : bundle.records) {
            json labels = json::object();
            for (std::size_t t = 0; t < bundle.tasks.size(); ++t) {
                if (rec.labels[t] == kAbsentLabel) {
                    labels[bundle.tasks[t].name] = nullptr;
                } else {
                    labels[bundle.tasks[t].name] = rec.labels[t];
                }
            }
            json line = {{"id", rec.id}, {"raw_text", rec.raw_text}, {"labels", labels}};
            out << line.dump() << '\n';
        }
        if (!out) throw DataError("write failed: " + (dir / kManifest).string());
    }
    tensor_io::write_f64(dir / "joint_txt.bin", dims_of(bundle.joint_txt), bundle.joint_txt.values());
    tensor_io::write_f64(dir / "joint_img.bin", dims_of(bundle.joint_img), bundle.joint_img.values());
    tensor_io::write_f64(dir / "token_feats.bin", dims_of(bundle.token_feats),
                         bundle.token_feats.values());
    tensor_io::write_f64(dir / "region_feats.bin", dims_of(bundle.region_feats),
                         bundle.region_feats.values());
    tensor_io::write_f64(dir / "toxicity.bin", dims_of(bundle.toxicity), bundle.toxicity.values());
    tensor_io::write_u8(dir / "sentiment.bin", {bundle.sentiment.size()}, bundle.sentiment);
}

DatasetBundle select_samples(const DatasetBundle& bundle, const std::vector<std::size_t>& indices) {
    DatasetBundle out;
    out.tasks = bundle.tasks;
    out.joint_txt = gather_rows(bundle.joint_txt, indices);
    out.joint_img = gather_rows(bundle.joint_img, indices);
    out.toxicity = gather_rows(bundle.toxicity, indices);
    const auto& tok = bundle.token_feats;
    const auto& reg = bundle.region_feats;
    out.token_feats = Tensor3(indices.size(), tok.rows(), tok.cols());
    out.region_feats = Tensor3(indices.size(), reg.rows(), reg.cols());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        for (std::size_t r = 0; r < tok.rows(); ++r) {
            for (std::size_t c = 0; c < tok.cols(); ++c) out.token_feats(k, r, c) = tok(i, r, c);
        }
        for (std::size_t r = 0; r < reg.rows(); ++r) {
            for (std::size_t c = 0; c < reg.cols(); ++c) out.region_feats(k, r, c) = reg(i, r, c);
        }
        out.sentiment.push_back(bundle.sentiment[i]);
        out.records.push_back(bundle.records[i]);
    }
    return out;
}

}  // namespace mmorient
