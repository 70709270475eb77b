#include "ads/encoders.hpp"

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ads/error.hpp"
#include "ads/rng.hpp"

namespace ads::encoders {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'E', 'B'};
constexpr uint16_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw DataError("cannot open embedding file: " + path);
    }

    size_t offset() const { return offset_; }

    void read_bytes(void* dst, size_t n, const char* what) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in_.gcount()) != n) {
            throw DataError("truncated " + std::string(what) + " at offset " +
                            std::to_string(offset_) + " in " + path_);
        }
        offset_ += n;
    }

    uint16_t read_u16(const char* what) {
        unsigned char b[2];
        read_bytes(b, 2, what);
        return static_cast<uint16_t>(b[0] | (b[1] << 8));
    }

    uint32_t read_u32(const char* what) {
        unsigned char b[4];
        read_bytes(b, 4, what);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }

private:
    std::string path_;
    std::ifstream in_;
    size_t offset_ = 0;
};

}  // namespace

tensor::Tensor EmbeddingRecord::to_tensor() const {
    if (values.size() != expected_values()) {
        throw DataError("embedding record '" + id + "' has inconsistent value count");
    }
    tensor::Tensor t = tensor::Tensor::zeros({layers, frames, dim});
    for (size_t i = 0; i < values.size(); ++i) t.data[i] = static_cast<double>(values[i]);
    return t;
}

void write_embeddings(const std::map<std::string, EmbeddingRecord>& records,
                      const std::string& path) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u16(buf, kVersion);
    put_u32(buf, static_cast<uint32_t>(records.size()));
    for (const auto& [id, rec] : records) {
        if (id != rec.id) throw DataError("embedding map key '" + id + "' != record id");
        if (rec.layers < 1 || rec.frames < 1 || rec.dim < 1) {
            throw DataError("embedding record '" + id + "' has non-positive dimensions");
        }
        if (rec.values.size() != rec.expected_values()) {
            throw DataError("embedding record '" + id + "' has inconsistent value count");
        }
        if (id.size() > 0xffff) throw DataError("embedding id too long: " + id);
        put_u16(buf, static_cast<uint16_t>(id.size()));
        buf.append(id);
        put_u16(buf, static_cast<uint16_t>(rec.layers));
        put_u32(buf, static_cast<uint32_t>(rec.frames));
        put_u32(buf, static_cast<uint32_t>(rec.dim));
        for (float v : rec.values) put_f32(buf, v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write embedding file: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("write failed: " + path);
}

void for_each_embedding(const std::string& path,
                        const std::function<void(EmbeddingRecord&&)>& fn) {
    Reader r(path);
    char magic[4];
    r.read_bytes(magic, 4, "header");
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("bad magic in " + path);
    uint16_t version = r.read_u16("header");
    if (version != kVersion) {
        throw DataError("unsupported embedding format version " + std::to_string(version) +
                        " in " + path);
    }
    uint32_t count = r.read_u32("header");
    for (uint32_t i = 0; i < count; ++i) {
        EmbeddingRecord rec;
        uint16_t id_len = r.read_u16("record");
        rec.id.resize(id_len);
        if (id_len > 0) r.read_bytes(rec.id.data(), id_len, "record");
        rec.layers = r.read_u16("record");
        rec.frames = static_cast<int>(r.read_u32("record"));
        rec.dim = static_cast<int>(r.read_u32("record"));
        if (rec.layers < 1 || rec.frames < 1 || rec.dim < 1) {
            throw DataError("record '" + rec.id + "' has non-positive dimensions in " + path);
        }
        size_t n = rec.expected_values();
        rec.values.resize(n);
        for (size_t k = 0; k < n; ++k) {
            uint32_t bits = r.read_u32("record payload");
            float v;
            std::memcpy(&v, &bits, 4);
            rec.values[k] = v;
        }
        fn(std::move(rec));
    }
}

std::map<std::string, EmbeddingRecord> read_embeddings(const std::string& path) {
    std::map<std::string, EmbeddingRecord> out;
    for_each_embedding(path, [&](EmbeddingRecord&& rec) {
        auto [it, inserted] = out.emplace(rec.id, std::move(rec));
        if (!inserted) throw DataError("duplicate embedding id '" + it->first + "' in " + path);
    });
    return out;
}

AggregatorParams init_aggregator(int layers, int channels, uint64_t seed) {
    if (layers < 1 || channels < 1) throw ConfigError("aggregator needs layers, channels >= 1");
    AggregatorParams p;
    // uniform layer average at start; bias zero
    p.kernel = tensor::Tensor::full({channels, layers}, 1.0 / layers);
    p.bias = tensor::Tensor::zeros({channels});
    if (channels > 1) {
        // break channel symmetry
        Rng rng(derive_seed(seed, "aggregator"));
        for (double& w : p.kernel.data) w += 0.01 * rng.gaussian();
    }
    return p;
}

tensor::Var aggregate_layers(tensor::Graph& g, tensor::Var stack, tensor::Var kernel,
                             tensor::Var bias) {
    return g.layer_conv(stack, kernel, bias);
}

tensor::Tensor aggregate_layers(const EmbeddingRecord& record, const AggregatorParams& params) {
    tensor::Graph g;
    tensor::Var out = g.layer_conv(g.constant(record.to_tensor()), g.constant(params.kernel),
                                   g.constant(params.bias));
    return g.value(out);
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        unsigned char u = static_cast<unsigned char>(ch);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

tensor::Tensor toy_text_encoder(const std::string& text, int dim, uint64_t seed) {
    if (dim < 1) throw ConfigError("toy_text_encoder: dim must be >= 1");
    std::vector<std::string> tokens = tokenize(text);
    if (tokens.empty()) throw DataError("toy_text_encoder: empty text");
    tensor::Tensor out = tensor::Tensor::zeros({static_cast<int>(tokens.size()), dim});
    for (size_t t = 0; t < tokens.size(); ++t) {
        Rng rng(derive_seed(seed, "token", tokens[t]));
        double norm_sq = 0.0;
        std::vector<double> v(static_cast<size_t>(dim));
        for (int d = 0; d < dim; ++d) {
            v[static_cast<size_t>(d)] = rng.gaussian();
            norm_sq += v[static_cast<size_t>(d)] * v[static_cast<size_t>(d)];
        }
        double inv = 1.0 / std::sqrt(norm_sq);
        for (int d = 0; d < dim; ++d) out.at(static_cast<int>(t), d) = v[static_cast<size_t>(d)] * inv;
    }
    return out;
}

}  // namespace ads::encoders
