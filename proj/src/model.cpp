#include "ads/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ads/error.hpp"
#include "ads/rng.hpp"

namespace ads::model {

using tensor::Graph;
using tensor::Tensor;
using tensor::Var;

void ModelConfig::validate() const {
    if (audio_input_dim < 1 || text_input_dim < 1) throw ConfigError("model: input dims must be >= 1");
    if (d_model < 1 || d_joint < 1) throw ConfigError("model: d_model and d_joint must be >= 1");
    if (heads < 1 || d_model % heads != 0) {
        throw ConfigError("model: heads must divide d_model");
    }
    if (layers < 1) throw ConfigError("model: layers must be >= 1");
    if (ffn_expansion < 1) throw ConfigError("model: ffn_expansion must be >= 1");
    if (max_len < 2) throw ConfigError("model: max_len must be >= 2");
}

namespace {

Tensor uniform_init(std::vector<int> shape, int fan_in, uint64_t seed) {
    Tensor t = Tensor::zeros(std::move(shape));
    Rng rng(seed);
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : t.data) x = (2.0 * rng.uniform() - 1.0) * bound;
    return t;
}

}  // namespace

ParamMap init_projection(const ModelConfig& cfg, const std::string& prefix, int input_dim,
                         uint64_t seed) {
    cfg.validate();
    ParamMap p;
    auto uniform = [&](const std::string& name, std::vector<int> shape, int fan_in) {
        p[prefix + "." + name] = uniform_init(std::move(shape), fan_in, derive_seed(seed, prefix, name));
    };
    auto zeros = [&](const std::string& name, std::vector<int> shape) {
        p[prefix + "." + name] = Tensor::zeros(std::move(shape));
    };
    auto ones = [&](const std::string& name, std::vector<int> shape) {
        p[prefix + "." + name] = Tensor::full(std::move(shape), 1.0);
    };

    uniform("adapter.w", {input_dim, cfg.d_model}, input_dim);
    zeros("adapter.b", {1, cfg.d_model});
    uniform("cls", {1, cfg.d_model}, cfg.d_model);
    uniform("pos", {cfg.max_len, cfg.d_model}, cfg.d_model);
    for (int l = 0; l < cfg.layers; ++l) {
        std::string base = "layer" + std::to_string(l) + ".";
        ones(base + "ln1.gain", {1, cfg.d_model});
        zeros(base + "ln1.bias", {1, cfg.d_model});
        for (const char* w : {"wq", "wk", "wv", "wo"}) {
            uniform(base + "attn." + w, {cfg.d_model, cfg.d_model}, cfg.d_model);
        }
        for (const char* b : {"bq", "bk", "bv", "bo"}) {
            zeros(base + "attn." + b, {1, cfg.d_model});
        }
        ones(base + "ln2.gain", {1, cfg.d_model});
        zeros(base + "ln2.bias", {1, cfg.d_model});
        int hidden = cfg.ffn_expansion * cfg.d_model;
        uniform(base + "ffn.w1", {cfg.d_model, hidden}, cfg.d_model);
        zeros(base + "ffn.b1", {1, hidden});
        uniform(base + "ffn.w2", {hidden, cfg.d_model}, hidden);
        zeros(base + "ffn.b2", {1, cfg.d_model});
    }
    uniform("out.w", {cfg.d_model, cfg.d_joint}, cfg.d_model);
    zeros("out.b", {1, cfg.d_joint});
    return p;
}

size_t parameter_count(const ParamMap& params) {
    size_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
}

BoundParams BoundParams::bind(Graph& g, const ParamMap& params, bool trainable) {
    BoundParams out;
    for (const auto& [name, t] : params) {
        out.vars_[name] = trainable ? g.param(t) : g.constant(t);
    }
    return out;
}

BoundParams BoundParams::from_vars(std::map<std::string, Var> vars) {
    BoundParams out;
    out.vars_ = std::move(vars);
    return out;
}

Var BoundParams::at(const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw Error("missing parameter: " + name);
    return it->second;
}

namespace {

Var affine_layer_norm(Graph& g, const BoundParams& p, const std::string& base, Var x) {
    Var normed = g.layer_norm_rows(x);
    return g.add(g.mul(normed, p.at(base + ".gain")), p.at(base + ".bias"));
}

Var linear(Graph& g, const BoundParams& p, const std::string& base, Var x) {
    return g.add(g.matmul(x, p.at(base + ".w")), p.at(base + ".b"));
}

Var self_attention(Graph& g, const BoundParams& p, const std::string& base, Var x,
                   const ModelConfig& cfg) {
    Var q = g.add(g.matmul(x, p.at(base + ".wq")), p.at(base + ".bq"));
    Var k = g.add(g.matmul(x, p.at(base + ".wk")), p.at(base + ".bk"));
    Var v = g.add(g.matmul(x, p.at(base + ".wv")), p.at(base + ".bv"));

    int head_dim = cfg.d_model / cfg.heads;
    int rows = g.value(x).shape[0];
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(head_dim));

    std::vector<Var> head_outputs;
    head_outputs.reserve(static_cast<size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
        int c0 = h * head_dim, c1 = (h + 1) * head_dim;
        Var qh = g.slice(q, 0, rows, c0, c1);
        Var kh = g.slice(k, 0, rows, c0, c1);
        Var vh = g.slice(v, 0, rows, c0, c1);
        Var scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dk);
        head_outputs.push_back(g.matmul(g.softmax_rows(scores), vh));
    }
    Var merged = cfg.heads == 1 ? head_outputs[0] : g.concat(head_outputs, 1);
    return g.add(g.matmul(merged, p.at(base + ".wo")), p.at(base + ".bo"));
}

}  // namespace

Var project(Graph& g, const BoundParams& params, const std::string& prefix,
            const ModelConfig& cfg, Var sequence) {
    const Tensor& seq = g.value(sequence);
    if (seq.rank() != 2) throw Error("project: sequence must be rank-2");
    int frames = seq.shape[0];
    if (frames < 1) throw Error("project: empty sequence");
    if (frames + 1 > cfg.max_len) {
        if (!cfg.truncate_long_inputs) {
            throw DataError("project: sequence length " + std::to_string(frames) +
                            " exceeds max_len " + std::to_string(cfg.max_len) +
                            " (set truncate to allow)");
        }
        sequence = g.slice(sequence, 0, cfg.max_len - 1, 0, seq.shape[1]);
        frames = cfg.max_len - 1;
    }

    auto key = [&](const std::string& name) { return prefix + "." + name; };

    Var h = linear(g, params, key("adapter"), sequence);
    h = g.concat({params.at(key("cls")), h}, 0);
    int rows = frames + 1;
    Var pos = g.slice(params.at(key("pos")), 0, rows, 0, cfg.d_model);
    h = g.add(h, pos);

    for (int l = 0; l < cfg.layers; ++l) {
        std::string base = key("layer" + std::to_string(l));
        Var attn_in = affine_layer_norm(g, params, base + ".ln1", h);
        h = g.add(h, self_attention(g, params, base + ".attn", attn_in, cfg));
        Var ffn_in = affine_layer_norm(g, params, base + ".ln2", h);
        Var hidden = g.gelu(g.add(g.matmul(ffn_in, params.at(base + ".ffn.w1")),
                                  params.at(base + ".ffn.b1")));
        Var ffn_out = g.add(g.matmul(hidden, params.at(base + ".ffn.w2")),
                            params.at(base + ".ffn.b2"));
        h = g.add(h, ffn_out);
    }

    Var cls_out = g.slice(h, 0, 1, 0, cfg.d_model);
    Var joint = linear(g, params, key("out"), cls_out);
    return g.l2_normalize_rows(joint);
}

tensor::Tensor project_inference(const ParamMap& params, const std::string& prefix,
                                 const ModelConfig& cfg, const Tensor& sequence) {
    Graph g;
    BoundParams bound = BoundParams::bind(g, params, /*trainable=*/false);
    Var out = project(g, bound, prefix, cfg, g.constant(sequence));
    return g.value(out);
}

Tensor similarity_matrix(const Tensor& audio, const Tensor& text) {
    if (audio.rank() != 2 || text.rank() != 2 || audio.shape[1] != text.shape[1]) {
        throw Error("similarity_matrix: shape mismatch " + shape_string(audio) + " x " +
                    shape_string(text));
    }
    if (audio.shape[0] != text.shape[0]) {
        throw Error("similarity_matrix: count mismatch " + std::to_string(audio.shape[0]) +
                    " vs " + std::to_string(text.shape[0]));
    }
    int n = audio.shape[0], d = audio.shape[1];
    Tensor s = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double dot = 0.0;
            for (int k = 0; k < d; ++k) dot += audio.at(i, k) * text.at(j, k);
            s.at(i, j) = dot;
        }
    }
    return s;
}

namespace {

constexpr char kCkptMagic[4] = {'A', 'D', 'C', 'K'};
constexpr uint16_t kCkptVersion = 1;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

}  // namespace

void write_checkpoint(const ParamMap& params, const std::string& path) {
    std::string buf;
    buf.append(kCkptMagic, 4);
    put_u16(buf, kCkptVersion);
    put_u32(buf, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        if (name.size() > 0xffff) throw DataError("parameter name too long: " + name);
        put_u16(buf, static_cast<uint16_t>(name.size()));
        buf.append(name);
        buf.push_back(static_cast<char>(t.rank()));
        for (int d : t.shape) put_u32(buf, static_cast<uint32_t>(d));
        for (double v : t.data) put_f64(buf, v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("checkpoint write failed: " + path);
}

ParamMap read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    size_t offset = 0;
    auto need = [&](void* dst, size_t n, const char* what) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in.gcount()) != n) {
            throw DataError("truncated checkpoint (" + std::string(what) + ") at offset " +
                            std::to_string(offset) + " in " + path);
        }
        offset += n;
    };
    auto read_u16 = [&](const char* what) {
        unsigned char b[2];
        need(b, 2, what);
        return static_cast<uint16_t>(b[0] | (b[1] << 8));
    };
    auto read_u32 = [&](const char* what) {
        unsigned char b[4];
        need(b, 4, what);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    };

    char magic[4];
    need(magic, 4, "header");
    if (std::memcmp(magic, kCkptMagic, 4) != 0) throw DataError("bad magic in " + path);
    uint16_t version = read_u16("header");
    if (version != kCkptVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    uint32_t count = read_u32("header");

    ParamMap params;
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t name_len = read_u16("name");
        std::string name(name_len, '\0');
        if (name_len > 0) need(name.data(), name_len, "name");
        unsigned char rank;
        need(&rank, 1, "rank");
        if (rank < 1 || rank > 4) throw DataError("bad tensor rank in " + path);
        std::vector<int> shape(rank);
        size_t volume = 1;
        for (unsigned char d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(read_u32("dims"));
            if (shape[d] < 1) throw DataError("bad tensor dim in " + path);
            volume *= static_cast<size_t>(shape[d]);
        }
        Tensor t = Tensor::zeros(shape);
        for (size_t k = 0; k < volume; ++k) {
            unsigned char b[8];
            need(b, 8, "payload");
            uint64_t bits = 0;
            for (int z = 7; z >= 0; --z) bits = (bits << 8) | b[z];
            double v;
            std::memcpy(&v, &bits, 8);
            t.data[k] = v;
        }
        if (!params.emplace(name, std::move(t)).second) {
            throw DataError("duplicate parameter '" + name + "' in " + path);
        }
    }
    return params;
}

}  // namespace ads::model
