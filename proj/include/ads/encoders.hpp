#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ads/tensor.hpp"

namespace ads::encoders {

// Frozen encoder output for one item: a [layers x frames x dim] stack of
// f32 values, keyed by track id. Single-layer encoders use layers = 1.
struct EmbeddingRecord {
    std::string id;
    int layers = 0;
    int frames = 0;
    int dim = 0;
    std::vector<float> values;  // layer-major, then frame, then dim

    size_t expected_values() const {
        return static_cast<size_t>(layers) * frames * dim;
    }
    // f64 [L,F,D] tensor for graph work
    tensor::Tensor to_tensor() const;
};

// MMEB container: magic "MMEB", version u16 = 1, record count u32, then per
// record id_len u16 / id / L u16 / F u32 / D u32 / L*F*D f32, little-endian.
void write_embeddings(const std::map<std::string, EmbeddingRecord>& records,
                      const std::string& path);
std::map<std::string, EmbeddingRecord> read_embeddings(const std::string& path);
// Streaming variant; records are handed over one at a time in file order.
void for_each_embedding(const std::string& path,
                        const std::function<void(EmbeddingRecord&&)>& fn);

// Learnable aggregator over the layer axis of an embedding stack: a 1x1
// convolution treating layers as input channels, applied framewise.
// Output is [frames, channels*dim]; channels defaults to 1 so D' = D.
struct AggregatorParams {
    tensor::Tensor kernel;  // [channels, layers]
    tensor::Tensor bias;    // [channels]

    int channels() const { return kernel.shape.empty() ? 0 : kernel.shape[0]; }
    int layers() const { return kernel.rank() == 2 ? kernel.shape[1] : 0; }
};

AggregatorParams init_aggregator(int layers, int channels, uint64_t seed);

tensor::Var aggregate_layers(tensor::Graph& g, tensor::Var stack, tensor::Var kernel,
                             tensor::Var bias);
// Inference path over a plain record; routed through the same graph op so
// both paths compute identically.
tensor::Tensor aggregate_layers(const EmbeddingRecord& record, const AggregatorParams& params);

// Deterministic stand-in for a frozen text encoder. Tokenizes on
// whitespace/punctuation (lowercased) and maps each token to a
// pseudo-random unit vector keyed by (seed, token), so the same descriptor
// word receives the same vector everywhere.
std::vector<std::string> tokenize(const std::string& text);
tensor::Tensor toy_text_encoder(const std::string& text, int dim, uint64_t seed);

}  // namespace ads::encoders
