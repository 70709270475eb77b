#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ads/tensor.hpp"

namespace ads::model {

// Projection stack dimensions. The text and audio branches use the same
// shape but separate, non-shared parameters.
struct ModelConfig {
    int audio_input_dim = 64;
    int text_input_dim = 64;
    int d_model = 256;
    int d_joint = 256;
    int heads = 2;
    int layers = 2;
    int ffn_expansion = 4;
    int max_len = 512;
    bool truncate_long_inputs = false;

    void validate() const;
};

// Flat registry of named parameter tensors ("audio.layer0.attn.wq", ...).
// std::map keeps the ordering stable for serialization and iteration.
using ParamMap = std::map<std::string, tensor::Tensor>;

// Deterministic scaled-uniform init (gain 1/sqrt(fan_in)); biases and
// layer-norm offsets start at zero, gains at one. Each tensor draws from a
// seed derived from (seed, name), so the layout is order-independent.
ParamMap init_projection(const ModelConfig& cfg, const std::string& prefix, int input_dim,
                         uint64_t seed);

size_t parameter_count(const ParamMap& params);

// Parameters bound into a graph for one forward/backward pass, either as
// trainable params or frozen constants.
class BoundParams {
public:
    BoundParams() = default;
    static BoundParams bind(tensor::Graph& g, const ParamMap& params, bool trainable);
    static BoundParams from_vars(std::map<std::string, tensor::Var> vars);

    tensor::Var at(const std::string& name) const;
    bool has(const std::string& name) const { return vars_.count(name) > 0; }
    const std::map<std::string, tensor::Var>& vars() const { return vars_; }

private:
    std::map<std::string, tensor::Var> vars_;
};

// Projection of one [frames, input_dim] sequence to the joint space:
// prepend CLS, add positional embeddings, run pre-norm Transformer layers,
// take the CLS output through the output linear, l2-normalize.
// Returns a [1, d_joint] unit row.
tensor::Var project(tensor::Graph& g, const BoundParams& params, const std::string& prefix,
                    const ModelConfig& cfg, tensor::Var sequence);

// No-grad convenience around project(); safe to call concurrently on
// shared frozen params.
tensor::Tensor project_inference(const ParamMap& params, const std::string& prefix,
                                 const ModelConfig& cfg, const tensor::Tensor& sequence);

// S[i][j] = dot(audio_i, text_j); inputs are unit-norm rows of equal count.
tensor::Tensor similarity_matrix(const tensor::Tensor& audio, const tensor::Tensor& text);

// Versioned binary checkpoint of named parameter tensors. Bit-exact
// round-trip; see README for the layout.
void write_checkpoint(const ParamMap& params, const std::string& path);
ParamMap read_checkpoint(const std::string& path);

}  // namespace ads::model
