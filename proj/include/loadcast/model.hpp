#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loadcast/num/parameter.hpp"
#include "loadcast/num/tensor.hpp"

namespace loadcast::model {

struct Config {
  std::size_t d_model = 12;
  std::size_t n_heads = 2;
  std::size_t n_encoder_blocks = 1;
  std::size_t n_decoder_blocks = 1;
  std::size_t ffn_hidden = 0;  // 0 means 4 * d_model
  std::size_t input_len = 96;
  std::size_t output_len = 24;
  std::size_t n_features = 9;
  bool positional_encoding = true;
  double layer_norm_eps = 1e-5;

  std::size_t head_dim() const { return d_model / n_heads; }
  std::size_t ffn_dim() const { return ffn_hidden ? ffn_hidden : 4 * d_model; }
  void validate() const;
};

enum class ParamGroup { kEmbedding, kEncoder, kDecoder, kHead };

// Layer group from the dotted parameter name prefix.
ParamGroup param_group(std::string_view name);

// Row-stochastic attention matrices captured during a forward pass, one
// record per (block, attention site, head). `weights` holds the per-sample
// matrices back to back: batch * query_len * key_len values.
struct AttentionRecord {
  std::string label;
  std::size_t query_len = 0;
  std::size_t key_len = 0;
  std::size_t batch = 0;
  std::shared_ptr<const std::vector<double>> weights;

  std::span<const double> sample(std::size_t b) const {
    return std::span<const double>(*weights).subspan(b * query_len * key_len,
                                                     query_len * key_len);
  }
};

struct AttentionDump {
  std::vector<AttentionRecord> records;
};

// Sinusoidal position table: even columns sin(pos / 10000^(2i/d)), odd
// columns cos of the same argument. Deterministic, bounded in [-1, 1].
num::Tensor positional_encoding(std::size_t len, std::size_t d_model);

// Plain single-matrix attention, Q [n_q x d_k], K [n_k x d_k], V [n_k x d_v].
// Returns (A*V, A) with A = softmax(Q K^T / sqrt(d_k)). No tape involved;
// this is the reference the batched engine path is tested against.
std::pair<num::Tensor, num::Tensor> scaled_dot_product_attention(
    const num::Tensor& q, const num::Tensor& k, const num::Tensor& v);

struct HeadProjection {
  num::Tensor wq, wk, wv;  // each [d_model x d_model/H]
};

// Concat(head_1..head_H) W_o over plain matrices; per-head attention
// matrices are appended to `attentions` when provided.
num::Tensor multi_head_attention(const num::Tensor& q_in,
                                 const num::Tensor& k_in,
                                 const num::Tensor& v_in,
                                 std::span<const HeadProjection> heads,
                                 const num::Tensor& wo,
                                 std::vector<num::Tensor>* attentions = nullptr);

// Fused batched attention for the training path: q is [batch*Lq x d_k],
// k and v are [batch*Lk x d_k]; each sample's block attends independently.
// With `causal` set, query row i only attends to key rows <= i. The returned
// attention buffer is shared with the backward closure.
num::Tensor attend_batch(num::Tape& tape, const num::Tensor& q,
                         const num::Tensor& k, const num::Tensor& v,
                         std::size_t batch, bool causal,
                         std::shared_ptr<const std::vector<double>>* attention);

// Encoder-decoder forecaster: a 96-hour 9-feature window in, the next day's
// 24 fluctuation values out. The decoder runs on 24 learned query tokens
// (one per forecast hour) with causal self-attention and cross-attention to
// the encoder sequence.
class Transformer {
 public:
  Transformer(const Config& cfg, std::uint64_t seed);

  // input must be [batch * input_len x n_features]; returns [batch x output_len]
  num::Tensor forward(num::Tape& tape, const num::Tensor& input,
                      std::size_t batch, AttentionDump* dump = nullptr) const;

  std::span<num::Parameter> parameters() { return params_; }
  std::span<const num::Parameter> parameters() const { return params_; }
  const Config& config() const { return cfg_; }

  Transformer clone() const;
  // Copies values into matching names; throws on unknown name or shape.
  void load_parameters(std::span<const num::Parameter> records);

 private:
  struct HeadIdx {
    int wq = -1, wk = -1, wv = -1;
  };
  struct AttnIdx {
    std::vector<HeadIdx> heads;
    int wo = -1, bo = -1;
  };
  struct FfnIdx {
    int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
  };
  struct EncoderIdx {
    AttnIdx self;
    int ln1_g = -1, ln1_b = -1;
    FfnIdx ffn;
    int ln2_g = -1, ln2_b = -1;
  };
  struct DecoderIdx {
    AttnIdx self;
    int ln1_g = -1, ln1_b = -1;
    AttnIdx cross;
    int ln2_g = -1, ln2_b = -1;
    FfnIdx ffn;
    int ln3_g = -1, ln3_b = -1;
  };

  const num::Tensor& p(int idx) const {
    return params_[static_cast<std::size_t>(idx)].tensor;
  }
  int add_param(const std::string& name, num::Shape shape, class ParamInit&);
  num::Tensor attention_sublayer(num::Tape& tape, const AttnIdx& idx,
                                 const num::Tensor& q_in,
                                 const num::Tensor& k_in,
                                 const num::Tensor& v_in, std::size_t batch,
                                 bool causal, const std::string& label,
                                 AttentionDump* dump) const;
  num::Tensor ffn_sublayer(num::Tape& tape, const FfnIdx& idx,
                           const num::Tensor& x) const;

  Config cfg_;
  std::vector<num::Parameter> params_;
  num::Tensor pos_table_;
  int embed_w_ = -1, embed_b_ = -1;
  std::vector<EncoderIdx> encoders_;
  int queries_ = -1;
  std::vector<DecoderIdx> decoders_;
  int head_w_ = -1, head_b_ = -1;
};

// Column mass of an attention matrix folded to hour-of-day and normalized to
// sum 1; a reporting diagnostic for where the model looks within the day.
std::array<double, 24> attention_profile(std::span<const double> matrix,
                                         std::size_t rows, std::size_t cols);

// One delimited text file per record (header "rows,cols", one matrix row per
// line) for the given sample index.
void export_attention(const AttentionDump& dump,
                      const std::filesystem::path& dir, std::size_t sample);

// Reads a matrix written by export_attention.
num::Tensor read_attention_matrix(const std::filesystem::path& path);

}  // namespace loadcast::model
