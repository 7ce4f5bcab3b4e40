#include "loadcast/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "loadcast/error.hpp"
#include "loadcast/parallel.hpp"
#include "loadcast/rng.hpp"

namespace loadcast::model {

using num::Shape;
using num::Tape;
using num::Tensor;

void Config::validate() const {
  if (d_model == 0 || n_heads == 0 || input_len == 0 || output_len == 0 ||
      n_features == 0 || n_encoder_blocks == 0 || n_decoder_blocks == 0) {
    throw ConfigError("model config: all dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("model config: d_model must be divisible by n_heads");
  }
}

ParamGroup param_group(std::string_view name) {
  if (name.starts_with("embed.")) return ParamGroup::kEmbedding;
  if (name.starts_with("encoder")) return ParamGroup::kEncoder;
  if (name.starts_with("decoder") || name.starts_with("dec.")) {
    return ParamGroup::kDecoder;
  }
  if (name.starts_with("head.")) return ParamGroup::kHead;
  throw Error("param_group: unrecognized parameter name '" +
              std::string(name) + "'");
}

num::Tensor positional_encoding(std::size_t len, std::size_t d_model) {
  if (len == 0 || d_model == 0) {
    throw DomainError("positional_encoding: len and d_model must be >= 1");
  }
  Tensor table = Tensor::zeros({len, d_model});
  auto data = table.value_mut();
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t j = 0; j < d_model; ++j) {
      const double pair = static_cast<double>(j / 2);
      const double freq =
          std::pow(10000.0, -2.0 * pair / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) * freq;
      data[pos * d_model + j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return table;
}

std::pair<Tensor, Tensor> scaled_dot_product_attention(const Tensor& q,
                                                       const Tensor& k,
                                                       const Tensor& v) {
  const std::size_t n_q = q.rows(), d_k = q.cols();
  const std::size_t n_k = k.rows(), d_v = v.cols();
  if (d_k == 0 || k.cols() != d_k || v.rows() != n_k) {
    throw ShapeError("attention: Q/K/V dimensions disagree");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
  Tensor attn = Tensor::zeros({n_q, n_k});
  auto a = attn.value_mut();
  for (std::size_t i = 0; i < n_q; ++i) {
    double mx = -1e300;
    for (std::size_t j = 0; j < n_k; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < d_k; ++l) s += q(i, l) * k(j, l);
      a[i * n_k + j] = s * scale;
      mx = std::max(mx, a[i * n_k + j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n_k; ++j) {
      a[i * n_k + j] = std::exp(a[i * n_k + j] - mx);
      sum += a[i * n_k + j];
    }
    for (std::size_t j = 0; j < n_k; ++j) a[i * n_k + j] /= sum;
  }
  Tensor out = Tensor::zeros({n_q, d_v});
  auto o = out.value_mut();
  for (std::size_t i = 0; i < n_q; ++i) {
    for (std::size_t j = 0; j < n_k; ++j) {
      const double w = a[i * n_k + j];
      for (std::size_t l = 0; l < d_v; ++l) o[i * d_v + l] += w * v(j, l);
    }
  }
  return {out, attn};
}

Tensor multi_head_attention(const Tensor& q_in, const Tensor& k_in,
                            const Tensor& v_in,
                            std::span<const HeadProjection> heads,
                            const Tensor& wo,
                            std::vector<Tensor>* attentions) {
  if (heads.empty()) throw ShapeError("multi_head_attention: no heads");
  const std::size_t d_model = q_in.cols();
  if (wo.rows() != d_model || wo.cols() != d_model) {
    throw ShapeError("multi_head_attention: W_o must be d_model x d_model");
  }
  auto project = [](const Tensor& x, const Tensor& w) {
    Tensor out = Tensor::zeros({x.rows(), w.cols()});
    auto o = out.value_mut();
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < x.cols(); ++l) s += x(i, l) * w(l, j);
        o[i * w.cols() + j] = s;
      }
    }
    return out;
  };
  const std::size_t n_q = q_in.rows();
  std::size_t total_cols = 0;
  for (const auto& h : heads) total_cols += h.wv.cols();
  Tensor concat = Tensor::zeros({n_q, total_cols});
  std::size_t offset = 0;
  for (const auto& head : heads) {
    auto [out, attn] = scaled_dot_product_attention(project(q_in, head.wq),
                                                    project(k_in, head.wk),
                                                    project(v_in, head.wv));
    if (attentions) attentions->push_back(attn);
    for (std::size_t i = 0; i < n_q; ++i) {
      for (std::size_t j = 0; j < out.cols(); ++j) {
        concat.at(i, offset + j) = out(i, j);
      }
    }
    offset += out.cols();
  }
  if (total_cols != d_model) {
    throw ShapeError("multi_head_attention: head widths must sum to d_model");
  }
  return project(concat, wo);
}

Tensor attend_batch(Tape& tape, const Tensor& q, const Tensor& k,
                    const Tensor& v, std::size_t batch, bool causal,
                    std::shared_ptr<const std::vector<double>>* attention) {
  if (batch == 0 || q.rows() % batch != 0 || k.rows() % batch != 0) {
    throw ShapeError("attend_batch: row counts must be multiples of batch");
  }
  const std::size_t lq = q.rows() / batch;
  const std::size_t lk = k.rows() / batch;
  const std::size_t dk = q.cols();
  const std::size_t dv = v.cols();
  if (k.cols() != dk || v.rows() != k.rows()) {
    throw ShapeError("attend_batch: K/V dimensions disagree with Q");
  }
  if (causal && lq != lk) {
    throw ShapeError("attend_batch: causal masking requires Lq == Lk");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  const bool rg = tape.grad_enabled() &&
                  (q.requires_grad() || k.requires_grad() || v.requires_grad());
  Tensor out = tape.make_traced({batch * lq, dv}, rg);
  auto attn = std::make_shared<std::vector<double>>(batch * lq * lk, 0.0);

  const double* pq = q.value().data();
  const double* pk = k.value().data();
  const double* pv = v.value().data();
  double* po = out.value_mut().data();
  double* pa = attn->data();

  const double per_sample_flops =
      2.0 * static_cast<double>(lq * lk) * static_cast<double>(dk + dv);
  parallel_for(static_cast<std::int64_t>(batch), per_sample_flops,
               [=](std::int64_t b) {
                 const double* qb = pq + b * lq * dk;
                 const double* kb = pk + b * lk * dk;
                 const double* vb = pv + b * lk * dv;
                 double* ob = po + b * lq * dv;
                 double* ab = pa + b * lq * lk;
                 for (std::size_t i = 0; i < lq; ++i) {
                   const std::size_t active = causal ? i + 1 : lk;
                   double mx = -1e300;
                   for (std::size_t j = 0; j < active; ++j) {
                     double s = 0.0;
                     for (std::size_t l = 0; l < dk; ++l) {
                       s += qb[i * dk + l] * kb[j * dk + l];
                     }
                     ab[i * lk + j] = s * scale;
                     mx = std::max(mx, ab[i * lk + j]);
                   }
                   double sum = 0.0;
                   for (std::size_t j = 0; j < active; ++j) {
                     ab[i * lk + j] = std::exp(ab[i * lk + j] - mx);
                     sum += ab[i * lk + j];
                   }
                   const double inv = 1.0 / sum;
                   for (std::size_t j = 0; j < active; ++j) {
                     ab[i * lk + j] *= inv;
                   }
                   for (std::size_t l = 0; l < dv; ++l) {
                     double acc = 0.0;
                     for (std::size_t j = 0; j < active; ++j) {
                       acc += ab[i * lk + j] * vb[j * dv + l];
                     }
                     ob[i * dv + l] = acc;
                   }
                 }
               });

  if (attention) *attention = attn;

  if (rg) {
    tape.record([q, k, v, out, attn, batch, lq, lk, dk, dv, scale,
                 per_sample_flops]() mutable {
      const double* pq = q.value().data();
      const double* pk = k.value().data();
      const double* pv = v.value().data();
      const double* pa = attn->data();
      const double* pgo = out.grad().data();
      double* pgq = q.requires_grad() ? q.grad_mut().data() : nullptr;
      double* pgk = k.requires_grad() ? k.grad_mut().data() : nullptr;
      double* pgv = v.requires_grad() ? v.grad_mut().data() : nullptr;
      parallel_for(
          static_cast<std::int64_t>(batch), 2.0 * per_sample_flops,
          [=](std::int64_t b) {
            const double* qb = pq + b * lq * dk;
            const double* kb = pk + b * lk * dk;
            const double* vb = pv + b * lk * dv;
            const double* ab = pa + b * lq * lk;
            const double* gob = pgo + b * lq * dv;
            std::vector<double> ds(lk);
            for (std::size_t i = 0; i < lq; ++i) {
              // dA row, then the softmax backward into dS
              double dot = 0.0;
              for (std::size_t j = 0; j < lk; ++j) {
                double da = 0.0;
                for (std::size_t l = 0; l < dv; ++l) {
                  da += gob[i * dv + l] * vb[j * dv + l];
                }
                ds[j] = da;
                dot += da * ab[i * lk + j];
              }
              for (std::size_t j = 0; j < lk; ++j) {
                ds[j] = ab[i * lk + j] * (ds[j] - dot);
              }
              if (pgv) {
                double* gvb = pgv + b * lk * dv;
                for (std::size_t j = 0; j < lk; ++j) {
                  const double w = ab[i * lk + j];
                  if (w == 0.0) continue;
                  for (std::size_t l = 0; l < dv; ++l) {
                    gvb[j * dv + l] += w * gob[i * dv + l];
                  }
                }
              }
              if (pgq) {
                double* gqb = pgq + b * lq * dk;
                for (std::size_t j = 0; j < lk; ++j) {
                  const double w = ds[j] * scale;
                  if (w == 0.0) continue;
                  for (std::size_t l = 0; l < dk; ++l) {
                    gqb[i * dk + l] += w * kb[j * dk + l];
                  }
                }
              }
              if (pgk) {
                double* gkb = pgk + b * lk * dk;
                for (std::size_t j = 0; j < lk; ++j) {
                  const double w = ds[j] * scale;
                  if (w == 0.0) continue;
                  for (std::size_t l = 0; l < dk; ++l) {
                    gkb[j * dk + l] += w * qb[i * dk + l];
                  }
                }
              }
            }
          });
    });
  }
  return out;
}

// Seeded uniform +/- sqrt(1/fan_in) initialization for weight matrices.
class ParamInit {
 public:
  explicit ParamInit(std::uint64_t seed) : rng_(seed) {}

  std::vector<double> weights(Shape shape) {
    const double bound = std::sqrt(1.0 / static_cast<double>(shape.rows));
    std::vector<double> values(shape.size());
    for (double& v : values) v = rng_.uniform(-bound, bound);
    return values;
  }

 private:
  Rng rng_;
};

int Transformer::add_param(const std::string& name, Shape shape,
                           ParamInit& init) {
  const bool is_bias = name.ends_with(".b") || name.ends_with(".bo") ||
                       name.ends_with(".b1") || name.ends_with(".b2") ||
                       name.ends_with(".bias");
  const bool is_gain = name.ends_with(".gain");
  std::vector<double> values;
  if (is_gain) {
    values.assign(shape.size(), 1.0);
  } else if (is_bias) {
    values.assign(shape.size(), 0.0);
  } else {
    values = init.weights(shape);
  }
  params_.push_back(
      {name, Tensor(shape, std::move(values), /*requires_grad=*/true)});
  return static_cast<int>(params_.size() - 1);
}

Transformer::Transformer(const Config& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  ParamInit init(seed);
  const std::size_t d = cfg_.d_model;
  const std::size_t hd = cfg_.head_dim();
  const std::size_t ffn = cfg_.ffn_dim();

  embed_w_ = add_param("embed.w", {cfg_.n_features, d}, init);
  embed_b_ = add_param("embed.b", {1, d}, init);

  auto make_attn = [&](const std::string& prefix) {
    AttnIdx idx;
    for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
      HeadIdx head;
      const std::string hp = prefix + ".h" + std::to_string(h);
      head.wq = add_param(hp + ".wq", {d, hd}, init);
      head.wk = add_param(hp + ".wk", {d, hd}, init);
      head.wv = add_param(hp + ".wv", {d, hd}, init);
      idx.heads.push_back(head);
    }
    idx.wo = add_param(prefix + ".wo", {d, d}, init);
    idx.bo = add_param(prefix + ".bo", {1, d}, init);
    return idx;
  };
  auto make_ffn = [&](const std::string& prefix) {
    FfnIdx idx;
    idx.w1 = add_param(prefix + ".w1", {d, ffn}, init);
    idx.b1 = add_param(prefix + ".b1", {1, ffn}, init);
    idx.w2 = add_param(prefix + ".w2", {ffn, d}, init);
    idx.b2 = add_param(prefix + ".b2", {1, d}, init);
    return idx;
  };

  for (std::size_t i = 0; i < cfg_.n_encoder_blocks; ++i) {
    const std::string prefix = "encoder" + std::to_string(i);
    EncoderIdx enc;
    enc.self = make_attn(prefix + ".self");
    enc.ln1_g = add_param(prefix + ".ln1.gain", {1, d}, init);
    enc.ln1_b = add_param(prefix + ".ln1.bias", {1, d}, init);
    enc.ffn = make_ffn(prefix + ".ffn");
    enc.ln2_g = add_param(prefix + ".ln2.gain", {1, d}, init);
    enc.ln2_b = add_param(prefix + ".ln2.bias", {1, d}, init);
    encoders_.push_back(enc);
  }

  queries_ = add_param("dec.queries", {cfg_.output_len, d}, init);
  for (std::size_t i = 0; i < cfg_.n_decoder_blocks; ++i) {
    const std::string prefix = "decoder" + std::to_string(i);
    DecoderIdx dec;
    dec.self = make_attn(prefix + ".self");
    dec.ln1_g = add_param(prefix + ".ln1.gain", {1, d}, init);
    dec.ln1_b = add_param(prefix + ".ln1.bias", {1, d}, init);
    dec.cross = make_attn(prefix + ".cross");
    dec.ln2_g = add_param(prefix + ".ln2.gain", {1, d}, init);
    dec.ln2_b = add_param(prefix + ".ln2.bias", {1, d}, init);
    dec.ffn = make_ffn(prefix + ".ffn");
    dec.ln3_g = add_param(prefix + ".ln3.gain", {1, d}, init);
    dec.ln3_b = add_param(prefix + ".ln3.bias", {1, d}, init);
    decoders_.push_back(dec);
  }

  head_w_ = add_param("head.w", {d, 1}, init);
  head_b_ = add_param("head.b", {1, 1}, init);

  pos_table_ = positional_encoding(cfg_.input_len, d);
}

Tensor Transformer::attention_sublayer(Tape& tape, const AttnIdx& idx,
                                       const Tensor& q_in, const Tensor& k_in,
                                       const Tensor& v_in, std::size_t batch,
                                       bool causal, const std::string& label,
                                       AttentionDump* dump) const {
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(idx.heads.size());
  for (std::size_t h = 0; h < idx.heads.size(); ++h) {
    const HeadIdx& head = idx.heads[h];
    const Tensor qp = tape.matmul(q_in, p(head.wq));
    const Tensor kp = tape.matmul(k_in, p(head.wk));
    const Tensor vp = tape.matmul(v_in, p(head.wv));
    std::shared_ptr<const std::vector<double>> attn;
    head_outputs.push_back(attend_batch(tape, qp, kp, vp, batch, causal,
                                        dump ? &attn : nullptr));
    if (dump) {
      dump->records.push_back({label + ".head" + std::to_string(h),
                               qp.rows() / batch, kp.rows() / batch, batch,
                               std::move(attn)});
    }
  }
  const Tensor cat = tape.concat_cols(head_outputs);
  return tape.add_row(tape.matmul(cat, p(idx.wo)), p(idx.bo));
}

Tensor Transformer::ffn_sublayer(Tape& tape, const FfnIdx& idx,
                                 const Tensor& x) const {
  const Tensor hidden =
      tape.relu(tape.add_row(tape.matmul(x, p(idx.w1)), p(idx.b1)));
  return tape.add_row(tape.matmul(hidden, p(idx.w2)), p(idx.b2));
}

Tensor Transformer::forward(Tape& tape, const Tensor& input, std::size_t batch,
                            AttentionDump* dump) const {
  if (input.cols() != cfg_.n_features ||
      input.rows() != batch * cfg_.input_len) {
    throw ShapeError("forward: input must be [batch*" +
                     std::to_string(cfg_.input_len) + " x " +
                     std::to_string(cfg_.n_features) + "]");
  }
  Tensor x = tape.add_row(tape.matmul(input, p(embed_w_)), p(embed_b_));
  if (cfg_.positional_encoding) {
    x = tape.add(x, tape.tile_rows(pos_table_, batch));
  }
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    const EncoderIdx& enc = encoders_[i];
    const std::string label = "encoder" + std::to_string(i) + ".self";
    const Tensor attn = attention_sublayer(tape, enc.self, x, x, x, batch,
                                           /*causal=*/false, label, dump);
    x = tape.layer_norm(tape.add(x, attn), p(enc.ln1_g), p(enc.ln1_b),
                        cfg_.layer_norm_eps);
    const Tensor ffn = ffn_sublayer(tape, enc.ffn, x);
    x = tape.layer_norm(tape.add(x, ffn), p(enc.ln2_g), p(enc.ln2_b),
                        cfg_.layer_norm_eps);
  }

  Tensor y = tape.tile_rows(p(queries_), batch);
  for (std::size_t i = 0; i < decoders_.size(); ++i) {
    const DecoderIdx& dec = decoders_[i];
    const std::string base = "decoder" + std::to_string(i);
    const Tensor self = attention_sublayer(tape, dec.self, y, y, y, batch,
                                           /*causal=*/true, base + ".self",
                                           dump);
    y = tape.layer_norm(tape.add(y, self), p(dec.ln1_g), p(dec.ln1_b),
                        cfg_.layer_norm_eps);
    const Tensor cross = attention_sublayer(tape, dec.cross, y, x, x, batch,
                                            /*causal=*/false, base + ".cross",
                                            dump);
    y = tape.layer_norm(tape.add(y, cross), p(dec.ln2_g), p(dec.ln2_b),
                        cfg_.layer_norm_eps);
    const Tensor ffn = ffn_sublayer(tape, dec.ffn, y);
    y = tape.layer_norm(tape.add(y, ffn), p(dec.ln3_g), p(dec.ln3_b),
                        cfg_.layer_norm_eps);
  }

  const Tensor out = tape.add_row(tape.matmul(y, p(head_w_)), p(head_b_));
  return tape.reshape(out, {batch, cfg_.output_len});
}

Transformer Transformer::clone() const {
  Transformer copy(cfg_, /*seed=*/0);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    copy.params_[i].tensor = params_[i].tensor.clone();
  }
  return copy;
}

void Transformer::load_parameters(std::span<const num::Parameter> records) {
  for (const num::Parameter& record : records) {
    bool found = false;
    for (num::Parameter& own : params_) {
      if (own.name != record.name) continue;
      if (!(own.tensor.shape() == record.tensor.shape())) {
        throw ShapeError("load_parameters: shape mismatch for " + record.name);
      }
      std::copy(record.tensor.value().begin(), record.tensor.value().end(),
                own.tensor.value_mut().begin());
      found = true;
      break;
    }
    if (!found) {
      throw Error("load_parameters: unknown parameter " + record.name);
    }
  }
}

std::array<double, 24> attention_profile(std::span<const double> matrix,
                                         std::size_t rows, std::size_t cols) {
  if (matrix.size() != rows * cols) {
    throw ShapeError("attention_profile: size does not match rows*cols");
  }
  std::array<double, 24> profile{};
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      profile[j % 24] += matrix[i * cols + j];
      total += matrix[i * cols + j];
    }
  }
  if (total > 0.0) {
    for (double& v : profile) v /= total;
  }
  return profile;
}

void export_attention(const AttentionDump& dump,
                      const std::filesystem::path& dir, std::size_t sample) {
  std::filesystem::create_directories(dir);
  char buf[40];
  for (const AttentionRecord& record : dump.records) {
    if (sample >= record.batch) {
      throw Error("export_attention: sample index out of range for " +
                  record.label);
    }
    const auto path = dir / (record.label + ".txt");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << record.query_len << ',' << record.key_len << '\n';
    const auto m = record.sample(sample);
    for (std::size_t i = 0; i < record.query_len; ++i) {
      for (std::size_t j = 0; j < record.key_len; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", m[i * record.key_len + j]);
        out << buf << (j + 1 == record.key_len ? '\n' : ',');
      }
    }
    if (!out) throw IoError("write failed for " + path.string());
  }
}

num::Tensor read_attention_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty");
  std::size_t rows = 0, cols = 0;
  if (std::sscanf(line.c_str(), "%zu,%zu", &rows, &cols) != 2) {
    throw ParseError(path.string() + ": bad header '" + line + "'");
  }
  Tensor out = Tensor::zeros({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError(path.string() + ": truncated matrix");
    }
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!std::getline(ss, cell, ',')) {
        throw ParseError(path.string() + ": short row " + std::to_string(i));
      }
      out.at(i, j) = std::stod(cell);
    }
  }
  return out;
}

}  // namespace loadcast::model
