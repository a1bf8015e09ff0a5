/**
 * Copyright 2026 The incprompt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// A small pre-norm vision transformer encoder. Scheduled layers accept a
// per-layer (P_k, P_v) prompt pair that is appended to the keys and values
// of every attention head; prompts are never emitted as output tokens.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "incprompt/attention.hpp"
#include "incprompt/core/errors.hpp"
#include "incprompt/core/ops.hpp"
#include "incprompt/core/random.hpp"
#include "incprompt/core/tape.hpp"

namespace incprompt {

struct BackboneConfig {
  int image_size = 16;
  int patch_size = 4;
  int channels = 3;
  int embed_dim = 32;
  int num_layers = 4;
  int num_heads = 4;
  double mlp_ratio = 4.0;
  bool frozen = true;

  int patches_per_side() const { return image_size / patch_size; }
  int num_patches() const { return patches_per_side() * patches_per_side(); }
  int patch_dim() const { return patch_size * patch_size * channels; }
  int seq_len() const { return 1 + num_patches(); }
  int head_dim() const { return embed_dim / num_heads; }
  int mlp_dim() const { return static_cast<int>(std::lround(mlp_ratio * embed_dim)); }

  void validate() const {
    require(image_size > 0 && patch_size > 0, "backbone: image_size and patch_size must be positive");
    require(image_size % patch_size == 0, "backbone: image_size must be divisible by patch_size");
    require(channels > 0, "backbone: channels must be positive");
    require(embed_dim > 0 && num_heads > 0, "backbone: embed_dim and num_heads must be positive");
    require(embed_dim % num_heads == 0, "backbone: embed_dim must be divisible by num_heads");
    require(num_layers >= 1, "backbone: num_layers must be >= 1");
    require(mlp_ratio > 0 && mlp_dim() > 0, "backbone: mlp_ratio must be positive");
  }
};

/// Which layers receive prompts and how many prompt tokens each gets.
struct PromptSchedule {
  std::vector<int> layers;
  int prompt_length = 0;

  /// Layers prompted as {0, .., depth-1}.
  static PromptSchedule first_layers(int depth, int length) {
    PromptSchedule s;
    for (int i = 0; i < depth; ++i) s.layers.push_back(i);
    s.prompt_length = length;
    return s;
  }

  bool active() const { return prompt_length > 0 && !layers.empty(); }
  int depth() const { return static_cast<int>(layers.size()); }

  /// Position of `layer` within `layers`, or -1.
  int slot(int layer) const {
    auto it = std::find(layers.begin(), layers.end(), layer);
    return it == layers.end() ? -1 : static_cast<int>(it - layers.begin());
  }

  void validate(int num_layers) const {
    require(prompt_length >= 0, "schedule: prompt_length must be >= 0");
    std::set<int> seen;
    for (int l : layers) {
      require(l >= 0 && l < num_layers,
              "schedule: layer " + std::to_string(l) + " outside [0, " + std::to_string(num_layers) + ")");
      require(seen.insert(l).second, "schedule: duplicate layer " + std::to_string(l));
    }
  }
};

/// Channel-last image; pixel (r, c, ch) lives at (r * width + c) * channels + ch.
template <typename Scalar>
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<Scalar> pixels;

  Scalar at(int r, int c, int ch) const { return pixels[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
  Scalar& at(int r, int c, int ch) { return pixels[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
};

/// Token states for a batch; one [seq_len, embed_dim] matrix per input.
template <typename Scalar>
struct TokenBatch {
  std::vector<Matrix<Scalar>> tokens;
  int layer_index = -1;
  bool includes_cls = true;

  std::size_t batch() const { return tokens.size(); }
  Eigen::Index seq_len() const { return tokens.empty() ? 0 : tokens.front().rows(); }
  Eigen::Index embed_dim() const { return tokens.empty() ? 0 : tokens.front().cols(); }
  bool all_finite() const {
    return std::all_of(tokens.begin(), tokens.end(), [](const auto& t) { return t.allFinite(); });
  }
};

/// Prompt pair injected into one layer, each [prompt_length, embed_dim].
template <typename Scalar>
struct LayerPrompt {
  Var<Scalar> key;
  Var<Scalar> value;
};

template <typename Scalar>
using LayerPrompts = std::map<int, LayerPrompt<Scalar>>;

enum class PoolMode { cls, mean };

inline std::string to_string(PoolMode m) { return m == PoolMode::cls ? "cls" : "mean"; }

inline PoolMode pool_mode_from_string(const std::string& s) {
  if (s == "cls") return PoolMode::cls;
  if (s == "mean") return PoolMode::mean;
  throw ConfigError("unknown pool mode '" + s + "'");
}

/// Class-token state or mean over all (non-prompt) tokens, as a 1xD row.
template <typename Scalar>
Var<Scalar> pool(const Var<Scalar>& tokens, PoolMode mode) {
  if (tokens.rows() == 0) throw ConfigError("pool: empty token sequence");
  return mode == PoolMode::cls ? ops::slice_rows(tokens, 0, 1) : ops::mean_rows(tokens);
}

template <typename Scalar>
Matrix<Scalar> pooled_feature(const TokenBatch<Scalar>& x, PoolMode mode) {
  if (x.batch() == 0) throw ConfigError("pooled_feature: empty batch");
  if (!x.all_finite()) throw NumericError("pooled_feature: non-finite tokens");
  Matrix<Scalar> out(static_cast<Eigen::Index>(x.batch()), x.embed_dim());
  for (std::size_t b = 0; b < x.batch(); ++b) {
    const auto& t = x.tokens[b];
    if (t.rows() == 0 || t.cols() != x.embed_dim()) throw ConfigError("pooled_feature: ragged batch");
    out.row(static_cast<Eigen::Index>(b)) = mode == PoolMode::cls ? Matrix<Scalar>(t.row(0)) : Matrix<Scalar>(t.colwise().mean());
  }
  return out;
}

template <typename Scalar>
struct EncoderBlock {
  Parameter<Scalar> ln1_gain, ln1_bias;
  Parameter<Scalar> wq, bq, wk, bk, wv, bv, wo, bo;
  Parameter<Scalar> ln2_gain, ln2_bias;
  Parameter<Scalar> w1, b1, w2, b2;

  template <typename F>
  void for_each_parameter(F&& f) {
    for (auto* p : {&ln1_gain, &ln1_bias, &wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo, &ln2_gain, &ln2_bias,
                    &w1, &b1, &w2, &b2}) {
      f(*p);
    }
  }
};

template <typename Scalar>
class Backbone {
 public:
  using Mat = Matrix<Scalar>;

  Backbone(const BackboneConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = derive_rng(seed, 0xB4C7B0E5ull);
    const int d = cfg_.embed_dim;
    const int m = cfg_.mlp_dim();
    patch_weight_ = {"patch.weight", xavier_uniform<Scalar>(cfg_.patch_dim(), d, rng)};
    patch_bias_ = {"patch.bias", Mat::Zero(1, d)};
    cls_token_ = {"cls_token", random_normal<Scalar>(1, d, Scalar(0.02), rng)};
    pos_embed_ = {"pos_embed", random_normal<Scalar>(cfg_.seq_len(), d, Scalar(0.02), rng)};
    blocks_.resize(static_cast<std::size_t>(cfg_.num_layers));
    for (int l = 0; l < cfg_.num_layers; ++l) {
      auto& b = blocks_[static_cast<std::size_t>(l)];
      const std::string pre = "block" + std::to_string(l) + ".";
      b.ln1_gain = {pre + "ln1.gain", Mat::Ones(1, d)};
      b.ln1_bias = {pre + "ln1.bias", Mat::Zero(1, d)};
      b.wq = {pre + "attn.wq", xavier_uniform<Scalar>(d, d, rng)};
      b.bq = {pre + "attn.bq", Mat::Zero(1, d)};
      b.wk = {pre + "attn.wk", xavier_uniform<Scalar>(d, d, rng)};
      b.bk = {pre + "attn.bk", Mat::Zero(1, d)};
      b.wv = {pre + "attn.wv", xavier_uniform<Scalar>(d, d, rng)};
      b.bv = {pre + "attn.bv", Mat::Zero(1, d)};
      b.wo = {pre + "attn.wo", xavier_uniform<Scalar>(d, d, rng)};
      b.bo = {pre + "attn.bo", Mat::Zero(1, d)};
      b.ln2_gain = {pre + "ln2.gain", Mat::Ones(1, d)};
      b.ln2_bias = {pre + "ln2.bias", Mat::Zero(1, d)};
      b.w1 = {pre + "mlp.w1", xavier_uniform<Scalar>(d, m, rng)};
      b.b1 = {pre + "mlp.b1", Mat::Zero(1, m)};
      b.w2 = {pre + "mlp.w2", xavier_uniform<Scalar>(m, d, rng)};
      b.b2 = {pre + "mlp.b2", Mat::Zero(1, d)};
    }
    final_gain_ = {"final_ln.gain", Mat::Ones(1, d)};
    final_bias_ = {"final_ln.bias", Mat::Zero(1, d)};
    set_frozen(cfg_.frozen);
  }

  const BackboneConfig& config() const { return cfg_; }

  void set_frozen(bool frozen) {
    cfg_.frozen = frozen;
    for_each_parameter([frozen](Parameter<Scalar>& p) { p.trainable = !frozen; });
  }

  template <typename F>
  void for_each_parameter(F&& f) {
    f(patch_weight_);
    f(patch_bias_);
    f(cls_token_);
    f(pos_embed_);
    for (auto& b : blocks_) b.for_each_parameter(f);
    f(final_gain_);
    f(final_bias_);
  }

  template <typename F>
  void for_each_parameter(F&& f) const {
    const_cast<Backbone*>(this)->for_each_parameter([&f](const Parameter<Scalar>& p) { f(p); });
  }

  /// Flattens an image into [num_patches, patch_dim] rows, patches in raster order.
  Mat patchify(const Image<Scalar>& img) const {
    if (img.height != cfg_.image_size || img.width != cfg_.image_size) {
      throw ConfigError("patch_embed: image is " + std::to_string(img.height) + "x" +
                        std::to_string(img.width) + ", expected " + std::to_string(cfg_.image_size));
    }
    if (img.channels != cfg_.channels) throw ConfigError("patch_embed: channel count mismatch");
    if (img.pixels.size() != static_cast<std::size_t>(img.height) * img.width * img.channels) {
      throw ConfigError("patch_embed: pixel buffer size mismatch");
    }
    const int p = cfg_.patch_size, side = cfg_.patches_per_side(), ch = cfg_.channels;
    Mat out(cfg_.num_patches(), cfg_.patch_dim());
    for (int pr = 0; pr < side; ++pr) {
      for (int pc = 0; pc < side; ++pc) {
        const int row = pr * side + pc;
        int col = 0;
        for (int r = 0; r < p; ++r) {
          for (int c = 0; c < p; ++c) {
            for (int k = 0; k < ch; ++k) out(row, col++) = img.at(pr * p + r, pc * p + c, k);
          }
        }
      }
    }
    return out;
  }

  /// Patch projection, class token, positional embedding: [seq_len, embed_dim].
  Var<Scalar> embed(Tape<Scalar>& tape, const Image<Scalar>& img) const {
    Var<Scalar> patches = ops::add_row(ops::matmul(tape.constant(patchify(img)), tape.parameter(patch_weight_)),
                                       tape.parameter(patch_bias_));
    Var<Scalar> seq = ops::concat_rows<Scalar>({tape.parameter(cls_token_), patches});
    return ops::add(seq, tape.parameter(pos_embed_));
  }

  /// Runs every block then the final norm. `layer_states`, when given,
  /// receives the output of each block before the final norm.
  Var<Scalar> encode(Var<Scalar> x, const LayerPrompts<Scalar>& prompts, const PromptSchedule& schedule,
                     std::vector<Mat>* layer_states = nullptr) const {
    if (x.cols() != cfg_.embed_dim) throw ConfigError("encode: token width differs from embed_dim");
    check_prompts(prompts, schedule);
    Tape<Scalar>& tape = x.tape();
    for (int l = 0; l < cfg_.num_layers; ++l) {
      const LayerPrompt<Scalar>* lp = nullptr;
      if (schedule.active() && schedule.slot(l) >= 0) lp = &prompts.at(l);
      x = block_forward(tape, blocks_[static_cast<std::size_t>(l)], x, lp);
      if (layer_states) layer_states->push_back(x.value());
    }
    return ops::layer_norm(x, tape.parameter(final_gain_), tape.parameter(final_bias_));
  }

  Var<Scalar> encode(Var<Scalar> x) const { return encode(x, {}, PromptSchedule{}); }

  TokenBatch<Scalar> patch_embed(const std::vector<Image<Scalar>>& images) const {
    TokenBatch<Scalar> out;
    out.layer_index = -1;
    for (const auto& img : images) {
      Tape<Scalar> tape(false);
      out.tokens.push_back(embed(tape, img).value());
    }
    return out;
  }

  /// Value-level encode. `prompts` maps a layer to its (P_k, P_v) pair.
  TokenBatch<Scalar> encode(const TokenBatch<Scalar>& x, const std::map<int, std::pair<Mat, Mat>>& prompts,
                            const PromptSchedule& schedule) const {
    if (!x.all_finite()) throw NumericError("encode: non-finite tokens");
    TokenBatch<Scalar> out;
    out.layer_index = cfg_.num_layers - 1;
    out.includes_cls = x.includes_cls;
    for (const auto& t : x.tokens) {
      Tape<Scalar> tape(false);
      LayerPrompts<Scalar> lp;
      for (const auto& [layer, pair] : prompts) lp[layer] = {tape.constant(pair.first), tape.constant(pair.second)};
      out.tokens.push_back(encode(tape.constant(t), lp, schedule).value());
    }
    return out;
  }

  TokenBatch<Scalar> encode(const TokenBatch<Scalar>& x) const { return encode(x, {}, PromptSchedule{}); }

 private:
  void check_prompts(const LayerPrompts<Scalar>& prompts, const PromptSchedule& schedule) const {
    schedule.validate(cfg_.num_layers);
    if (!schedule.active()) return;
    for (int l : schedule.layers) {
      auto it = prompts.find(l);
      if (it == prompts.end()) throw ConfigError("encode: no prompt for scheduled layer " + std::to_string(l));
      const auto& p = it->second;
      if (p.key.rows() != schedule.prompt_length || p.value.rows() != schedule.prompt_length) {
        throw ConfigError("encode: prompt length mismatch at layer " + std::to_string(l));
      }
      if (p.key.cols() != cfg_.embed_dim || p.value.cols() != cfg_.embed_dim) {
        throw ConfigError("encode: prompt width mismatch at layer " + std::to_string(l));
      }
    }
  }

  Var<Scalar> block_forward(Tape<Scalar>& tape, const EncoderBlock<Scalar>& b, const Var<Scalar>& x,
                            const LayerPrompt<Scalar>* prompt) const {
    using namespace ops;
    Var<Scalar> h = layer_norm(x, tape.parameter(b.ln1_gain), tape.parameter(b.ln1_bias));
    Var<Scalar> q = add_row(matmul(h, tape.parameter(b.wq)), tape.parameter(b.bq));
    Var<Scalar> k = add_row(matmul(h, tape.parameter(b.wk)), tape.parameter(b.bk));
    Var<Scalar> v = add_row(matmul(h, tape.parameter(b.wv)), tape.parameter(b.bv));
    const int dh = cfg_.head_dim();
    std::vector<Var<Scalar>> heads;
    heads.reserve(static_cast<std::size_t>(cfg_.num_heads));
    for (int hd = 0; hd < cfg_.num_heads; ++hd) {
      const Eigen::Index off = static_cast<Eigen::Index>(hd) * dh;
      Var<Scalar> qh = slice_cols(q, off, dh), kh = slice_cols(k, off, dh), vh = slice_cols(v, off, dh);
      if (prompt) {
        heads.push_back(prompted_attention(qh, kh, vh, slice_cols(prompt->key, off, dh),
                                           slice_cols(prompt->value, off, dh)));
      } else {
        heads.push_back(attention(qh, kh, vh));
      }
    }
    Var<Scalar> attn = heads.size() == 1 ? heads.front() : concat_cols(heads);
    Var<Scalar> r1 = add(x, add_row(matmul(attn, tape.parameter(b.wo)), tape.parameter(b.bo)));
    Var<Scalar> h2 = layer_norm(r1, tape.parameter(b.ln2_gain), tape.parameter(b.ln2_bias));
    Var<Scalar> m = gelu(add_row(matmul(h2, tape.parameter(b.w1)), tape.parameter(b.b1)));
    return add(r1, add_row(matmul(m, tape.parameter(b.w2)), tape.parameter(b.b2)));
  }

  BackboneConfig cfg_;
  Parameter<Scalar> patch_weight_, patch_bias_, cls_token_, pos_embed_;
  std::vector<EncoderBlock<Scalar>> blocks_;
  Parameter<Scalar> final_gain_, final_bias_;
};

}  // namespace incprompt
