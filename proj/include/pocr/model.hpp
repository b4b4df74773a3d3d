#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pocr/image.hpp"
#include "pocr/ops.hpp"
#include "pocr/optim.hpp"
#include "pocr/tensor.hpp"
#include "pocr/types.hpp"

namespace pocr {

enum class Phase { Init, P1, P2, P3 };

std::string phase_name(Phase phase);
Phase phase_from_name(const std::string& name);

struct ModelConfig {
  Index image_width = 64;
  Index image_height = 64;
  Index patch_size = 8;
  Index enc_dim = 64;
  Index enc_layers = 2;
  Index enc_heads = 4;
  Index ctx_dim = 96;
  Index ctx_layers = 2;
  Index ctx_heads = 4;
  Index dec_dim = 64;
  Index dec_layers = 2;
  Index dec_heads = 4;
  Index vocab_size = 1033;
  Index max_gen_len = 256;
  Index max_prompt_len = 160;
  Index mlp_ratio = 4;
  bool context_enabled = true;

  Index patch_count() const {
    return (image_width / patch_size) * (image_height / patch_size);
  }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Prompt characters feed the context module as raw ASCII codes.
constexpr Index kPromptAlphabetSize = 128;

// Named parameter collection. Context-module tensors (prefix "ctx.") stand in
// for the frozen language model and are trainable only during its dedicated
// pretraining step.
class ModelParams {
 public:
  ModelParams(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  const std::map<std::string, Tensor>& named() const { return tensors_; }
  std::vector<NamedTensor> named_list() const;

  static bool is_context_tensor(const std::string& name);

  // Phase-dependent trainable set: P1 trains encoder, memory projection and
  // decoder; P2/P3 additionally train both connectors. "ctx." stays frozen in
  // every phase (Init freezes everything).
  void apply_phase_freezing(Phase phase);

  // Makes exactly the context module trainable, for its pretraining step.
  void freeze_all_except_context();

  std::vector<std::uint8_t> serialize_context_bytes() const;

 private:
  void add(const std::string& name, std::vector<Index> shape, double stddev,
           double fill, bool random, std::uint64_t seed);
  ModelConfig cfg_;
  std::map<std::string, Tensor> tensors_;
};

Index count_trainable_params(const ModelParams& params);

struct VisualFeatures {
  Tensor features;  // [N_patches × enc_dim], positions already applied
};

VisualFeatures encode_image(const ImageU8& image, const ModelParams& params);

// Causal transformer over [connector_in(visual) ; prompt char embeddings];
// returns every final hidden state, [M × ctx_dim], M = N_patches + len(prompt).
Tensor run_context(const std::string& prompt, const VisualFeatures& visual,
                   const ModelParams& params);

// P1: projected visual features. P2/P3: [projected visual ; connector_out(context)].
Tensor assemble_memory(const VisualFeatures& visual,
                       const std::optional<Tensor>& context_states,
                       const ModelParams& params, Phase phase);

// Causal self-attention over the embedded prefix plus cross-attention to
// memory; logits for every prefix position, [L × vocab].
Tensor decoder_forward(const TokenSequence& target_prefix, const Tensor& memory,
                       const ModelParams& params);

// Greedy argmax decoding from [BOS]; ties break to the lowest token id. The
// returned sequence excludes BOS and includes EOS when it was emitted.
TokenSequence greedy_generate(const ImageU8& image, const std::string& prompt,
                              const ModelParams& params, Phase phase);

}  // namespace pocr
