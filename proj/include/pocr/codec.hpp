#pragma once

#include <array>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pocr/types.hpp"

namespace pocr {

struct VocabConfig {
  std::string alphabet = "ABCDEFGHIJKLMNOP0123456789 ";
  std::int64_t coord_bins = 1000;
  std::vector<std::string> detection_labels = {"circle", "square"};
};

// Fixed id layout: PAD, BOS, EOS, SEP, COORD_1..COORD_B, alphabet characters
// in order, then detection class tokens. Deterministic for a given config.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kSep = 3;

  explicit Vocab(VocabConfig cfg);

  std::int64_t size() const { return size_; }
  std::int64_t bins() const { return cfg_.coord_bins; }
  const VocabConfig& config() const { return cfg_; }

  TokenId coord_token(std::int64_t bin) const;  // bin in [1, B]
  bool is_coord(TokenId id) const;
  std::int64_t coord_bin(TokenId id) const;

  TokenId char_token(char c) const;  // names the character when absent
  bool has_char(char c) const;
  bool is_char(TokenId id) const;
  char token_char(TokenId id) const;

  TokenId label_token(const std::string& label) const;
  bool is_label(TokenId id) const;
  const std::string& label_name(TokenId id) const;

  TokenSequence encode_text(const std::string& text) const;
  std::string decode_text(const TokenSequence& ids) const;

 private:
  VocabConfig cfg_;
  std::int64_t size_ = 0;
  TokenId first_char_ = 0;
  TokenId first_label_ = 0;
  std::unordered_map<char, TokenId> char_ids_;
};

Vocab build_vocab(const VocabConfig& cfg);

struct QuantizerConfig {
  std::int64_t bins = 1000;
  double width = 64;
  double height = 64;
};

// bin = clamp(floor(c/dim·B)+1, 1, B); c must lie in [0, dim].
std::int64_t quantize_coord(double c, double dim, std::int64_t bins);

// Bin-center reconstruction: c = (bin − 0.5)/B · dim.
double dequantize_coord(std::int64_t bin, double dim, std::int64_t bins);

// Targets. Spotting instances are serialized in raster order (cy bin, cx bin,
// then text) so the sequence is a deterministic function of the instance set.
TokenSequence encode_spotting_target(const std::vector<TextInstance>& instances,
                                     const QuantizerConfig& q, const Vocab& v);
TokenSequence encode_answer(const Sample& sample, const QuantizerConfig& q,
                            const Vocab& v);
// Dispatches on sample.task; spotting filters to word-granularity instances.
TokenSequence encode_target(const Sample& sample, const QuantizerConfig& q,
                            const Vocab& v);

enum class ParseIssueKind {
  TruncatedInstance,
  CoordExpected,
  ArityMismatch,
  UnexpectedToken,
  EmptyText,
  InvalidBox,
};

std::string parse_issue_name(ParseIssueKind kind);

struct ParseIssue {
  ParseIssueKind kind;
  std::size_t token_index;
  bool operator==(const ParseIssue&) const = default;
};

struct PredictedInstance {
  std::int64_t cx_bin = 0;
  std::int64_t cy_bin = 0;
  std::string text;
  bool operator==(const PredictedInstance&) const = default;
};

struct PredictedObject {
  std::array<std::int64_t, 4> box_bins{};  // x1, y1, x2, y2
  std::string label;
  bool operator==(const PredictedObject&) const = default;
};

struct ParseOutcome {
  TaskKind task = TaskKind::Spotting;
  std::vector<PredictedInstance> instances;          // spotting
  std::vector<PredictedObject> objects;              // detection
  std::optional<std::array<std::int64_t, 4>> box_bins;  // grounding
  std::string answer;                                // vqa
  std::vector<ParseIssue> diagnostics;
};

// Total over arbitrary token streams: never throws, instances complete
// before the first fatal issue are always returned.
ParseOutcome parse_output_sequence(const TokenSequence& tokens, TaskKind task,
                                   const QuantizerConfig& q, const Vocab& v);

// Task prompts; grounding and only grounding takes the queried text.
std::string render_prompt(TaskKind task, const std::string& argument = "");

}  // namespace pocr
