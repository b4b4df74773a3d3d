#include "pocr/codec.hpp"

#include <algorithm>
#include <cmath>

#include "pocr/errors.hpp"

namespace pocr {

Vocab::Vocab(VocabConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.coord_bins < 2) {
    throw RangeError("vocab needs at least 2 coordinate bins, got " +
                     std::to_string(cfg_.coord_bins));
  }
  first_char_ = static_cast<TokenId>(4 + cfg_.coord_bins);
  for (std::size_t i = 0; i < cfg_.alphabet.size(); ++i) {
    const char c = cfg_.alphabet[i];
    if (!char_ids_.emplace(c, first_char_ + static_cast<TokenId>(i)).second) {
      throw DataError(std::string("duplicate character '") + c + "' in alphabet");
    }
  }
  first_label_ = first_char_ + static_cast<TokenId>(cfg_.alphabet.size());
  for (std::size_t i = 0; i < cfg_.detection_labels.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg_.detection_labels.size(); ++j) {
      if (cfg_.detection_labels[i] == cfg_.detection_labels[j]) {
        throw DataError("duplicate detection label '" + cfg_.detection_labels[i] + "'");
      }
    }
  }
  size_ = 4 + cfg_.coord_bins + static_cast<std::int64_t>(cfg_.alphabet.size()) +
          static_cast<std::int64_t>(cfg_.detection_labels.size());
}

TokenId Vocab::coord_token(std::int64_t bin) const {
  if (bin < 1 || bin > cfg_.coord_bins) {
    throw RangeError("coordinate bin " + std::to_string(bin) + " outside [1, " +
                     std::to_string(cfg_.coord_bins) + "]");
  }
  return static_cast<TokenId>(3 + bin);
}

bool Vocab::is_coord(TokenId id) const {
  return id >= 4 && id < 4 + cfg_.coord_bins;
}

std::int64_t Vocab::coord_bin(TokenId id) const {
  if (!is_coord(id)) {
    throw RangeError("token " + std::to_string(id) + " is not a coordinate token");
  }
  return id - 3;
}

TokenId Vocab::char_token(char c) const {
  auto it = char_ids_.find(c);
  if (it == char_ids_.end()) {
    throw DataError(std::string("character '") + c + "' is outside the alphabet");
  }
  return it->second;
}

bool Vocab::has_char(char c) const { return char_ids_.count(c) > 0; }

bool Vocab::is_char(TokenId id) const {
  return id >= first_char_ && id < first_label_;
}

char Vocab::token_char(TokenId id) const {
  if (!is_char(id)) {
    throw RangeError("token " + std::to_string(id) + " is not a character token");
  }
  return cfg_.alphabet[static_cast<std::size_t>(id - first_char_)];
}

TokenId Vocab::label_token(const std::string& label) const {
  for (std::size_t i = 0; i < cfg_.detection_labels.size(); ++i) {
    if (cfg_.detection_labels[i] == label) {
      return first_label_ + static_cast<TokenId>(i);
    }
  }
  throw DataError("unknown detection label '" + label + "'");
}

bool Vocab::is_label(TokenId id) const {
  return id >= first_label_ && id < size_;
}

const std::string& Vocab::label_name(TokenId id) const {
  if (!is_label(id)) {
    throw RangeError("token " + std::to_string(id) + " is not a label token");
  }
  return cfg_.detection_labels[static_cast<std::size_t>(id - first_label_)];
}

TokenSequence Vocab::encode_text(const std::string& text) const {
  TokenSequence out;
  out.reserve(text.size());
  for (char c : text) out.push_back(char_token(c));
  return out;
}

std::string Vocab::decode_text(const TokenSequence& ids) const {
  std::string out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(token_char(id));
  return out;
}

Vocab build_vocab(const VocabConfig& cfg) { return Vocab(cfg); }

std::int64_t quantize_coord(double c, double dim, std::int64_t bins) {
  if (bins < 2) throw RangeError("quantizer needs at least 2 bins");
  if (dim < 1) throw RangeError("quantizer dimension must be >= 1");
  if (!(c >= 0.0 && c <= dim)) {
    throw RangeError("coordinate " + std::to_string(c) + " outside [0, " +
                     std::to_string(dim) + "]");
  }
  const auto bin = static_cast<std::int64_t>(
      std::floor(c / dim * static_cast<double>(bins))) + 1;
  return std::clamp<std::int64_t>(bin, 1, bins);
}

double dequantize_coord(std::int64_t bin, double dim, std::int64_t bins) {
  if (bin < 1 || bin > bins) {
    throw RangeError("bin " + std::to_string(bin) + " outside [1, " +
                     std::to_string(bins) + "]");
  }
  return (static_cast<double>(bin) - 0.5) / static_cast<double>(bins) * dim;
}

namespace {

struct BinnedInstance {
  std::int64_t cx_bin, cy_bin;
  const TextInstance* inst;
};

std::vector<BinnedInstance> raster_sorted(const std::vector<TextInstance>& instances,
                                          const QuantizerConfig& q) {
  std::vector<BinnedInstance> binned;
  binned.reserve(instances.size());
  for (const auto& inst : instances) {
    binned.push_back({quantize_coord(inst.center.x, q.width, q.bins),
                      quantize_coord(inst.center.y, q.height, q.bins), &inst});
  }
  std::sort(binned.begin(), binned.end(), [](const auto& a, const auto& b) {
    if (a.cy_bin != b.cy_bin) return a.cy_bin < b.cy_bin;
    if (a.cx_bin != b.cx_bin) return a.cx_bin < b.cx_bin;
    return a.inst->text < b.inst->text;
  });
  return binned;
}

void append_box_bins(TokenSequence& out, const Box& box, const QuantizerConfig& q,
                     const Vocab& v) {
  out.push_back(v.coord_token(quantize_coord(box.x1, q.width, q.bins)));
  out.push_back(v.coord_token(quantize_coord(box.y1, q.height, q.bins)));
  out.push_back(v.coord_token(quantize_coord(box.x2, q.width, q.bins)));
  out.push_back(v.coord_token(quantize_coord(box.y2, q.height, q.bins)));
}

}  // namespace

TokenSequence encode_spotting_target(const std::vector<TextInstance>& instances,
                                     const QuantizerConfig& q, const Vocab& v) {
  TokenSequence out{Vocab::kBos};
  for (const auto& b : raster_sorted(instances, q)) {
    if (b.inst->text.empty()) {
      throw DataError("spotting instance with empty transcription");
    }
    out.push_back(v.coord_token(b.cx_bin));
    out.push_back(v.coord_token(b.cy_bin));
    for (char c : b.inst->text) out.push_back(v.char_token(c));
    out.push_back(Vocab::kSep);
  }
  out.push_back(Vocab::kEos);
  return out;
}

TokenSequence encode_answer(const Sample& sample, const QuantizerConfig& q,
                            const Vocab& v) {
  TokenSequence out{Vocab::kBos};
  switch (sample.task) {
    case TaskKind::VqaCount: {
      if (!sample.answer_text) throw DataError("vqa sample without answer_text");
      for (char c : *sample.answer_text) out.push_back(v.char_token(c));
      break;
    }
    case TaskKind::Grounding: {
      if (!sample.answer_box) throw DataError("grounding sample without answer_box");
      if (!sample.answer_box->well_formed()) {
        throw DataError("grounding box is not well formed (x1<x2, y1<y2 required)");
      }
      append_box_bins(out, *sample.answer_box, q, v);
      break;
    }
    case TaskKind::Detection: {
      for (const auto& b : raster_sorted(sample.instances, q)) {
        if (!b.inst->box.well_formed()) {
          throw DataError("detection box is not well formed");
        }
        append_box_bins(out, b.inst->box, q, v);
        out.push_back(v.label_token(b.inst->text));
        out.push_back(Vocab::kSep);
      }
      break;
    }
    case TaskKind::Spotting:
      throw UsageError("spotting targets are encoded by encode_spotting_target");
  }
  out.push_back(Vocab::kEos);
  return out;
}

TokenSequence encode_target(const Sample& sample, const QuantizerConfig& q,
                            const Vocab& v) {
  if (sample.task == TaskKind::Spotting) {
    std::vector<TextInstance> words;
    for (const auto& inst : sample.instances) {
      if (inst.granularity == Granularity::Word) words.push_back(inst);
    }
    return encode_spotting_target(words, q, v);
  }
  return encode_answer(sample, q, v);
}

namespace {

class TokenCursor {
 public:
  TokenCursor(const TokenSequence& tokens, ParseOutcome& outcome)
      : tokens_(tokens), outcome_(outcome) {}

  bool done() const {
    return pos_ >= tokens_.size() || tokens_[pos_] == Vocab::kEos;
  }
  TokenId peek() const { return tokens_[pos_]; }
  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

  void skip_leading_bos() {
    if (!tokens_.empty() && tokens_[0] == Vocab::kBos && pos_ == 0) pos_ = 1;
  }

  // Diagnostics always reference a real token index.
  void issue(ParseIssueKind kind) {
    if (tokens_.empty()) return;
    outcome_.diagnostics.push_back(
        {kind, std::min(pos_, tokens_.size() - 1)});
  }

  // Skip forward past the next SEP; stops before EOS.
  void resync() {
    while (pos_ < tokens_.size() && tokens_[pos_] != Vocab::kSep &&
           tokens_[pos_] != Vocab::kEos) {
      ++pos_;
    }
    if (pos_ < tokens_.size() && tokens_[pos_] == Vocab::kSep) ++pos_;
  }

 private:
  const TokenSequence& tokens_;
  ParseOutcome& outcome_;
  std::size_t pos_ = 0;
};

void parse_spotting(TokenCursor& cur, const Vocab& v, ParseOutcome& out) {
  while (!cur.done()) {
    PredictedInstance inst;
    bool ok = true;
    for (int axis = 0; axis < 2 && ok; ++axis) {
      if (cur.done()) {
        cur.issue(ParseIssueKind::TruncatedInstance);
        return;
      }
      if (!v.is_coord(cur.peek())) {
        cur.issue(ParseIssueKind::CoordExpected);
        cur.resync();
        ok = false;
        break;
      }
      (axis == 0 ? inst.cx_bin : inst.cy_bin) = v.coord_bin(cur.peek());
      cur.advance();
    }
    if (!ok) continue;
    if (cur.done()) {
      cur.issue(ParseIssueKind::TruncatedInstance);
      return;
    }
    while (!cur.done() && v.is_char(cur.peek())) {
      inst.text.push_back(v.token_char(cur.peek()));
      cur.advance();
    }
    if (cur.done()) {
      cur.issue(ParseIssueKind::TruncatedInstance);
      return;
    }
    if (cur.peek() != Vocab::kSep) {
      cur.issue(ParseIssueKind::UnexpectedToken);
      cur.resync();
      continue;
    }
    if (inst.text.empty()) {
      cur.issue(ParseIssueKind::EmptyText);
      cur.advance();
      continue;
    }
    cur.advance();
    out.instances.push_back(std::move(inst));
  }
}

void parse_grounding(TokenCursor& cur, const Vocab& v, ParseOutcome& out) {
  std::vector<std::int64_t> bins;
  bool saw_junk = false;
  while (!cur.done()) {
    if (v.is_coord(cur.peek())) {
      bins.push_back(v.coord_bin(cur.peek()));
    } else {
      cur.issue(ParseIssueKind::UnexpectedToken);
      saw_junk = true;
    }
    cur.advance();
  }
  if (bins.size() != 4) {
    if (!bins.empty() || !saw_junk) cur.issue(ParseIssueKind::ArityMismatch);
    return;
  }
  if (bins[0] >= bins[2] || bins[1] >= bins[3]) {
    cur.issue(ParseIssueKind::InvalidBox);
    return;
  }
  out.box_bins = {bins[0], bins[1], bins[2], bins[3]};
}

void parse_vqa(TokenCursor& cur, const Vocab& v, ParseOutcome& out) {
  while (!cur.done()) {
    if (v.is_char(cur.peek())) {
      out.answer.push_back(v.token_char(cur.peek()));
    } else {
      cur.issue(ParseIssueKind::UnexpectedToken);
    }
    cur.advance();
  }
}

void parse_detection(TokenCursor& cur, const Vocab& v, ParseOutcome& out) {
  while (!cur.done()) {
    PredictedObject obj;
    bool ok = true;
    for (int k = 0; k < 4 && ok; ++k) {
      if (cur.done()) {
        cur.issue(ParseIssueKind::TruncatedInstance);
        return;
      }
      if (!v.is_coord(cur.peek())) {
        cur.issue(ParseIssueKind::CoordExpected);
        cur.resync();
        ok = false;
        break;
      }
      obj.box_bins[static_cast<std::size_t>(k)] = v.coord_bin(cur.peek());
      cur.advance();
    }
    if (!ok) continue;
    if (cur.done()) {
      cur.issue(ParseIssueKind::TruncatedInstance);
      return;
    }
    if (!v.is_label(cur.peek())) {
      cur.issue(ParseIssueKind::UnexpectedToken);
      cur.resync();
      continue;
    }
    obj.label = v.label_name(cur.peek());
    cur.advance();
    if (cur.done()) {
      cur.issue(ParseIssueKind::TruncatedInstance);
      return;
    }
    if (cur.peek() != Vocab::kSep) {
      cur.issue(ParseIssueKind::UnexpectedToken);
      cur.resync();
      continue;
    }
    cur.advance();
    if (obj.box_bins[0] >= obj.box_bins[2] || obj.box_bins[1] >= obj.box_bins[3]) {
      cur.issue(ParseIssueKind::InvalidBox);
      continue;
    }
    out.objects.push_back(std::move(obj));
  }
}

}  // namespace

ParseOutcome parse_output_sequence(const TokenSequence& tokens, TaskKind task,
                                   const QuantizerConfig& q, const Vocab& v) {
  (void)q;
  ParseOutcome out;
  out.task = task;
  TokenCursor cur(tokens, out);
  cur.skip_leading_bos();
  switch (task) {
    case TaskKind::Spotting: parse_spotting(cur, v, out); break;
    case TaskKind::Grounding: parse_grounding(cur, v, out); break;
    case TaskKind::VqaCount: parse_vqa(cur, v, out); break;
    case TaskKind::Detection: parse_detection(cur, v, out); break;
  }
  return out;
}

std::string parse_issue_name(ParseIssueKind kind) {
  switch (kind) {
    case ParseIssueKind::TruncatedInstance: return "TruncatedInstance";
    case ParseIssueKind::CoordExpected: return "CoordExpected";
    case ParseIssueKind::ArityMismatch: return "ArityMismatch";
    case ParseIssueKind::UnexpectedToken: return "UnexpectedToken";
    case ParseIssueKind::EmptyText: return "EmptyText";
    case ParseIssueKind::InvalidBox: return "InvalidBox";
  }
  throw Error("unreachable parse issue kind");
}

std::string render_prompt(TaskKind task, const std::string& argument) {
  switch (task) {
    case TaskKind::Spotting:
      return "Recognize all the text in the image and provide the exact "
             "coordinates of each detected text block";
    case TaskKind::Detection:
      return "Please perform object detection in the image and provide the "
             "coordinates of the bounding boxes for each detected object";
    case TaskKind::Grounding:
      if (argument.empty()) {
        throw UsageError("grounding prompt requires the queried text");
      }
      return "Where is the text \"" + argument + "\"?";
    case TaskKind::VqaCount:
      return "How many text instances are in the image?";
  }
  throw Error("unreachable task kind");
}

}  // namespace pocr
