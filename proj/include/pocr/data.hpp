#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pocr/image.hpp"
#include "pocr/types.hpp"

namespace pocr {

// Normalized internally; proportions steer task assignment per index.
struct TaskMix {
  double spotting = 1.0;
  double grounding = 0.0;
  double vqa_count = 0.0;
  double detection = 0.0;
};

struct GeneratorConfig {
  std::uint64_t seed = 0;
  std::int64_t canvas_width = 64;
  std::int64_t canvas_height = 64;
  std::int64_t min_word_len = 1;
  std::int64_t max_word_len = 5;
  std::int64_t min_instances = 1;
  std::int64_t max_instances = 6;
  std::vector<std::int64_t> scales = {1, 2};
  TaskMix mix;
};

struct GeneratedSample {
  Sample sample;
  ImageU8 image;
};

// Deterministic function of (cfg.seed, index). Text scenes render glyph
// words, group some into lines, and record per-word and per-line instances;
// detection scenes render labelled shapes. Placement failures regenerate the
// scene with a perturbed sub-seed, never fail outward.
GeneratedSample generate_scene(const GeneratorConfig& cfg, std::int64_t index);

// Block-striped task assignment matching the mix within rounding.
TaskKind task_for_index(const TaskMix& mix, std::int64_t index);

// On-disk layout: <dir>/images/*.pgm plus <dir>/annotations.jsonl with one
// object per sample. read ∘ write is the identity.
void write_dataset(const std::vector<GeneratedSample>& samples,
                   const std::string& dir);
std::vector<Sample> read_dataset(const std::string& dir);
ImageU8 load_sample_image(const std::string& dir, const Sample& sample);

std::string sample_to_json(const Sample& sample);
Sample sample_from_json(const std::string& line);

// The 5×7 glyph bitmaps behind text rendering, exposed for tests.
const std::vector<std::string>& glyph_rows(char c);

}  // namespace pocr
