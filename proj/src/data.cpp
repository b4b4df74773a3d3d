#include "pocr/data.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "pocr/codec.hpp"
#include "pocr/errors.hpp"
#include "pocr/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pocr {

namespace {

const std::map<char, std::vector<std::string>> kGlyphs = {
    {'A', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
    {'B', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
    {'C', {".####", "#....", "#....", "#....", "#....", "#....", ".####"}},
    {'D', {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."}},
    {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
    {'F', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
    {'G', {".####", "#....", "#....", "#.###", "#...#", "#...#", ".###."}},
    {'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
    {'I', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####"}},
    {'J', {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."}},
    {'K', {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"}},
    {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
    {'M', {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"}},
    {'N', {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"}},
    {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
    {'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
};

constexpr std::int64_t kGlyphWidth = 5;
constexpr std::int64_t kGlyphHeight = 7;
constexpr std::int64_t kWordGapCells = 6;  // inter-word gap in a line, ×scale

std::int64_t word_pixel_width(std::int64_t chars, std::int64_t scale) {
  return scale * (6 * chars - 1);  // glyph cells of 5 plus 1-cell gaps
}

void draw_glyph(ImageU8& img, char c, std::int64_t x, std::int64_t y,
                std::int64_t scale) {
  const auto& rows = glyph_rows(c);
  for (std::int64_t gy = 0; gy < kGlyphHeight; ++gy) {
    for (std::int64_t gx = 0; gx < kGlyphWidth; ++gx) {
      if (rows[static_cast<std::size_t>(gy)][static_cast<std::size_t>(gx)] != '#') {
        continue;
      }
      for (std::int64_t sy = 0; sy < scale; ++sy) {
        for (std::int64_t sx = 0; sx < scale; ++sx) {
          img.set(x + gx * scale + sx, y + gy * scale + sy, 255);
        }
      }
    }
  }
}

void draw_word(ImageU8& img, const std::string& word, std::int64_t x,
               std::int64_t y, std::int64_t scale) {
  for (std::size_t i = 0; i < word.size(); ++i) {
    draw_glyph(img, word[i], x + static_cast<std::int64_t>(i) * 6 * scale, y,
               scale);
  }
}

bool boxes_collide(const Box& a, const Box& b, double margin) {
  return a.x1 - margin < b.x2 && b.x1 - margin < a.x2 && a.y1 - margin < b.y2 &&
         b.y1 - margin < a.y2;
}

struct LineLayout {
  std::vector<std::string> words;
  std::int64_t scale = 1;
  std::int64_t x = 0, y = 0;  // top-left of the whole group
  std::int64_t width = 0, height = 0;
};

std::string random_word(Rng& rng, const GeneratorConfig& cfg) {
  const std::int64_t len = rng.uniform_int(cfg.min_word_len, cfg.max_word_len);
  std::string word;
  for (std::int64_t i = 0; i < len; ++i) {
    word.push_back(static_cast<char>('A' + rng.uniform_int(0, 15)));
  }
  return word;
}

// One attempt at a full text scene; nullopt when a placement cap is hit.
struct TextScene {
  ImageU8 image;
  std::vector<TextInstance> words;
  std::vector<TextInstance> lines;
};

std::optional<TextScene> try_text_scene(Rng& rng, const GeneratorConfig& cfg) {
  TextScene scene;
  scene.image = make_image(cfg.canvas_width, cfg.canvas_height, 0);

  const std::int64_t word_count =
      rng.uniform_int(cfg.min_instances, cfg.max_instances);

  // Partition the words into line groups of 1-3.
  std::vector<std::int64_t> groups;
  std::int64_t remaining = word_count;
  while (remaining > 0) {
    const double roll = rng.uniform();
    std::int64_t k = roll < 0.60 ? 1 : (roll < 0.85 ? 2 : 3);
    k = std::min(k, remaining);
    groups.push_back(k);
    remaining -= k;
  }

  std::vector<Box> occupied;
  for (std::int64_t k : groups) {
    LineLayout line;
    line.scale = cfg.scales[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(cfg.scales.size()) - 1))];
    for (std::int64_t i = 0; i < k; ++i) line.words.push_back(random_word(rng, cfg));

    line.height = kGlyphHeight * line.scale;
    line.width = 0;
    for (std::size_t i = 0; i < line.words.size(); ++i) {
      line.width += word_pixel_width(
          static_cast<std::int64_t>(line.words[i].size()), line.scale);
      if (i + 1 < line.words.size()) line.width += kWordGapCells * line.scale;
    }
    if (line.width > cfg.canvas_width - 2 || line.height > cfg.canvas_height - 2) {
      return std::nullopt;  // cannot fit at this scale; redraw the scene
    }

    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      line.x = rng.uniform_int(1, cfg.canvas_width - line.width - 1);
      line.y = rng.uniform_int(1, cfg.canvas_height - line.height - 1);
      Box candidate{static_cast<double>(line.x), static_cast<double>(line.y),
                    static_cast<double>(line.x + line.width),
                    static_cast<double>(line.y + line.height)};
      bool collision = false;
      for (const Box& other : occupied) {
        if (boxes_collide(candidate, other, 1.0)) {
          collision = true;
          break;
        }
      }
      if (!collision) {
        occupied.push_back(candidate);
        placed = true;
      }
    }
    if (!placed) return std::nullopt;

    // Render and record word instances; the group becomes a line instance
    // when it holds more than one word.
    std::int64_t x = line.x;
    std::string line_text;
    for (std::size_t i = 0; i < line.words.size(); ++i) {
      const auto& word = line.words[i];
      const std::int64_t w =
          word_pixel_width(static_cast<std::int64_t>(word.size()), line.scale);
      draw_word(scene.image, word, x, line.y, line.scale);
      TextInstance inst;
      inst.text = word;
      inst.box = {static_cast<double>(x), static_cast<double>(line.y),
                  static_cast<double>(x + w),
                  static_cast<double>(line.y + line.height)};
      inst.center = {inst.box.x1 + inst.box.width() / 2.0,
                     inst.box.y1 + inst.box.height() / 2.0};
      inst.granularity = Granularity::Word;
      scene.words.push_back(inst);

      if (!line_text.empty()) line_text.push_back(' ');
      line_text += word;
      x += w + kWordGapCells * line.scale;
    }
    if (line.words.size() > 1) {
      TextInstance inst;
      inst.text = line_text;
      inst.box = {static_cast<double>(line.x), static_cast<double>(line.y),
                  static_cast<double>(line.x + line.width),
                  static_cast<double>(line.y + line.height)};
      inst.center = {inst.box.x1 + inst.box.width() / 2.0,
                     inst.box.y1 + inst.box.height() / 2.0};
      inst.granularity = Granularity::Line;
      scene.lines.push_back(inst);
    }
  }
  return scene;
}

void draw_shape(ImageU8& img, const std::string& label, const Box& box) {
  if (label == "circle") {
    const double cx = box.x1 + box.width() / 2.0;
    const double cy = box.y1 + box.height() / 2.0;
    const double r = box.width() / 2.0;
    for (std::int64_t y = static_cast<std::int64_t>(box.y1);
         y < static_cast<std::int64_t>(box.y2); ++y) {
      for (std::int64_t x = static_cast<std::int64_t>(box.x1);
           x < static_cast<std::int64_t>(box.x2); ++x) {
        const double dx = x + 0.5 - cx;
        const double dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= r * r) img.set(x, y, 255);
      }
    }
  } else {  // square
    for (std::int64_t y = static_cast<std::int64_t>(box.y1);
         y < static_cast<std::int64_t>(box.y2); ++y) {
      for (std::int64_t x = static_cast<std::int64_t>(box.x1);
           x < static_cast<std::int64_t>(box.x2); ++x) {
        img.set(x, y, 255);
      }
    }
  }
}

std::optional<std::pair<ImageU8, std::vector<TextInstance>>> try_detection_scene(
    Rng& rng, const GeneratorConfig& cfg) {
  ImageU8 img = make_image(cfg.canvas_width, cfg.canvas_height, 0);
  std::vector<TextInstance> objects;
  const std::int64_t count = rng.uniform_int(cfg.min_instances, cfg.max_instances);
  std::vector<Box> occupied;
  for (std::int64_t i = 0; i < count; ++i) {
    const std::string label = rng.uniform() < 0.5 ? "circle" : "square";
    const std::int64_t side = rng.uniform_int(8, 18);
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      const std::int64_t x = rng.uniform_int(1, cfg.canvas_width - side - 1);
      const std::int64_t y = rng.uniform_int(1, cfg.canvas_height - side - 1);
      Box candidate{static_cast<double>(x), static_cast<double>(y),
                    static_cast<double>(x + side), static_cast<double>(y + side)};
      bool collision = false;
      for (const Box& other : occupied) {
        if (boxes_collide(candidate, other, 1.0)) {
          collision = true;
          break;
        }
      }
      if (collision) continue;
      occupied.push_back(candidate);
      draw_shape(img, label, candidate);
      TextInstance inst;
      inst.text = label;
      inst.box = candidate;
      inst.center = {candidate.x1 + candidate.width() / 2.0,
                     candidate.y1 + candidate.height() / 2.0};
      inst.granularity = Granularity::Word;
      objects.push_back(inst);
      placed = true;
    }
    if (!placed) return std::nullopt;
  }
  return std::make_pair(std::move(img), std::move(objects));
}

std::string image_name(std::int64_t index) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "images/scene_%06lld.pgm",
                static_cast<long long>(index));
  return buf;
}

// Grounding queries target texts that occur exactly once in the scene.
std::vector<const TextInstance*> unique_candidates(
    const std::vector<TextInstance>& words, const std::vector<TextInstance>& lines,
    Granularity g) {
  std::map<std::string, int> counts;
  for (const auto& w : words) counts[w.text]++;
  for (const auto& l : lines) counts[l.text]++;
  std::vector<const TextInstance*> out;
  const auto& pool = g == Granularity::Word ? words : lines;
  for (const auto& inst : pool) {
    if (counts[inst.text] == 1) out.push_back(&inst);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& glyph_rows(char c) {
  auto it = kGlyphs.find(c);
  if (it == kGlyphs.end()) {
    throw RangeError(std::string("no glyph for character '") + c + "'");
  }
  return it->second;
}

TaskKind task_for_index(const TaskMix& mix, std::int64_t index) {
  const double total = mix.spotting + mix.grounding + mix.vqa_count + mix.detection;
  if (total <= 0) throw RangeError("task mix proportions sum to zero");
  const std::array<double, 4> p = {mix.spotting / total, mix.grounding / total,
                                   mix.vqa_count / total, mix.detection / total};
  const std::array<TaskKind, 4> kinds = {TaskKind::Spotting, TaskKind::Grounding,
                                         TaskKind::VqaCount, TaskKind::Detection};
  // Greedy quota fill over a repeating block of 100 slots.
  constexpr int kBlock = 100;
  const int slot = static_cast<int>(index % kBlock);
  std::array<int, 4> assigned = {0, 0, 0, 0};
  for (int j = 0; j <= slot; ++j) {
    int best = 0;
    double best_deficit = -1e300;
    for (int t = 0; t < 4; ++t) {
      const double deficit = p[static_cast<std::size_t>(t)] * (j + 1) -
                             assigned[static_cast<std::size_t>(t)];
      if (deficit > best_deficit + 1e-12) {
        best_deficit = deficit;
        best = t;
      }
    }
    if (j == slot) return kinds[static_cast<std::size_t>(best)];
    assigned[static_cast<std::size_t>(best)]++;
  }
  return kinds[0];
}

GeneratedSample generate_scene(const GeneratorConfig& cfg, std::int64_t index) {
  if (cfg.min_instances < 0 || cfg.max_instances < cfg.min_instances ||
      cfg.min_word_len < 1 || cfg.max_word_len < cfg.min_word_len ||
      cfg.scales.empty()) {
    throw RangeError("invalid generator configuration");
  }
  const TaskKind task = task_for_index(cfg.mix, index);

  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng = Rng::for_stream(cfg.seed,
                              static_cast<std::uint64_t>(index) * 1009 + attempt);
    GeneratedSample out;
    out.sample.image = image_name(index);
    out.sample.width = cfg.canvas_width;
    out.sample.height = cfg.canvas_height;
    out.sample.task = task;

    if (task == TaskKind::Detection) {
      auto scene = try_detection_scene(rng, cfg);
      if (!scene) continue;
      out.image = std::move(scene->first);
      out.sample.instances = std::move(scene->second);
      out.sample.prompt = render_prompt(TaskKind::Detection);
      return out;
    }

    auto scene = try_text_scene(rng, cfg);
    if (!scene) continue;
    out.image = std::move(scene->image);

    switch (task) {
      case TaskKind::Spotting: {
        out.sample.instances = scene->words;
        out.sample.instances.insert(out.sample.instances.end(),
                                    scene->lines.begin(), scene->lines.end());
        out.sample.prompt = render_prompt(TaskKind::Spotting);
        return out;
      }
      case TaskKind::VqaCount: {
        out.sample.prompt = render_prompt(TaskKind::VqaCount);
        out.sample.answer_text = std::to_string(scene->words.size());
        return out;
      }
      case TaskKind::Grounding: {
        // Query a line when one is available and the coin says so; the
        // queried text must be unique in the scene.
        const bool want_line =
            !scene->lines.empty() && rng.uniform() < 0.5;
        auto candidates = unique_candidates(
            scene->words, scene->lines,
            want_line ? Granularity::Line : Granularity::Word);
        if (candidates.empty()) {
          candidates = unique_candidates(
              scene->words, scene->lines,
              want_line ? Granularity::Word : Granularity::Line);
        }
        if (candidates.empty()) continue;  // all texts ambiguous; redraw
        const TextInstance* target = candidates[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1))];
        out.sample.prompt = render_prompt(TaskKind::Grounding, target->text);
        out.sample.answer_box = target->box;
        out.sample.instances = {*target};
        out.sample.query_granularity = target->granularity;
        return out;
      }
      default:
        throw Error("unreachable task in generate_scene");
    }
  }
}

std::string sample_to_json(const Sample& sample) {
  json j;
  j["image"] = sample.image;
  j["width"] = sample.width;
  j["height"] = sample.height;
  j["task"] = task_name(sample.task);
  j["prompt"] = sample.prompt;
  if (!sample.instances.empty()) {
    json arr = json::array();
    for (const auto& inst : sample.instances) {
      json ji;
      ji["cx"] = inst.center.x;
      ji["cy"] = inst.center.y;
      ji["text"] = inst.text;
      ji["box"] = {inst.box.x1, inst.box.y1, inst.box.x2, inst.box.y2};
      ji["granularity"] = granularity_name(inst.granularity);
      arr.push_back(std::move(ji));
    }
    j["instances"] = std::move(arr);
  }
  if (sample.answer_box) {
    j["answer_box"] = {sample.answer_box->x1, sample.answer_box->y1,
                       sample.answer_box->x2, sample.answer_box->y2};
  }
  if (sample.answer_text) j["answer_text"] = *sample.answer_text;
  return j.dump();
}

Sample sample_from_json(const std::string& line) {
  const json j = json::parse(line);
  Sample s;
  s.image = j.at("image").get<std::string>();
  s.width = j.at("width").get<std::int64_t>();
  s.height = j.at("height").get<std::int64_t>();
  s.task = task_from_name(j.at("task").get<std::string>());
  s.prompt = j.at("prompt").get<std::string>();
  if (j.contains("instances")) {
    for (const auto& ji : j.at("instances")) {
      TextInstance inst;
      inst.center = {ji.at("cx").get<double>(), ji.at("cy").get<double>()};
      inst.text = ji.at("text").get<std::string>();
      const auto& box = ji.at("box");
      inst.box = {box.at(0).get<double>(), box.at(1).get<double>(),
                  box.at(2).get<double>(), box.at(3).get<double>()};
      inst.granularity = granularity_from_name(ji.at("granularity").get<std::string>());
      s.instances.push_back(std::move(inst));
    }
  }
  if (j.contains("answer_box")) {
    const auto& box = j.at("answer_box");
    s.answer_box = Box{box.at(0).get<double>(), box.at(1).get<double>(),
                       box.at(2).get<double>(), box.at(3).get<double>()};
  }
  if (j.contains("answer_text")) s.answer_text = j.at("answer_text").get<std::string>();
  if (s.task == TaskKind::Grounding && !s.instances.empty()) {
    s.query_granularity = s.instances.front().granularity;
  }
  return s;
}

void write_dataset(const std::vector<GeneratedSample>& samples,
                   const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "images", ec);
  if (ec) throw DataError("cannot create dataset directory '" + dir + "'");
  std::ofstream ann(fs::path(dir) / "annotations.jsonl");
  if (!ann) throw DataError("cannot write annotations in '" + dir + "'");
  for (const auto& gs : samples) {
    write_pgm(gs.image, (fs::path(dir) / gs.sample.image).string());
    ann << sample_to_json(gs.sample) << "\n";
  }
  if (!ann) throw DataError("failed while writing annotations in '" + dir + "'");
}

std::vector<Sample> read_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw DataError("dataset directory '" + dir + "' does not exist");
  }
  const fs::path ann_path = fs::path(dir) / "annotations.jsonl";
  std::vector<Sample> samples;
  if (!fs::exists(ann_path)) return samples;
  std::ifstream ann(ann_path);
  if (!ann) throw DataError("cannot open '" + ann_path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ann, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      samples.push_back(sample_from_json(line));
    } catch (const json::exception& e) {
      throw DataError("malformed annotation at " + ann_path.string() + ":" +
                      std::to_string(line_no) + ": " + e.what());
    }
    const fs::path img = fs::path(dir) / samples.back().image;
    if (!fs::exists(img)) {
      throw DataError("missing image file '" + img.string() + "' referenced at " +
                      ann_path.string() + ":" + std::to_string(line_no));
    }
  }
  return samples;
}

ImageU8 load_sample_image(const std::string& dir, const Sample& sample) {
  return read_pgm((fs::path(dir) / sample.image).string());
}

}  // namespace pocr
