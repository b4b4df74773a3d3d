#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pocr {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

enum class Granularity { Word, Phrase, Line, Block };

std::string granularity_name(Granularity g);
Granularity granularity_from_name(const std::string& name);

// Axis-aligned box in pixel coordinates, x1 < x2 and y1 < y2 when well formed.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double diagonal() const;
  bool well_formed() const { return x1 < x2 && y1 < y2; }
  bool contains(double x, double y) const {
    return x >= x1 && x <= x2 && y >= y1 && y <= y2;
  }
  bool operator==(const Box&) const = default;
};

struct Point {
  double x = 0, y = 0;
  bool operator==(const Point&) const = default;
};

double distance(const Point& a, const Point& b);

// One ground-truth or predicted text item.
struct TextInstance {
  Point center;
  std::string text;
  Box box;
  Granularity granularity = Granularity::Word;
  bool operator==(const TextInstance&) const = default;
};

enum class TaskKind { Spotting, Grounding, VqaCount, Detection };

std::string task_name(TaskKind task);
TaskKind task_from_name(const std::string& name);

// One task example. Detection objects reuse TextInstance with the class
// label stored in `text`.
struct Sample {
  std::string image;  // file name relative to the dataset directory
  std::int64_t width = 0;
  std::int64_t height = 0;
  TaskKind task = TaskKind::Spotting;
  std::string prompt;
  std::vector<TextInstance> instances;
  std::optional<Box> answer_box;          // grounding
  std::optional<std::string> answer_text; // vqa
  std::optional<Granularity> query_granularity;  // grounding bucket
  bool operator==(const Sample&) const = default;
};

}  // namespace pocr
