#include "pocr/types.hpp"

#include <cmath>

#include "pocr/errors.hpp"

namespace pocr {

std::string granularity_name(Granularity g) {
  switch (g) {
    case Granularity::Word: return "word";
    case Granularity::Phrase: return "phrase";
    case Granularity::Line: return "line";
    case Granularity::Block: return "block";
  }
  throw Error("unreachable granularity");
}

Granularity granularity_from_name(const std::string& name) {
  if (name == "word") return Granularity::Word;
  if (name == "phrase") return Granularity::Phrase;
  if (name == "line") return Granularity::Line;
  if (name == "block") return Granularity::Block;
  throw DataError("unknown granularity '" + name + "'");
}

double Box::diagonal() const { return std::hypot(width(), height()); }

double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

std::string task_name(TaskKind task) {
  switch (task) {
    case TaskKind::Spotting: return "spotting";
    case TaskKind::Grounding: return "grounding";
    case TaskKind::VqaCount: return "vqa_count";
    case TaskKind::Detection: return "detection";
  }
  throw Error("unreachable task kind");
}

TaskKind task_from_name(const std::string& name) {
  if (name == "spotting") return TaskKind::Spotting;
  if (name == "grounding") return TaskKind::Grounding;
  if (name == "vqa_count" || name == "vqa") return TaskKind::VqaCount;
  if (name == "detection") return TaskKind::Detection;
  throw DataError("unknown task '" + name + "'");
}

}  // namespace pocr
