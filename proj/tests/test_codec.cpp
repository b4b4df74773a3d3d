#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "pocr/codec.hpp"
#include "pocr/errors.hpp"
#include "pocr/rng.hpp"

using namespace pocr;

namespace {

const Vocab& default_vocab() {
  static Vocab v = build_vocab(VocabConfig{});
  return v;
}

TextInstance make_instance(double cx, double cy, std::string text) {
  TextInstance inst;
  inst.center = {cx, cy};
  inst.text = std::move(text);
  inst.box = {cx - 2, cy - 2, cx + 2, cy + 2};
  return inst;
}

}  // namespace

TEST_CASE("vocab layout is fixed and deterministic") {
  const Vocab& v = default_vocab();
  CHECK(Vocab::kPad == 0);
  CHECK(Vocab::kBos == 1);
  CHECK(Vocab::kEos == 2);
  CHECK(Vocab::kSep == 3);
  CHECK(v.coord_token(1) == 4);
  CHECK(v.size() == 1033);  // 4 + 1000 + 27 + 2

  Vocab again = build_vocab(VocabConfig{});
  CHECK(again.char_token('A') == v.char_token('A'));
  CHECK(again.char_token(' ') == v.char_token(' '));
  CHECK(again.label_token("square") == v.label_token("square"));
}

TEST_CASE("vocab rejects duplicate alphabet characters") {
  VocabConfig cfg;
  cfg.alphabet = "ABA";
  CHECK_THROWS_AS(build_vocab(cfg), DataError);
}

TEST_CASE("quantize_coord boundary and midpoint cases") {
  CHECK(quantize_coord(0, 64, 1000) == 1);
  CHECK(quantize_coord(64, 64, 1000) == 1000);
  CHECK(quantize_coord(64, 64, 10) == 10);
  CHECK(quantize_coord(32, 64, 1000) == 501);
  CHECK_THROWS_AS(quantize_coord(-0.1, 64, 1000), RangeError);
  CHECK_THROWS_AS(quantize_coord(64.1, 64, 1000), RangeError);
}

TEST_CASE("dequantize_coord bin centers") {
  CHECK(dequantize_coord(1, 64, 1000) == doctest::Approx(0.032).epsilon(1e-12));
  CHECK(dequantize_coord(1000, 64, 1000) ==
        doctest::Approx(64.0 * (1.0 - 1.0 / 2000.0)).epsilon(1e-12));
  CHECK_THROWS_AS(dequantize_coord(0, 64, 1000), RangeError);
  CHECK_THROWS_AS(dequantize_coord(1001, 64, 1000), RangeError);
}

TEST_CASE("quantization round trip stays within half a bin") {
  Rng rng(123);
  const double dim = 64;
  const std::int64_t bins = 1000;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double c = rng.uniform(0.0, dim);
    const double back = dequantize_coord(quantize_coord(c, dim, bins), dim, bins);
    worst = std::max(worst, std::abs(back - c));
  }
  CHECK(worst <= dim / (2.0 * bins) + 1e-9);
}

TEST_CASE("quantization is monotone") {
  Rng rng(77);
  for (int i = 0; i < 2000; ++i) {
    double a = rng.uniform(0.0, 64.0);
    double b = rng.uniform(0.0, 64.0);
    if (a > b) std::swap(a, b);
    CHECK(quantize_coord(a, 64, 1000) <= quantize_coord(b, 64, 1000));
  }
}

TEST_CASE("encode_spotting_target template instantiation") {
  const Vocab& v = default_vocab();
  QuantizerConfig q{1000, 1000, 1000};

  TokenSequence empty = encode_spotting_target({}, q, v);
  CHECK(empty == TokenSequence{Vocab::kBos, Vocab::kEos});

  TextInstance inst = make_instance(220.5, 255.5, "AB");
  TokenSequence seq = encode_spotting_target({inst}, q, v);
  TokenSequence expected{Vocab::kBos,        v.coord_token(221), v.coord_token(256),
                         v.char_token('A'),  v.char_token('B'),  Vocab::kSep,
                         Vocab::kEos};
  CHECK(seq == expected);
}

TEST_CASE("encode_spotting_target is invariant under input permutation") {
  const Vocab& v = default_vocab();
  QuantizerConfig q{1000, 64, 64};
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<TextInstance> instances;
    const int n = static_cast<int>(rng.uniform_int(0, 5));
    for (int i = 0; i < n; ++i) {
      std::string text;
      const int len = static_cast<int>(rng.uniform_int(1, 5));
      for (int k = 0; k < len; ++k) {
        text.push_back(static_cast<char>('A' + rng.uniform_int(0, 15)));
      }
      instances.push_back(make_instance(rng.uniform(2.0, 62.0), rng.uniform(2.0, 62.0),
                                        text));
    }
    TokenSequence a = encode_spotting_target(instances, q, v);
    // Deterministic shuffle of the input order.
    for (std::size_t i = instances.size(); i > 1; --i) {
      std::swap(instances[i - 1],
                instances[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    TokenSequence b = encode_spotting_target(instances, q, v);
    CHECK(a == b);
  }
}

TEST_CASE("encode_spotting_target names out-of-alphabet characters") {
  const Vocab& v = default_vocab();
  QuantizerConfig q{1000, 64, 64};
  try {
    encode_spotting_target({make_instance(10, 10, "Az")}, q, v);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("'z'") != std::string::npos);
  }
}

TEST_CASE("encode_answer per task") {
  const Vocab& v = default_vocab();
  QuantizerConfig q{1000, 1000, 1000};

  Sample grounding;
  grounding.task = TaskKind::Grounding;
  grounding.answer_box = Box{220.5, 255.5, 303.5, 282.5};
  TokenSequence g = encode_answer(grounding, q, v);
  TokenSequence expected{Vocab::kBos,        v.coord_token(221), v.coord_token(256),
                         v.coord_token(304), v.coord_token(283), Vocab::kEos};
  CHECK(g == expected);

  Sample vqa;
  vqa.task = TaskKind::VqaCount;
  vqa.answer_text = "3";
  CHECK(encode_answer(vqa, q, v) ==
        TokenSequence{Vocab::kBos, v.char_token('3'), Vocab::kEos});

  Sample det;
  det.task = TaskKind::Detection;
  CHECK(encode_answer(det, q, v) == TokenSequence{Vocab::kBos, Vocab::kEos});

  Sample bad;
  bad.task = TaskKind::Grounding;
  bad.answer_box = Box{10, 10, 10, 20};  // x1 == x2
  CHECK_THROWS_AS(encode_answer(bad, q, v), DataError);
}

TEST_CASE("spotting parse round trip over fuzzed instance sets") {
  const Vocab& v = default_vocab();
  QuantizerConfig q{1000, 64, 64};
  Rng rng(99);
  int cases = 0;
  while (cases < 10000) {
    std::vector<TextInstance> instances;
    const int n = static_cast<int>(rng.uniform_int(0, 6));
    for (int i = 0; i < n; ++i) {
      std::string text;
      const int len = static_cast<int>(rng.uniform_int(1, 5));
      const std::string& alphabet = v.config().alphabet;
      for (int k = 0; k < len; ++k) {
        text.push_back(alphabet[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(alphabet.size()) - 1))]);
      }
      instances.push_back(
          make_instance(rng.uniform(2.0, 62.0), rng.uniform(2.0, 62.0), text));
    }
    TokenSequence seq = encode_spotting_target(instances, q, v);
    ParseOutcome parsed = parse_output_sequence(seq, TaskKind::Spotting, q, v);
    REQUIRE(parsed.diagnostics.empty());
    REQUIRE(parsed.instances.size() == instances.size());
    // Parse order is the canonical raster order; rebuild it for comparison.
    std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, std::string>> want;
    for (const auto& inst : instances) {
      want.push_back({{quantize_coord(inst.center.y, q.height, q.bins),
                       quantize_coord(inst.center.x, q.width, q.bins)},
                      inst.text});
    }
    std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second < b.second;
    });
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(parsed.instances[i].cy_bin == want[i].first.first);
      CHECK(parsed.instances[i].cx_bin == want[i].first.second);
      CHECK(parsed.instances[i].text == want[i].second);
    }
    ++cases;
  }
}

TEST_CASE("parser handles truncation and arity errors as diagnostics") {
  const Vocab& v = default_vocab();
  QuantizerConfig q{1000, 64, 64};

  ParseOutcome truncated = parse_output_sequence(
      {Vocab::kBos, v.coord_token(5), Vocab::kEos}, TaskKind::Spotting, q, v);
  CHECK(truncated.instances.empty());
  REQUIRE(truncated.diagnostics.size() == 1);
  CHECK(truncated.diagnostics[0].kind == ParseIssueKind::TruncatedInstance);

  ParseOutcome arity = parse_output_sequence(
      {Vocab::kBos, v.coord_token(10), v.coord_token(20), v.coord_token(30),
       Vocab::kEos},
      TaskKind::Grounding, q, v);
  CHECK(!arity.box_bins.has_value());
  REQUIRE(arity.diagnostics.size() == 1);
  CHECK(arity.diagnostics[0].kind == ParseIssueKind::ArityMismatch);
}

TEST_CASE("parser salvages instances before the first fatal issue") {
  const Vocab& v = default_vocab();
  QuantizerConfig q{1000, 64, 64};
  // One good instance, then a character where a COORD is required.
  TokenSequence seq{Vocab::kBos,       v.coord_token(5), v.coord_token(6),
                    v.char_token('A'), Vocab::kSep,      v.char_token('B'),
                    v.char_token('C'), Vocab::kSep,      v.coord_token(9),
                    v.coord_token(9),  v.char_token('D'), Vocab::kSep,
                    Vocab::kEos};
  ParseOutcome out = parse_output_sequence(seq, TaskKind::Spotting, q, v);
  REQUIRE(out.instances.size() == 2);
  CHECK(out.instances[0].text == "A");
  CHECK(out.instances[1].text == "D");
  REQUIRE(out.diagnostics.size() == 1);
  CHECK(out.diagnostics[0].kind == ParseIssueKind::CoordExpected);
  CHECK(out.diagnostics[0].token_index == 5);
}

TEST_CASE("parsing is total over random token streams") {
  const Vocab& v = default_vocab();
  QuantizerConfig q{1000, 64, 64};
  Rng rng(2024);
  const TaskKind tasks[4] = {TaskKind::Spotting, TaskKind::Grounding,
                             TaskKind::VqaCount, TaskKind::Detection};
  for (int trial = 0; trial < 10000; ++trial) {
    TokenSequence tokens;
    const int len = static_cast<int>(rng.uniform_int(0, 40));
    for (int i = 0; i < len; ++i) {
      tokens.push_back(static_cast<TokenId>(rng.uniform_int(0, v.size() - 1)));
    }
    const TaskKind task = tasks[rng.uniform_int(0, 3)];
    ParseOutcome out = parse_output_sequence(tokens, task, q, v);
    for (const auto& diag : out.diagnostics) {
      CHECK(diag.token_index < tokens.size());
    }
  }
}

TEST_CASE("detection round trip") {
  const Vocab& v = default_vocab();
  QuantizerConfig q{1000, 64, 64};
  Sample det;
  det.task = TaskKind::Detection;
  TextInstance a;
  a.box = {4, 10, 20, 25};
  a.center = {12, 17.5};
  a.text = "circle";
  TextInstance b;
  b.box = {30, 40, 50, 60};
  b.center = {40, 50};
  b.text = "square";
  det.instances = {b, a};  // out of raster order on purpose

  TokenSequence seq = encode_answer(det, q, v);
  ParseOutcome out = parse_output_sequence(seq, TaskKind::Detection, q, v);
  CHECK(out.diagnostics.empty());
  REQUIRE(out.objects.size() == 2);
  CHECK(out.objects[0].label == "circle");
  CHECK(out.objects[1].label == "square");
  CHECK(out.objects[0].box_bins[0] == quantize_coord(4, 64, 1000));
  CHECK(out.objects[1].box_bins[3] == quantize_coord(60, 64, 1000));
}

TEST_CASE("render_prompt emits the exact task strings") {
  CHECK(render_prompt(TaskKind::Spotting) ==
        "Recognize all the text in the image and provide the exact coordinates "
        "of each detected text block");
  CHECK(render_prompt(TaskKind::Detection) ==
        "Please perform object detection in the image and provide the "
        "coordinates of the bounding boxes for each detected object");
  CHECK(render_prompt(TaskKind::Grounding, "AB") == "Where is the text \"AB\"?");
  CHECK(render_prompt(TaskKind::VqaCount) ==
        "How many text instances are in the image?");
  CHECK_THROWS_AS(render_prompt(TaskKind::Grounding), UsageError);
}
