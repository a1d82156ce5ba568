#pragma once

// Margin-gated emotion segmentation over sentence-level emotion
// probabilities, the threshold sweep, and the QA answer-filtering predicates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "affectlens/emotion.hpp"
#include "affectlens/error.hpp"

namespace affectlens {

inline constexpr double kDefaultMarginThreshold = 0.25;
inline constexpr double kProbabilitySumTolerance = 1e-6;

struct SentenceScore {
  std::string document_id;
  std::string sentence_id;
  std::size_t word_count = 0;
  std::array<double, kNumEmotions> probs{};
};

struct MarginResult {
  Emotion label = Emotion::Neutral;
  double margin = 0.0;
  bool tie = false;
};

inline MarginResult margin(std::span<const double> probs) {
  if (probs.size() != kNumEmotions) {
    throw Error(ErrorKind::NotADistribution, "expected " + std::to_string(kNumEmotions) +
                                                 " probabilities, got " + std::to_string(probs.size()));
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorKind::NotADistribution, "probability " + std::to_string(p) + " is not in [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    throw Error(ErrorKind::NotADistribution, "probabilities sum to " + std::to_string(sum));
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  double second = -1.0;
  bool tie = false;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (k == best) continue;
    second = std::max(second, probs[k]);
    tie = tie || probs[k] == probs[best];
  }
  return {emotion_from_index(best), std::max(0.0, probs[best] - second), tie};
}

inline MarginResult margin(const SentenceScore& s) { return margin(std::span<const double>(s.probs)); }

struct SegmentRules {
  std::size_t min_sentences = 3;
  std::size_t min_words = 40;
  std::size_t max_words = 150;
};

struct Segment {
  std::string document_id;
  std::size_t first = 0;  // indices into the input sequence, inclusive
  std::size_t last = 0;
  Emotion emotion = Emotion::Neutral;
  double min_margin = 0.0;
  std::size_t word_count = 0;
  double confidence = 0.0;  // mean top-label probability over the span
  bool tie = false;         // some sentence's label came from a tie break

  std::size_t num_sentences() const noexcept { return last - first + 1; }
};

namespace detail {

inline void check_threshold(double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::ConfigError, "margin threshold must lie in [0, 1], got " + std::to_string(threshold));
  }
}

}  // namespace detail

// A sentence below threshold, a label change, or a document change ends a run.
// Within a run, a sentence that would push the candidate past max_words closes
// it and starts the next candidate; a sentence longer than max_words on its
// own can never be kept and also breaks the run.
inline std::vector<Segment> build_segments(std::span<const SentenceScore> scores, double threshold,
                                           const SegmentRules& rules = {}) {
  detail::check_threshold(threshold);
  std::vector<MarginResult> m;
  m.reserve(scores.size());
  for (const auto& s : scores) m.push_back(margin(s));

  std::vector<Segment> out;
  bool open = false;
  Segment cur;
  double conf_sum = 0.0;

  auto close = [&] {
    if (!open) return;
    open = false;
    if (cur.num_sentences() >= rules.min_sentences || cur.word_count >= rules.min_words) {
      cur.confidence = conf_sum / static_cast<double>(cur.num_sentences());
      out.push_back(cur);
    }
  };
  auto start = [&](std::size_t i) {
    open = true;
    cur = Segment{scores[i].document_id, i, i, m[i].label, m[i].margin, scores[i].word_count, 0.0, m[i].tie};
    conf_sum = scores[i].probs[index_of(m[i].label)];
  };

  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const bool keep = m[i].margin >= threshold && s.word_count <= rules.max_words;
    if (!keep) {
      close();
      continue;
    }
    if (open && (s.document_id != cur.document_id || m[i].label != cur.emotion)) close();
    if (open && cur.word_count + s.word_count > rules.max_words) close();
    if (!open) {
      start(i);
      continue;
    }
    cur.last = i;
    cur.min_margin = std::min(cur.min_margin, m[i].margin);
    cur.word_count += s.word_count;
    cur.tie = cur.tie || m[i].tie;
    conf_sum += s.probs[index_of(m[i].label)];
  }
  close();
  return out;
}

// ---- threshold sweep ----------------------------------------------------

/// 0.05, 0.075, ..., 0.50
inline std::vector<double> default_sweep_grid() {
  std::vector<double> g;
  for (int i = 2; i <= 20; ++i) g.push_back(i / 40.0);
  return g;
}

struct SweepRow {
  double threshold = 0.0;
  std::array<std::size_t, kNumEmotions> counts{};
  std::size_t total = 0;
  double mean_per_emotion = 0.0;
  double mean_confidence = NAN;  // NaN when no segment survives
};

inline std::vector<SweepRow> sweep_threshold(std::span<const SentenceScore> scores,
                                             std::span<const double> grid, const SegmentRules& rules = {}) {
  if (grid.empty()) throw Error(ErrorKind::ConfigError, "threshold grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    detail::check_threshold(grid[i]);
    if (i && !(grid[i] > grid[i - 1])) throw Error(ErrorKind::ConfigError, "threshold grid must be ascending");
  }
  std::vector<SweepRow> rows;
  for (double tau : grid) {
    SweepRow r;
    r.threshold = tau;
    double conf = 0.0;
    for (const auto& seg : build_segments(scores, tau, rules)) {
      ++r.counts[index_of(seg.emotion)];
      conf += seg.confidence;
      ++r.total;
    }
    r.mean_per_emotion = static_cast<double>(r.total) / static_cast<double>(kNumEmotions);
    if (r.total) r.mean_confidence = conf / static_cast<double>(r.total);
    rows.push_back(r);
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "threshold";
  for (auto name : kEmotionNames) out << ',' << name;
  out << ",mean_per_emotion,mean_confidence\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3f", r.threshold);
    out << buf;
    for (auto c : r.counts) out << ',' << c;
    std::snprintf(buf, sizeof buf, ",%.9g", r.mean_per_emotion);
    out << buf;
    if (std::isnan(r.mean_confidence)) {
      out << ",nan\n";
    } else {
      std::snprintf(buf, sizeof buf, ",%.9g\n", r.mean_confidence);
      out << buf;
    }
  }
}

// ---- answer matching ----------------------------------------------------

// Lowercase, delete Unicode punctuation, split on
// whitespace, drop the articles a/an/the.
inline std::vector<std::string> normalize_answer(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && cur != "a" && cur != "an" && cur != "the") tokens.push_back(cur);
    cur.clear();
  };
  const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto n = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < n) {
    UChar32 c;
    U8_NEXT(s, i, n, c);
    if (c < 0) throw Error(ErrorKind::ParseError, "answer is not valid UTF-8");
    if (u_isUWhiteSpace(c)) {
      flush();
      continue;
    }
    if (u_ispunct(c)) continue;
    c = u_tolower(c);
    char buf[U8_MAX_LENGTH];
    std::int32_t len = 0;
    U8_APPEND_UNSAFE(reinterpret_cast<std::uint8_t*>(buf), len, c);
    cur.append(buf, static_cast<std::size_t>(len));
  }
  flush();
  return tokens;
}

inline bool token_set_match(std::string_view a, std::string_view b) {
  const auto ta = normalize_answer(a), tb = normalize_answer(b);
  if (ta.empty() || tb.empty()) {
    throw Error(ErrorKind::EmptyAfterNormalization,
                "answer \"" + std::string(ta.empty() ? a : b) + "\" has no tokens after normalization");
  }
  return std::set<std::string>(ta.begin(), ta.end()) == std::set<std::string>(tb.begin(), tb.end());
}

struct AgreementCount {
  std::size_t matches = 0;
  std::size_t total = 0;
  bool majority() const noexcept { return 2 * matches > total; }
  bool unanimous() const noexcept { return total > 0 && matches == total; }
};

inline AgreementCount count_matches(std::string_view answer, std::span<const std::string> references) {
  AgreementCount c;
  for (const auto& r : references) {
    ++c.total;
    c.matches += token_set_match(answer, r);
  }
  return c;
}

/// Keep a question only when the larger model is right and the smaller one wrong.
constexpr bool dual_filter(bool large_model_correct, bool small_model_correct) noexcept {
  return large_model_correct && !small_model_correct;
}

// ---- JSON-lines I/O -----------------------------------------------------
//
// Sentence record: {"document_id", "sentence_id", "word_count", "probs"} where
// probs is either 9 numbers in canonical label order or an object keyed by
// label (missing labels are 0).

inline SentenceScore parse_sentence_score(const nlohmann::json& j) {
  SentenceScore s;
  s.document_id = j.value("document_id", std::string{});
  const auto& id = j.at("sentence_id");
  s.sentence_id = id.is_string() ? id.get<std::string>() : id.dump();
  s.word_count = j.at("word_count").get<std::size_t>();
  const auto& p = j.at("probs");
  if (p.is_array()) {
    if (p.size() != kNumEmotions) {
      throw Error(ErrorKind::NotADistribution, "sentence " + s.sentence_id + ": expected 9 probabilities");
    }
    for (std::size_t k = 0; k < kNumEmotions; ++k) s.probs[k] = p[k].get<double>();
  } else if (p.is_object()) {
    for (const auto& [label, v] : p.items()) s.probs[index_of(parse_emotion(label))] = v.get<double>();
  } else {
    throw Error(ErrorKind::ParseError, "sentence " + s.sentence_id + ": probs must be an array or object");
  }
  return s;
}

inline std::vector<SentenceScore> read_sentence_scores(std::istream& in, const std::string& where) {
  std::vector<SentenceScore> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_sentence_score(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, where + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<SentenceScore> read_sentence_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, path.string() + " does not exist");
  return read_sentence_scores(in, path.string());
}

inline nlohmann::ordered_json segment_to_json(const Segment& seg, std::span<const SentenceScore> scores) {
  nlohmann::ordered_json j;
  j["document_id"] = seg.document_id;
  j["first"] = seg.first;
  j["last"] = seg.last;
  j["first_sentence_id"] = scores[seg.first].sentence_id;
  j["last_sentence_id"] = scores[seg.last].sentence_id;
  j["emotion"] = std::string(to_string(seg.emotion));
  j["num_sentences"] = seg.num_sentences();
  j["word_count"] = seg.word_count;
  j["min_margin"] = seg.min_margin;
  j["confidence"] = seg.confidence;
  j["tie"] = seg.tie;
  return j;
}

inline void write_segments_jsonl(std::ostream& out, std::span<const Segment> segs,
                                 std::span<const SentenceScore> scores) {
  for (const auto& s : segs) out << segment_to_json(s, scores).dump() << "\n";
}

}  // namespace affectlens
