#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "affectlens/error.hpp"

namespace affectlens {

// Closed label set; the enumerator order is the canonical order used for
// tie-breaking, matrix rows and CSV columns.
enum class Emotion : std::uint8_t {
  Neutral,
  Happy,
  Sad,
  Anger,
  Fear,
  Surprise,
  Disgust,
  Excitement,
  Sarcastic,
};

inline constexpr std::size_t kNumEmotions = 9;

inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "neutral", "happy",   "sad",        "anger",    "fear",
    "surprise", "disgust", "excitement", "sarcastic"};

inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::Neutral,  Emotion::Happy,   Emotion::Sad,
    Emotion::Anger,    Emotion::Fear,    Emotion::Surprise,
    Emotion::Disgust,  Emotion::Excitement, Emotion::Sarcastic};

constexpr std::size_t index_of(Emotion e) noexcept {
  return static_cast<std::size_t>(e);
}

constexpr std::string_view to_string(Emotion e) noexcept {
  return kEmotionNames[index_of(e)];
}

inline std::optional<Emotion> try_parse_emotion(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    if (kEmotionNames[i] == name) return kAllEmotions[i];
  }
  return std::nullopt;
}

inline Emotion parse_emotion(std::string_view name) {
  if (auto e = try_parse_emotion(name)) return *e;
  throw Error(ErrorKind::UnknownEmotionLabel,
              "'" + std::string(name) + "' is not one of the 9 emotion labels");
}

inline Emotion emotion_from_index(std::size_t i) {
  if (i >= kNumEmotions) {
    throw Error(ErrorKind::UnknownEmotionLabel,
                "emotion index " + std::to_string(i) + " out of range");
  }
  return kAllEmotions[i];
}

}  // namespace affectlens
