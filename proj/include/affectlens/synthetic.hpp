#pragma once

// Toy bundles for demos, fixtures and end-to-end checks. Attention rows are a
// softmax of -|i - j| / tau plus noise, with tau depending on the emotion, so
// spatial features carry a real emotion signal. Hidden states are a shared
// per-context base, an emotion direction and noise.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "affectlens/emotion.hpp"
#include "affectlens/rng.hpp"
#include "affectlens/tensor_store.hpp"

namespace affectlens {

struct SyntheticSpec {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t seq_len = 8;
  std::size_t hidden_dim = 0;  // 0: no hidden states
  std::size_t padding = 1;     // trailing masked positions
  double logit_noise = 0.3;
  double hidden_noise = 0.05;
  std::string model_id = "synthetic-toy";
};

inline double synthetic_temperature(Emotion e) { return 0.6 + 0.3 * static_cast<double>(index_of(e)); }

/// Hidden-state base shared by all variants of one context.
inline std::vector<double> synthetic_context_base(std::uint64_t context_seed, const SyntheticSpec& spec) {
  Rng rng(context_seed, 0xc0);
  std::vector<double> base(spec.layers * spec.seq_len * spec.hidden_dim);
  for (double& v : base) v = rng.normal();
  return base;
}

inline AttentionBundle synthetic_bundle(Rng& rng, const SyntheticSpec& spec, std::string example_id, Emotion emotion,
                                        std::optional<bool> correct = std::nullopt,
                                        const std::vector<double>* context_base = nullptr) {
  const std::size_t L = spec.layers, H = spec.heads, T = spec.seq_len, D = spec.hidden_dim;
  if (T < 4 || spec.padding + 3 > T) {
    throw Error(ErrorKind::ConfigError, "synthetic bundles need T >= 4 and padding <= T - 3");
  }
  AttentionBundle b;
  auto& m = b.manifest;
  m.example_id = std::move(example_id);
  m.model_id = spec.model_id;
  m.num_layers = L;
  m.num_heads = H;
  m.seq_len = T;
  m.hidden_dim = D;
  m.emotion = emotion;
  m.correct = correct;

  const std::size_t live = T - spec.padding;
  b.query_mask.assign(T, 0);
  b.task_mask.assign(T, 0);
  b.context_mask.assign(T, 0);
  for (std::size_t i = 0; i < live; ++i) b.query_mask[i] = 1;
  b.task_mask[live - 2] = b.task_mask[live - 1] = 1;
  for (std::size_t i = 0; i + 2 < live; ++i) b.context_mask[i] = 1;

  const double tau = synthetic_temperature(emotion);
  std::vector<double> logits(T);
  for (std::size_t l = 0; l < L; ++l) {
    Tensor<float> A({H, T, T}, 0.0f);
    const double layer_tau = tau * (1.0 + 0.25 * static_cast<double>(l));
    for (std::size_t h = 0; h < H; ++h) {
      const double head_tau = layer_tau * (1.0 + 0.2 * static_cast<double>(h));
      for (std::size_t i = 0; i < T; ++i) {
        if (!b.query_mask[i]) continue;
        double mx = -1e300;
        for (std::size_t j = 0; j < live; ++j) {
          const double dist = std::abs(static_cast<double>(i) - static_cast<double>(j));
          logits[j] = -dist / head_tau + spec.logit_noise * rng.normal();
          mx = std::max(mx, logits[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < live; ++j) z += std::exp(logits[j] - mx);
        for (std::size_t j = 0; j < live; ++j) {
          A.data[(h * T + i) * T + j] = static_cast<float>(std::exp(logits[j] - mx) / z);
        }
      }
    }
    b.attention.push_back(std::move(A));
  }

  if (D > 0) {
    std::vector<Tensor<float>> hidden;
    for (std::size_t l = 0; l < L; ++l) {
      Tensor<float> Hs({T, D}, 0.0f);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t d = 0; d < D; ++d) {
          const double base = context_base ? (*context_base)[(l * T + t) * D + d] : rng.normal();
          // each emotion shifts its own coordinate (mod D)
          const double shift = (d == index_of(emotion) % D) ? 1.5 : 0.0;
          Hs.data[t * D + d] = static_cast<float>(base + shift + spec.hidden_noise * rng.normal());
        }
      }
      hidden.push_back(std::move(Hs));
    }
    b.hidden = std::move(hidden);
  }
  m.file_table = canonical_file_table(L, D > 0);
  return b;
}

}  // namespace affectlens
