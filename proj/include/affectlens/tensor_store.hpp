#pragma once

// On-disk bundle format for one example's attention dumps:
//
//   <bundle>/manifest.json
//   <bundle>/attn_L{l}.npy      f32 [H, T, T]   for l in 0..L-1
//   <bundle>/hidden_L{l}.npy    f32 [T, D]      optional
//   <bundle>/query_mask.npy     u8  [T]
//   <bundle>/task_mask.npy      u8  [T]
//   <bundle>/context_mask.npy   u8  [T]
//
// A corpus is a directory of bundle directories (named by example_id) plus
// corpus.json listing the example ids in order.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "affectlens/emotion.hpp"
#include "affectlens/error.hpp"
#include "affectlens/npy.hpp"
#include "affectlens/parallel.hpp"
#include "affectlens/tensor.hpp"

namespace affectlens {

inline constexpr int kBundleSchemaVersion = 1;
inline constexpr double kRowSumTolerance = 1e-4;
inline constexpr double kAttentionUpperBound = 1.0 + 1e-6;

struct BundleManifest {
  int schema_version = kBundleSchemaVersion;
  std::string example_id;
  std::string model_id;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::size_t seq_len = 0;
  std::size_t hidden_dim = 0;  // 0 when no hidden states are stored
  Emotion emotion = Emotion::Neutral;
  std::optional<bool> correct;
  // Groups emotion variants of one context (read by `drift`).
  std::optional<std::string> variant_of;
  std::map<std::string, std::string> file_table;

  bool operator==(const BundleManifest&) const = default;
};

struct AttentionBundle {
  BundleManifest manifest;
  std::vector<Tensor<float>> attention;             // per layer [H, T, T]
  std::optional<std::vector<Tensor<float>>> hidden;  // per layer [T, D]
  std::vector<std::uint8_t> query_mask;
  std::vector<std::uint8_t> task_mask;
  std::vector<std::uint8_t> context_mask;

  bool operator==(const AttentionBundle&) const = default;
};

inline std::string attention_file_key(std::size_t layer) {
  return "attn_L" + std::to_string(layer);
}
inline std::string hidden_file_key(std::size_t layer) {
  return "hidden_L" + std::to_string(layer);
}

inline std::map<std::string, std::string> canonical_file_table(std::size_t layers,
                                                               bool with_hidden) {
  std::map<std::string, std::string> table;
  for (std::size_t l = 0; l < layers; ++l) {
    table[attention_file_key(l)] = attention_file_key(l) + ".npy";
    if (with_hidden) table[hidden_file_key(l)] = hidden_file_key(l) + ".npy";
  }
  for (const char* m : {"query_mask", "task_mask", "context_mask"}) {
    table[m] = std::string(m) + ".npy";
  }
  return table;
}

struct Violation {
  ErrorKind kind;
  std::string location;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::string summary() const {
    std::ostringstream os;
    for (const auto& v : violations) {
      os << to_string(v.kind) << " @ " << v.location << ": " << v.message << "\n";
    }
    return os.str();
  }
};

namespace detail {

inline std::string coord(std::size_t l, std::size_t h, std::size_t i) {
  return "l=" + std::to_string(l) + ",h=" + std::to_string(h) + ",i=" + std::to_string(i);
}

inline void check_mask(ValidationReport& r, const std::vector<std::uint8_t>& mask,
                       std::size_t T, const char* name) {
  if (mask.size() != T) {
    r.violations.push_back({ErrorKind::ShapeMismatch, name,
                            "length " + std::to_string(mask.size()) + " != seq_len " +
                                std::to_string(T)});
  }
}

}  // namespace detail

/// Lists every invariant violation; never throws on malformed numeric content.
inline ValidationReport validate_bundle(const AttentionBundle& b) {
  ValidationReport r;
  const auto& m = b.manifest;
  const std::size_t L = m.num_layers, H = m.num_heads, T = m.seq_len;
  auto add = [&](ErrorKind k, std::string loc, std::string msg) {
    r.violations.push_back({k, std::move(loc), std::move(msg)});
  };

  if (L < 1) add(ErrorKind::InvalidBundle, "manifest", "num_layers must be >= 1");
  if (H < 1) add(ErrorKind::InvalidBundle, "manifest", "num_heads must be >= 1");
  if (T < 1) add(ErrorKind::InvalidBundle, "manifest", "seq_len must be >= 1");
  if (b.attention.size() != L) {
    add(ErrorKind::ShapeMismatch, "attention",
        std::to_string(b.attention.size()) + " layers stored, manifest says " +
            std::to_string(L));
  }
  detail::check_mask(r, b.query_mask, T, "query_mask");
  detail::check_mask(r, b.task_mask, T, "task_mask");
  detail::check_mask(r, b.context_mask, T, "context_mask");
  const bool masks_ok = b.query_mask.size() == T && b.task_mask.size() == T;

  if (masks_ok) {
    bool any_query = false;
    for (std::size_t i = 0; i < T; ++i) {
      any_query = any_query || b.query_mask[i] != 0;
      if (b.task_mask[i] != 0 && b.query_mask[i] == 0) {
        add(ErrorKind::InvalidBundle, "task_mask[" + std::to_string(i) + "]",
            "task position is not a valid query position");
      }
    }
    if (!any_query) add(ErrorKind::NoValidQueries, "query_mask", "no valid query positions");
  }

  const std::vector<std::size_t> want{H, T, T};
  for (std::size_t l = 0; l < b.attention.size(); ++l) {
    const auto& A = b.attention[l];
    const std::string where = "attn_L" + std::to_string(l);
    if (A.shape != want) {
      add(ErrorKind::ShapeMismatch, where,
          "shape " + shape_to_string(A.shape) + " != " + shape_to_string(want));
      continue;
    }
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < T; ++i) {
        const float* row = A.data.data() + (h * T + i) * T;
        double sum = 0.0;
        bool finite = true;
        for (std::size_t j = 0; j < T; ++j) {
          const float v = row[j];
          if (!std::isfinite(v)) {
            finite = false;
            add(ErrorKind::InvalidBundle, detail::coord(l, h, i) + ",j=" + std::to_string(j),
                "non-finite attention entry");
          } else if (v < 0.0f || v > kAttentionUpperBound) {
            add(ErrorKind::InvalidBundle, detail::coord(l, h, i) + ",j=" + std::to_string(j),
                "attention entry " + std::to_string(v) + " outside [0, 1]");
          }
          if (masks_ok && b.query_mask[j] != 0) sum += v;
        }
        if (masks_ok && finite && b.query_mask[i] != 0 &&
            std::abs(sum - 1.0) > kRowSumTolerance) {
          add(ErrorKind::RowSumViolation, detail::coord(l, h, i),
              "row sums to " + std::to_string(sum) + " over unmasked keys");
        }
      }
    }
  }

  if (m.hidden_dim > 0 && !b.hidden) {
    add(ErrorKind::ShapeMismatch, "hidden", "manifest hidden_dim > 0 but no hidden states");
  }
  if (b.hidden) {
    if (m.hidden_dim == 0) {
      add(ErrorKind::ShapeMismatch, "hidden", "hidden states present but hidden_dim = 0");
    }
    if (b.hidden->size() != L) {
      add(ErrorKind::ShapeMismatch, "hidden",
          std::to_string(b.hidden->size()) + " hidden layers, manifest says " +
              std::to_string(L));
    }
    const std::vector<std::size_t> hwant{T, m.hidden_dim};
    for (std::size_t l = 0; l < b.hidden->size(); ++l) {
      const auto& Hs = (*b.hidden)[l];
      const std::string where = "hidden_L" + std::to_string(l);
      if (Hs.shape != hwant) {
        add(ErrorKind::ShapeMismatch, where,
            "shape " + shape_to_string(Hs.shape) + " != " + shape_to_string(hwant));
        continue;
      }
      for (std::size_t n = 0; n < Hs.data.size(); ++n) {
        if (!std::isfinite(Hs.data[n])) {
          add(ErrorKind::InvalidBundle, where + "[" + std::to_string(n) + "]",
              "non-finite hidden state");
        }
      }
    }
  }
  return r;
}

namespace detail {

inline nlohmann::ordered_json manifest_to_json(const BundleManifest& m) {
  nlohmann::ordered_json j;
  j["schema_version"] = m.schema_version;
  j["example_id"] = m.example_id;
  j["model_id"] = m.model_id;
  j["num_layers"] = m.num_layers;
  j["num_heads"] = m.num_heads;
  j["seq_len"] = m.seq_len;
  j["hidden_dim"] = m.hidden_dim;
  j["emotion"] = std::string(to_string(m.emotion));
  if (m.correct) j["correct"] = *m.correct;
  if (m.variant_of) j["variant_of"] = *m.variant_of;
  j["file_table"] = m.file_table;
  return j;
}

template <typename T>
T required(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    throw Error(ErrorKind::ParseError, where + ": manifest lacks field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, where + ": field '" + key + "': " + e.what());
  }
}

inline BundleManifest manifest_from_json(const nlohmann::json& j, const std::string& where) {
  BundleManifest m;
  m.schema_version = required<int>(j, "schema_version", where);
  m.example_id = required<std::string>(j, "example_id", where);
  m.model_id = required<std::string>(j, "model_id", where);
  m.num_layers = required<std::size_t>(j, "num_layers", where);
  m.num_heads = required<std::size_t>(j, "num_heads", where);
  m.seq_len = required<std::size_t>(j, "seq_len", where);
  m.hidden_dim = j.contains("hidden_dim") ? required<std::size_t>(j, "hidden_dim", where) : 0;
  m.emotion = parse_emotion(required<std::string>(j, "emotion", where));
  if (j.contains("correct") && !j["correct"].is_null()) m.correct = required<bool>(j, "correct", where);
  if (j.contains("variant_of") && !j["variant_of"].is_null())
    m.variant_of = required<std::string>(j, "variant_of", where);
  m.file_table = required<std::map<std::string, std::string>>(j, "file_table", where);
  return m;
}

inline std::filesystem::path resolve_file(const std::filesystem::path& dir,
                                          const BundleManifest& m, const std::string& key) {
  auto it = m.file_table.find(key);
  if (it == m.file_table.end()) {
    throw Error(ErrorKind::MissingFile, dir.string() + ": file_table has no entry '" + key + "'");
  }
  auto p = dir / it->second;
  if (!std::filesystem::exists(p)) {
    throw Error(ErrorKind::MissingFile, p.string() + " does not exist");
  }
  return p;
}

inline Tensor<float> load_shaped(const std::filesystem::path& p,
                                 const std::vector<std::size_t>& want) {
  auto t = npy::read<float>(p);
  if (t.shape != want) {
    throw Error(ErrorKind::ShapeMismatch, p.string() + ": shape " + shape_to_string(t.shape) +
                                              ", manifest implies " + shape_to_string(want));
  }
  return t;
}

inline std::vector<std::uint8_t> load_mask(const std::filesystem::path& p, std::size_t T) {
  auto t = npy::read<std::uint8_t>(p);
  if (t.shape != std::vector<std::size_t>{T}) {
    throw Error(ErrorKind::ShapeMismatch, p.string() + ": shape " + shape_to_string(t.shape) +
                                              ", expected [" + std::to_string(T) + "]");
  }
  return t.data;
}

inline void throw_first(const ValidationReport& r, const std::string& where) {
  if (r.ok()) return;
  const auto& v = r.violations.front();
  std::string detail = where + ": " + v.location + ": " + v.message;
  if (r.violations.size() > 1) {
    detail += " (+" + std::to_string(r.violations.size() - 1) + " more)";
  }
  throw Error(v.kind, detail);
}

}  // namespace detail

inline BundleManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, path.string() + " does not exist");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return detail::manifest_from_json(j, path.string());
}

/// Materializes the bundle with shape checks only; numeric invariants are left
/// to validate_bundle.
inline AttentionBundle load_bundle_unchecked(const std::filesystem::path& dir) {
  AttentionBundle b;
  b.manifest = read_manifest(dir);
  const auto& m = b.manifest;
  const std::size_t L = m.num_layers, H = m.num_heads, T = m.seq_len;
  if (L < 1 || H < 1 || T < 1) {
    throw Error(ErrorKind::InvalidBundle, dir.string() + ": L, H and T must all be >= 1");
  }
  b.attention.reserve(L);
  for (std::size_t l = 0; l < L; ++l) {
    b.attention.push_back(
        detail::load_shaped(detail::resolve_file(dir, m, attention_file_key(l)), {H, T, T}));
  }
  if (m.hidden_dim > 0) {
    std::vector<Tensor<float>> hidden;
    for (std::size_t l = 0; l < L; ++l) {
      hidden.push_back(detail::load_shaped(detail::resolve_file(dir, m, hidden_file_key(l)),
                                           {T, m.hidden_dim}));
    }
    b.hidden = std::move(hidden);
  }
  b.query_mask = detail::load_mask(detail::resolve_file(dir, m, "query_mask"), T);
  b.task_mask = detail::load_mask(detail::resolve_file(dir, m, "task_mask"), T);
  b.context_mask = detail::load_mask(detail::resolve_file(dir, m, "context_mask"), T);
  return b;
}

inline AttentionBundle read_bundle(const std::filesystem::path& dir) {
  auto b = load_bundle_unchecked(dir);
  detail::throw_first(validate_bundle(b), dir.string());
  return b;
}

/// Writes the bundle under dir, regenerating the file table with canonical names.
/// Invalid bundles are refused before anything is written.
inline void write_bundle(const AttentionBundle& bundle, const std::filesystem::path& dir) {
  detail::throw_first(validate_bundle(bundle), bundle.manifest.example_id);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, dir.string() + ": " + ec.message());

  BundleManifest m = bundle.manifest;
  m.file_table = canonical_file_table(m.num_layers, bundle.hidden.has_value());
  for (std::size_t l = 0; l < m.num_layers; ++l) {
    npy::write(dir / m.file_table.at(attention_file_key(l)), bundle.attention[l]);
    if (bundle.hidden) npy::write(dir / m.file_table.at(hidden_file_key(l)), (*bundle.hidden)[l]);
  }
  auto write_mask = [&](const char* key, const std::vector<std::uint8_t>& mask) {
    npy::write(dir / m.file_table.at(key), Tensor<std::uint8_t>({mask.size()}, mask));
  };
  write_mask("query_mask", bundle.query_mask);
  write_mask("task_mask", bundle.task_mask);
  write_mask("context_mask", bundle.context_mask);

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, (dir / "manifest.json").string() + ": cannot write");
  out << detail::manifest_to_json(m).dump(2) << "\n";
  if (!out) throw Error(ErrorKind::IoFailure, (dir / "manifest.json").string() + ": write failed");
}

// ---- corpus -----------------------------------------------------------------

inline std::vector<std::string> read_corpus_index(const std::filesystem::path& root) {
  const auto path = root / "corpus.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, path.string() + " does not exist");
  try {
    nlohmann::json j;
    in >> j;
    return j.at("example_ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

inline void write_corpus_index(const std::filesystem::path& root,
                               const std::vector<std::string>& example_ids) {
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw Error(ErrorKind::IoFailure, root.string() + ": " + ec.message());
  nlohmann::ordered_json j;
  j["schema_version"] = kBundleSchemaVersion;
  j["example_ids"] = example_ids;
  std::ofstream out(root / "corpus.json", std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, (root / "corpus.json").string() + ": cannot write");
  out << j.dump(2) << "\n";
}

/// Loads every bundle listed in corpus.json, in index order.
inline std::vector<AttentionBundle> read_corpus(const std::filesystem::path& root,
                                                std::size_t threads = 1) {
  const auto ids = read_corpus_index(root);
  std::vector<AttentionBundle> bundles(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) { bundles[i] = read_bundle(root / ids[i]); });
  return bundles;
}

}  // namespace affectlens
