#pragma once

// Emotional latent subspaces: per-layer mean and top-k right singular vectors
// of the centered embedding matrix, projection onto the subspace complement,
// pairwise drift losses between emotion variants, and cross-dataset
// alignment diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "affectlens/emotion.hpp"
#include "affectlens/error.hpp"
#include "affectlens/npy.hpp"
#include "affectlens/tensor.hpp"

namespace affectlens {

struct EmotionalSubspace {
  std::size_t layer = 0;
  Eigen::VectorXd mean;             // d
  Eigen::MatrixXd basis;            // d x k, orthonormal columns
  Eigen::VectorXd singular_values;  // k, nonincreasing
  std::string provenance;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
  std::size_t rank() const noexcept { return static_cast<std::size_t>(basis.cols()); }
};

/// Rows of X are mean-pooled embeddings (N x d).
inline EmotionalSubspace fit_subspace(const Eigen::MatrixXd& X, std::size_t k, std::size_t layer = 0,
                                      std::string provenance = {}) {
  const auto N = static_cast<std::size_t>(X.rows()), d = static_cast<std::size_t>(X.cols());
  if (k < 1 || k >= N || k > d) {
    throw Error(ErrorKind::RankTooLarge, "rank " + std::to_string(k) + " with N = " +
                                             std::to_string(N) + ", d = " + std::to_string(d) +
                                             " (need 1 <= k < N and k <= d)");
  }
  if (!X.allFinite()) throw Error(ErrorKind::NonFiniteInput, "embedding matrix has NaN/Inf");
  EmotionalSubspace s;
  s.layer = layer;
  s.provenance = std::move(provenance);
  s.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - s.mean.transpose();
  const double scale = X.cwiseAbs().maxCoeff();
  if (centered.norm() <= 1e-12 * std::max(scale, 1.0) * std::sqrt(static_cast<double>(N * d))) {
    throw Error(ErrorKind::DegenerateData, "centered embedding matrix is zero");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto K = static_cast<Eigen::Index>(k);
  s.basis = svd.matrixV().leftCols(K);
  s.singular_values = svd.singularValues().head(K);
  // sign convention: the largest-magnitude entry of each basis vector is positive
  for (Eigen::Index c = 0; c < K; ++c) {
    Eigen::Index arg = 0;
    s.basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (s.basis(arg, c) < 0.0) s.basis.col(c) *= -1.0;
  }
  return s;
}

/// (I - V V^T)(h - mu) for a single vector.
inline Eigen::VectorXd project_complement(const Eigen::VectorXd& h, const EmotionalSubspace& sub) {
  if (static_cast<std::size_t>(h.size()) != sub.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "state has dim " + std::to_string(h.size()) +
                                                  ", subspace dim " + std::to_string(sub.dim()));
  }
  const Eigen::VectorXd c = h - sub.mean;
  return c - sub.basis * (sub.basis.transpose() * c);
}

/// Row-wise complement projection of an N x d matrix.
inline Eigen::MatrixXd project_complement(const Eigen::MatrixXd& H, const EmotionalSubspace& sub) {
  if (static_cast<std::size_t>(H.cols()) != sub.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "states have dim " + std::to_string(H.cols()) +
                                                  ", subspace dim " + std::to_string(sub.dim()));
  }
  const Eigen::MatrixXd c = H.rowwise() - sub.mean.transpose();
  return c - (c * sub.basis) * sub.basis.transpose();
}

/// Mean over rows of a [T, D] hidden-state tensor whose mask entry is set.
inline Eigen::VectorXd mean_pool(const Tensor<float>& hidden, std::span<const std::uint8_t> mask) {
  if (hidden.rank() != 2 || hidden.dim(0) != mask.size()) {
    throw Error(ErrorKind::DimensionMismatch, "hidden states and mask disagree on T");
  }
  const std::size_t T = hidden.dim(0), D = hidden.dim(1);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(D));
  std::size_t n = 0;
  for (std::size_t t = 0; t < T; ++t) {
    if (!mask[t]) continue;
    ++n;
    for (std::size_t d = 0; d < D; ++d) acc[static_cast<Eigen::Index>(d)] += hidden.data[t * D + d];
  }
  if (n == 0) throw Error(ErrorKind::NoValidQueries, "mean pooling over an empty mask");
  return acc / static_cast<double>(n);
}

// ---- pairwise drift losses --------------------------------------------------

/// Hidden states of M emotion variants of B contexts, for each layer in `layers`.
struct VariantHiddenSet {
  std::vector<std::size_t> layers;
  std::size_t batch = 0, variants = 0, tokens = 0, dim = 0;
  std::vector<std::vector<double>> states;  // per layer entry, flat [B, M, T, D]
  std::vector<std::uint8_t> context_mask;   // [B, T]

  VariantHiddenSet() = default;
  VariantHiddenSet(std::vector<std::size_t> layer_ids, std::size_t B, std::size_t M, std::size_t T,
                   std::size_t D)
      : layers(std::move(layer_ids)), batch(B), variants(M), tokens(T), dim(D),
        states(layers.size(), std::vector<double>(B * M * T * D, 0.0)),
        context_mask(B * T, 1) {}

  std::span<double> state(std::size_t li, std::size_t b, std::size_t m, std::size_t t) {
    return {states[li].data() + ((b * variants + m) * tokens + t) * dim, dim};
  }
  std::span<const double> state(std::size_t li, std::size_t b, std::size_t m, std::size_t t) const {
    return {states[li].data() + ((b * variants + m) * tokens + t) * dim, dim};
  }
  bool context(std::size_t b, std::size_t t) const { return context_mask[b * tokens + t] != 0; }
};

struct PairLossOptions {
  double alpha = 1.0;
  double beta = 1.0;
  double epsilon = 1e-8;
  // Average over the M(M-1) ordered pairs instead of the 1/(BMT) * 1/M^2
  // double normalization.
  bool normalize_pairs = false;
};

struct PairLosses {
  double rel = 0.0;
  double cos = 0.0;
  double pair = 0.0;
  bool mask_all_zero = false;
};

/// Losses over complement-projected states. `subspaces` maps layer index to
/// its subspace; layers without an entry are used unprojected.
inline PairLosses pair_losses(const VariantHiddenSet& hs,
                              const std::map<std::size_t, EmotionalSubspace>& subspaces,
                              const PairLossOptions& opt = {}) {
  if (hs.variants < 2) throw Error(ErrorKind::DimensionMismatch, "pair losses need M >= 2 variants");
  if (!(opt.epsilon > 0.0)) throw Error(ErrorKind::ConfigError, "epsilon must be > 0");
  if (hs.layers.empty() || hs.states.size() != hs.layers.size()) {
    throw Error(ErrorKind::DimensionMismatch, "variant set has no layer states");
  }
  if (hs.context_mask.size() != hs.batch * hs.tokens) {
    throw Error(ErrorKind::DimensionMismatch, "context mask must be [B, T]");
  }
  for (const auto& s : hs.states) {
    if (s.size() != hs.batch * hs.variants * hs.tokens * hs.dim) {
      throw Error(ErrorKind::DimensionMismatch, "layer states must be [B, M, T, D]");
    }
  }
  PairLosses out;
  if (std::none_of(hs.context_mask.begin(), hs.context_mask.end(), [](std::uint8_t c) { return c != 0; })) {
    out.mask_all_zero = true;
    return out;
  }

  const double B = static_cast<double>(hs.batch), M = static_cast<double>(hs.variants),
               T = static_cast<double>(hs.tokens);
  const double norm = opt.normalize_pairs ? 1.0 / (B * T * M * (M - 1.0)) : 1.0 / (B * M * T * M * M);
  const auto D = static_cast<Eigen::Index>(hs.dim);

  double rel_total = 0.0, cos_total = 0.0;
  std::vector<Eigen::VectorXd> h(hs.variants);
  for (std::size_t li = 0; li < hs.layers.size(); ++li) {
    const auto it = subspaces.find(hs.layers[li]);
    const EmotionalSubspace* sub = it == subspaces.end() ? nullptr : &it->second;
    double rel = 0.0, cosine = 0.0;
    for (std::size_t b = 0; b < hs.batch; ++b) {
      for (std::size_t t = 0; t < hs.tokens; ++t) {
        if (!hs.context(b, t)) continue;
        for (std::size_t m = 0; m < hs.variants; ++m) {
          const auto s = hs.state(li, b, m, t);
          Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(s.data(), D);
          h[m] = sub ? project_complement(v, *sub) : std::move(v);
        }
        for (std::size_t m = 0; m < hs.variants; ++m) {
          for (std::size_t n = 0; n < hs.variants; ++n) {
            if (m == n || h[m] == h[n]) continue;  // equal states contribute exactly 0
            const double aa = h[m].squaredNorm(), bb = h[n].squaredNorm();
            rel += (h[m] - h[n]).squaredNorm() / (aa + bb + opt.epsilon);
            const double c = (aa > 0.0 && bb > 0.0)
                                 ? std::clamp(h[m].dot(h[n]) / std::sqrt(aa * bb), -1.0, 1.0)
                                 : 0.0;
            cosine += 1.0 - c;
          }
        }
      }
    }
    rel_total += rel * norm;
    cos_total += cosine * norm;
  }
  const double L = static_cast<double>(hs.layers.size());
  out.rel = rel_total / L;
  out.cos = cos_total / L;
  out.pair = opt.alpha * out.rel + opt.beta * out.cos;
  return out;
}

// ---- alignment diagnostics --------------------------------------------------

using CentroidMap = std::map<Emotion, Eigen::VectorXd>;

/// Per-emotion mean of the rows of X.
inline CentroidMap compute_centroids(const Eigen::MatrixXd& X, std::span<const Emotion> labels) {
  if (static_cast<std::size_t>(X.rows()) != labels.size()) {
    throw Error(ErrorKind::LengthMismatch, "one emotion label per embedding row required");
  }
  CentroidMap sums;
  std::map<Emotion, std::size_t> counts;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    auto [it, fresh] = sums.try_emplace(labels[r], Eigen::VectorXd::Zero(X.cols()));
    it->second += X.row(static_cast<Eigen::Index>(r)).transpose();
    ++counts[labels[r]];
  }
  for (auto& [e, v] : sums) v /= static_cast<double>(counts[e]);
  return sums;
}

/// A subspace together with ambient (uncentered) emotion centroids.
struct SubspaceWithCentroids {
  EmotionalSubspace subspace;
  CentroidMap centroids;
};

struct AlignmentReport {
  std::map<Emotion, double> centroid_cosines;
  double stress = 0.0;
  double mean_distortion = 0.0;
  double mse = 0.0;
};

namespace detail {

inline double safe_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b, ErrorKind kind,
                          const std::string& what) {
  const double na = a.squaredNorm(), nb = b.squaredNorm();
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(kind, what + ": zero-length direction");
  return std::clamp(a.dot(b) / std::sqrt(na * nb), -1.0, 1.0);
}

inline void require_same_labels(const CentroidMap& a, const CentroidMap& b) {
  bool same = a.size() == b.size();
  for (auto ia = a.begin(), ib = b.begin(); same && ia != a.end(); ++ia, ++ib) {
    same = ia->first == ib->first;
  }
  if (!same) throw Error(ErrorKind::LabelSetMismatch, "centroid label sets differ");
}

}  // namespace detail

// Both sides are expressed in a's latent coordinates: z_a[e] = V_a^T (c_a[e] - mu_a)
// and z_b|a[e] = V_a^T (c_b[e] - mu_b). Distances for stress and distortion use
// each side's own coordinates (distances are basis-invariant there).
inline AlignmentReport subspace_alignment(const SubspaceWithCentroids& a, const SubspaceWithCentroids& b) {
  detail::require_same_labels(a.centroids, b.centroids);
  if (a.subspace.dim() != b.subspace.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "subspaces live in different ambient dimensions");
  }
  if (a.centroids.size() < 2) {
    throw Error(ErrorKind::DegenerateCentroid, "alignment needs >= 2 emotions");
  }
  std::vector<Emotion> labels;
  std::vector<Eigen::VectorXd> za, zb_in_a, zb;
  for (const auto& [e, ca] : a.centroids) {
    const auto& cb = b.centroids.at(e);
    if (static_cast<std::size_t>(ca.size()) != a.subspace.dim() ||
        static_cast<std::size_t>(cb.size()) != b.subspace.dim()) {
      throw Error(ErrorKind::DimensionMismatch, "centroid dimension differs from its subspace");
    }
    labels.push_back(e);
    za.push_back(a.subspace.basis.transpose() * (ca - a.subspace.mean));
    zb_in_a.push_back(a.subspace.basis.transpose() * (cb - b.subspace.mean));
    zb.push_back(b.subspace.basis.transpose() * (cb - b.subspace.mean));
  }

  AlignmentReport r;
  double sq_err = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    r.centroid_cosines[labels[i]] = detail::safe_cosine(
        za[i], zb_in_a[i], ErrorKind::DegenerateCentroid, std::string(to_string(labels[i])));
    sq_err += (zb_in_a[i] - za[i]).squaredNorm();
  }
  r.mse = sq_err / static_cast<double>(labels.size() * a.subspace.rank());

  double num = 0.0, den = 0.0, distortion = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const double da = (za[i] - za[j]).norm(), db = (zb[i] - zb[j]).norm();
      if (!(da > 0.0)) {
        throw Error(ErrorKind::DegenerateCentroid, std::string(to_string(labels[i])) + " and " +
                                                       std::string(to_string(labels[j])) +
                                                       " coincide in the reference space");
      }
      num += (db - da) * (db - da);
      den += da * da;
      distortion += std::abs(db / da - 1.0);
      ++pairs;
    }
  }
  r.stress = std::sqrt(num / den);
  r.mean_distortion = distortion / static_cast<double>(pairs);
  return r;
}

/// Cosine between the (e1 - e2) centroid difference directions of two sets.
inline double pair_direction_alignment(const CentroidMap& a, const CentroidMap& b, Emotion e1,
                                       Emotion e2) {
  for (const auto* m : {&a, &b}) {
    if (!m->count(e1) || !m->count(e2)) {
      throw Error(ErrorKind::LabelSetMismatch, "pair " + std::string(to_string(e1)) + "-" +
                                                   std::string(to_string(e2)) + " missing a centroid");
    }
  }
  const Eigen::VectorXd da = a.at(e1) - a.at(e2), db = b.at(e1) - b.at(e2);
  if (da.size() != db.size()) throw Error(ErrorKind::DimensionMismatch, "centroid dimensions differ");
  return detail::safe_cosine(da, db, ErrorKind::ZeroDifference,
                             std::string(to_string(e1)) + "-" + std::string(to_string(e2)));
}

// ---- serialization ----------------------------------------------------------
//
// <dir>/subspace_L{l}.npy  f8 [d, k]
// <dir>/mu_L{l}.npy        f8 [d]
// <dir>/sv_L{l}.npy        f8 [k]
// <dir>/centroids_L{l}.npy f8 [E, d]   optional, rows follow "centroid_labels"
// <dir>/subspace.json      {"layers": [{layer, rank, dim, provenance, centroid_labels}]}

namespace detail {

inline Tensor<double> to_tensor(const Eigen::MatrixXd& m) {
  Tensor<double> t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      t.data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    }
  }
  return t;
}

inline Tensor<double> to_tensor(const Eigen::VectorXd& v) {
  return Tensor<double>({static_cast<std::size_t>(v.size())},
                        std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::MatrixXd to_matrix(const Tensor<double>& t, const std::string& where) {
  if (t.rank() != 2) throw Error(ErrorKind::ShapeMismatch, where + ": expected a 2-D array");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[static_cast<std::size_t>(r * m.cols() + c)];
  }
  return m;
}

inline Eigen::VectorXd to_vector(const Tensor<double>& t, const std::string& where) {
  if (t.rank() != 1) throw Error(ErrorKind::ShapeMismatch, where + ": expected a 1-D array");
  return Eigen::Map<const Eigen::VectorXd>(t.data.data(), static_cast<Eigen::Index>(t.size()));
}

}  // namespace detail

inline void write_subspaces(const std::filesystem::path& dir, const std::vector<SubspaceWithCentroids>& subs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, dir.string() + ": " + ec.message());
  nlohmann::ordered_json meta;
  meta["schema_version"] = 1;
  meta["layers"] = nlohmann::ordered_json::array();
  for (const auto& s : subs) {
    const std::string l = std::to_string(s.subspace.layer);
    npy::write(dir / ("subspace_L" + l + ".npy"), detail::to_tensor(s.subspace.basis));
    npy::write(dir / ("mu_L" + l + ".npy"), detail::to_tensor(s.subspace.mean));
    npy::write(dir / ("sv_L" + l + ".npy"), detail::to_tensor(s.subspace.singular_values));
    nlohmann::ordered_json entry;
    entry["layer"] = s.subspace.layer;
    entry["rank"] = s.subspace.rank();
    entry["dim"] = s.subspace.dim();
    entry["provenance"] = s.subspace.provenance;
    entry["centroid_labels"] = nlohmann::ordered_json::array();
    if (!s.centroids.empty()) {
      Eigen::MatrixXd c(static_cast<Eigen::Index>(s.centroids.size()),
                        static_cast<Eigen::Index>(s.subspace.dim()));
      Eigen::Index r = 0;
      for (const auto& [e, v] : s.centroids) {
        c.row(r++) = v.transpose();
        entry["centroid_labels"].push_back(std::string(to_string(e)));
      }
      npy::write(dir / ("centroids_L" + l + ".npy"), detail::to_tensor(c));
    }
    meta["layers"].push_back(entry);
  }
  std::ofstream out(dir / "subspace.json", std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, (dir / "subspace.json").string() + ": cannot write");
  out << meta.dump(2) << "\n";
}

inline std::vector<SubspaceWithCentroids> read_subspaces(const std::filesystem::path& dir) {
  const auto meta_path = dir / "subspace.json";
  std::ifstream in(meta_path);
  if (!in) throw Error(ErrorKind::MissingFile, meta_path.string() + " does not exist");
  std::vector<SubspaceWithCentroids> out;
  try {
    nlohmann::json meta;
    in >> meta;
    for (const auto& entry : meta.at("layers")) {
      SubspaceWithCentroids s;
      s.subspace.layer = entry.at("layer").get<std::size_t>();
      s.subspace.provenance = entry.value("provenance", std::string{});
      const std::string l = std::to_string(s.subspace.layer);
      auto path = [&](const std::string& stem) { return dir / (stem + "_L" + l + ".npy"); };
      s.subspace.basis = detail::to_matrix(npy::read<double>(path("subspace")), path("subspace").string());
      s.subspace.mean = detail::to_vector(npy::read<double>(path("mu")), path("mu").string());
      s.subspace.singular_values = detail::to_vector(npy::read<double>(path("sv")), path("sv").string());
      if (s.subspace.basis.rows() != s.subspace.mean.size() ||
          s.subspace.basis.cols() != s.subspace.singular_values.size() ||
          s.subspace.rank() != entry.at("rank").get<std::size_t>()) {
        throw Error(ErrorKind::ShapeMismatch, dir.string() + ": layer " + l + " arrays disagree");
      }
      const auto labels = entry.value("centroid_labels", std::vector<std::string>{});
      if (!labels.empty()) {
        const auto c = detail::to_matrix(npy::read<double>(path("centroids")), path("centroids").string());
        if (static_cast<std::size_t>(c.rows()) != labels.size() || c.cols() != s.subspace.mean.size()) {
          throw Error(ErrorKind::ShapeMismatch, path("centroids").string() + ": shape disagrees with metadata");
        }
        for (std::size_t r = 0; r < labels.size(); ++r) {
          s.centroids[parse_emotion(labels[r])] = c.row(static_cast<Eigen::Index>(r)).transpose();
        }
      }
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, meta_path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace affectlens
