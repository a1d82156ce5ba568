#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include "cli_support.hpp"

namespace affectlens::cli {
namespace {

std::size_t g_threads = 0;

std::size_t threads() { return resolve_thread_count(g_threads); }

// ---- validate ---------------------------------------------------------------

struct ValidateArgs {
  std::string corpus, bundle, out;
};

int cmd_validate(const CLI::App& sub, const ValidateArgs& a) {
  std::vector<std::pair<std::string, fs::path>> targets;
  if (!a.bundle.empty()) {
    targets.emplace_back(fs::path(a.bundle).filename().string(), a.bundle);
  } else if (!a.corpus.empty()) {
    for (const auto& id : read_corpus_index(a.corpus)) targets.emplace_back(id, fs::path(a.corpus) / id);
  } else {
    throw Error(ErrorKind::ConfigError, "one of --corpus or --bundle is required");
  }

  std::vector<ValidationReport> reports(targets.size());
  parallel_for(targets.size(), threads(), [&](std::size_t i) {
    try {
      reports[i] = validate_bundle(load_bundle_unchecked(targets[i].second));
    } catch (const Error& e) {
      reports[i].violations.push_back({e.kind(), targets[i].second.string(), e.detail()});
    }
  });

  std::size_t bad = 0;
  ojson j;
  j["bundles"] = ojson::array();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ojson b;
    b["example_id"] = targets[i].first;
    b["ok"] = reports[i].ok();
    b["violations"] = ojson::array();
    for (const auto& v : reports[i].violations) {
      b["violations"].push_back({{"kind", std::string(to_string(v.kind))}, {"location", v.location},
                                 {"message", v.message}});
      std::cout << targets[i].first << ": " << to_string(v.kind) << " at " << v.location << ": " << v.message
                << "\n";
    }
    bad += !reports[i].ok();
    j["bundles"].push_back(b);
  }
  j["checked"] = targets.size();
  j["invalid"] = bad;
  std::cout << targets.size() - bad << "/" << targets.size() << " bundles valid\n";
  if (!a.out.empty()) {
    Run run(sub, a.out);
    run.write_json("validation.json", j);
    run.finish();
  }
  if (bad) {
    std::cerr << "error: InvalidBundle: " << bad << " of " << targets.size() << " bundles failed validation\n";
    return 2;
  }
  return 0;
}

// ---- features ---------------------------------------------------------------

struct FeaturesArgs {
  std::string corpus, out;
  FeatureConfig cfg;
};

int cmd_features(const CLI::App& sub, const FeaturesArgs& a) {
  Run run(sub, a.out);
  FeatureTable t{feature_names(), aggregate_corpus(read_corpus(a.corpus, threads()), a.cfg, threads())};
  write_feature_csv(run.path("features.csv"), t);
  run.finish();
  std::cout << "features: " << t.rows.size() << " rows x " << t.names.size() << " features\n";
  return 0;
}

// ---- predict-accuracy -------------------------------------------------------

struct PredictArgs {
  FeatureSource src;
  std::string out;
  std::size_t folds = 5;
  std::uint64_t seed = 42;
  double l2 = 1.0;
  bool global_zscore = false;
};

int cmd_predict_accuracy(const CLI::App& sub, const PredictArgs& a) {
  Run run(sub, a.out);
  const auto table = a.src.load(threads());
  FeatureTable used{table.names, {}};
  for (const auto& r : table.rows) {
    if (r.correct) used.rows.push_back(r);
  }
  const std::size_t dropped = table.rows.size() - used.rows.size();
  if (used.rows.empty()) throw Error(ErrorKind::EmptyInput, "no rows carry a correctness label");
  std::vector<int> y;
  for (const auto& r : used.rows) y.push_back(*r.correct ? 1 : 0);
  if (std::set<int>(y.begin(), y.end()).size() < 2) {
    throw Error(ErrorKind::SingleClassInput, "correctness labels contain a single class");
  }

  const stats::LogisticOptions model{a.l2};
  const stats::CVOptions opt{a.folds, a.seed, a.global_zscore, threads()};
  const auto X = used.matrix();
  const auto full = stats::cv_logistic_auc(X, y, model, opt);
  const auto screen = stats::univariate_screen(X, y, used.names, model, opt);

  ojson j;
  j["n"] = used.rows.size();
  j["dropped_unlabeled"] = dropped;
  j["positives"] = std::count(y.begin(), y.end(), 1);
  j["folds"] = a.folds;
  j["seed"] = a.seed;
  j["l2"] = a.l2;
  j["standardization"] = a.global_zscore ? "global" : "fold";
  j["multivariate"] = cv_json(full);
  j["fold_of"] = full.folds.fold_of;
  j["univariate_top"] = ojson::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(5, screen.size()); ++i) {
    j["univariate_top"].push_back({{"feature", screen[i].feature}, {"mean", screen[i].report.mean}});
  }
  run.write_json("cv_report.json", j);

  auto csv = run.open("univariate.csv");
  csv << "rank,feature,mean_auc,std_auc";
  for (std::size_t f = 0; f < a.folds; ++f) csv << ",fold" << f;
  csv << "\n";
  for (std::size_t i = 0; i < screen.size(); ++i) {
    csv << i + 1 << ',' << screen[i].feature << ',' << format_real(screen[i].report.mean) << ','
        << format_real(screen[i].report.std);
    for (double v : screen[i].report.fold_values) csv << ',' << format_real(v);
    csv << "\n";
  }
  run.finish();
  std::cout << "predict-accuracy: mean AUC " << format_real(full.mean) << " +/- " << format_real(full.std)
            << " over " << a.folds << " folds (n = " << used.rows.size() << ")\n";
  return 0;
}

// ---- emotion-classify -------------------------------------------------------

struct ClassifyArgs {
  FeatureSource src;
  std::string out;
  std::size_t folds = 5;
  stats::ForestConfig forest;
  bool global_zscore = false;
};

int cmd_emotion_classify(const CLI::App& sub, const ClassifyArgs& a) {
  Run run(sub, a.out);
  const auto table = a.src.load(threads());
  const auto y = emotion_labels(table);
  const stats::CVOptions opt{a.folds, a.forest.seed, a.global_zscore, threads()};
  const auto r = stats::cv_forest(table.matrix(), y, a.forest, opt);

  ojson j;
  j["n"] = y.size();
  j["folds"] = a.folds;
  j["seed"] = a.forest.seed;
  j["trees"] = a.forest.num_trees;
  j["accuracy"] = cv_json(r.accuracy);
  j["macro_f1"] = cv_json(r.macro_f1);
  ojson pooled;
  pooled["accuracy"] = r.pooled.accuracy;
  pooled["macro_f1"] = r.pooled.macro_f1;
  pooled["per_class"] = ojson::array();
  for (const auto& c : r.pooled.per_class) {
    pooled["per_class"].push_back({{"emotion", std::string(to_string(emotion_from_index(c.label)))},
                                   {"precision", c.precision},
                                   {"recall", c.recall},
                                   {"f1", c.f1},
                                   {"support", c.support}});
  }
  j["pooled"] = pooled;
  std::vector<std::vector<std::size_t>> confusion(kNumEmotions, std::vector<std::size_t>(kNumEmotions, 0));
  for (std::size_t i = 0; i < y.size(); ++i) ++confusion[y[i]][r.out_of_fold[i]];
  j["confusion_labels"] = kEmotionNames;
  j["confusion"] = confusion;
  run.write_json("emotion_report.json", j);

  auto csv = run.open("predictions.csv");
  csv << "example_id,emotion,predicted,fold\n";
  for (std::size_t i = 0; i < y.size(); ++i) {
    csv << table.rows[i].example_id << ',' << to_string(table.rows[i].emotion) << ','
        << to_string(emotion_from_index(r.out_of_fold[i])) << ',' << r.accuracy.folds.fold_of[i] << "\n";
  }
  run.finish();
  std::cout << "emotion-classify: macro-F1 " << format_real(r.macro_f1.mean) << ", accuracy "
            << format_real(r.accuracy.mean) << " (mean over " << a.folds << " folds)\n";
  return 0;
}

// ---- effect-sizes -----------------------------------------------------------

struct EffectArgs {
  FeatureSource src;
  std::string out;
  std::vector<std::string> exclude;
};

int cmd_effect_sizes(const CLI::App& sub, const EffectArgs& a) {
  Run run(sub, a.out);
  std::vector<Emotion> exclude;
  for (const auto& e : a.exclude) exclude.push_back(parse_emotion(e));
  const auto table = a.src.load(threads());
  std::vector<Emotion> labels;
  for (const auto& r : table.rows) labels.push_back(r.emotion);
  const auto m = stats::cohens_d_one_vs_rest(table.matrix(), labels, table.names, exclude);

  auto csv = run.open("effect_sizes.csv");
  csv << "emotion";
  for (const auto& f : m.features) csv << ',' << f;
  csv << "\n";
  std::vector<std::string> rows;
  for (std::size_t r = 0; r < m.emotions.size(); ++r) {
    rows.emplace_back(to_string(m.emotions[r]));
    csv << rows.back();
    for (std::size_t c = 0; c < m.features.size(); ++c) csv << ',' << format_real(m.d(r, c));
    csv << "\n";
  }

  ojson j;
  j["emotions"] = rows;
  j["excluded"] = a.exclude;
  j["features"] = m.features;
  j["column_variance"] = m.column_variance;
  j["zero_pooled_variance"] = ojson::array();
  for (const auto& f : m.zero_pooled_variance) {
    j["zero_pooled_variance"].push_back({{"emotion", std::string(to_string(f.emotion))}, {"feature", f.feature}});
  }
  run.write_json("effect_sizes.json", j);

  auto svg = run.open("effect_sizes.svg");
  write_svg_heatmap(svg, m.d, rows, m.features, "One-vs-rest Cohen's d");
  run.finish();
  std::cout << "effect-sizes: " << m.emotions.size() << " emotions x " << m.features.size() << " features\n";
  return 0;
}

// ---- attn-diff --------------------------------------------------------------

struct AttnDiffArgs {
  std::string corpus, out;
  std::size_t last_n = 4;
};

int cmd_attn_diff(const CLI::App& sub, const AttnDiffArgs& a) {
  Run run(sub, a.out);
  const auto corpus = read_corpus(a.corpus, threads());
  const auto patterns = mean_attention_patterns(corpus, a.last_n);
  const auto diffs = pairwise_differences(patterns);

  ojson j;
  j["seq_len"] = patterns.seq_len;
  j["last_n"] = a.last_n;
  j["truncated_bundles"] = patterns.truncated;
  j["examples"] = ojson::object();
  for (const auto& [e, n] : patterns.examples) j["examples"][std::string(to_string(e))] = n;
  j["pairs"] = ojson::array();
  auto summary = run.open("attn_diff_summary.csv");
  summary << "emotion_a,emotion_b,frobenius,constant_rows\n";
  for (const auto& d : diffs) {
    const std::string name = "attn_diff_" + std::string(to_string(d.a)) + "_" + std::string(to_string(d.b)) + ".csv";
    auto f = run.open(name);
    for (std::size_t r = 0; r < d.standardized.rows; ++r) {
      for (std::size_t c = 0; c < d.standardized.cols; ++c) {
        if (c) f << ',';
        f << format_real(d.standardized(r, c));
      }
      f << "\n";
    }
    summary << to_string(d.a) << ',' << to_string(d.b) << ',' << format_real(d.frobenius) << ','
            << d.constant_rows.size() << "\n";
    j["pairs"].push_back({{"a", std::string(to_string(d.a))},
                          {"b", std::string(to_string(d.b))},
                          {"file", name},
                          {"frobenius", d.frobenius},
                          {"constant_rows", d.constant_rows}});
  }
  run.write_json("attn_diff.json", j);
  run.finish();
  if (patterns.truncated) {
    std::cerr << "note: " << patterns.truncated << " bundles truncated to T = " << patterns.seq_len << "\n";
  }
  std::cout << "attn-diff: " << diffs.size() << " emotion pairs at T = " << patterns.seq_len << "\n";
  return 0;
}

// ---- fit-subspace -----------------------------------------------------------

struct FitArgs {
  std::string corpus, embeddings, labels, out, provenance = "hidden_states";
  std::vector<std::size_t> layers;
  std::size_t layer = 0;
  std::size_t rank = 0;
};

int cmd_fit_subspace(const CLI::App& sub, const FitArgs& a) {
  Run run(sub, a.out);
  std::vector<Eigen::MatrixXd> mats;
  std::vector<std::size_t> layers;
  std::vector<Emotion> labels;
  if (!a.embeddings.empty()) {
    mats.push_back(to_eigen(npy::read<double>(a.embeddings), a.embeddings));
    layers.push_back(a.layer);
    if (!a.labels.empty()) {
      for (const auto& l : read_lines(a.labels)) labels.push_back(parse_emotion(l));
    }
  } else if (!a.corpus.empty()) {
    const auto corpus = read_corpus(a.corpus, threads());
    if (corpus.empty()) throw Error(ErrorKind::EmptyInput, "corpus is empty");
    const std::size_t L = corpus.front().manifest.num_layers, D = corpus.front().manifest.hidden_dim;
    for (const auto& b : corpus) {
      if (!b.hidden) throw Error(ErrorKind::InvalidBundle, b.manifest.example_id + ": no hidden states");
      if (b.manifest.num_layers != L || b.manifest.hidden_dim != D) {
        throw Error(ErrorKind::DimensionMismatch, b.manifest.example_id + ": layer count or hidden dim differs");
      }
      labels.push_back(b.manifest.emotion);
    }
    layers = a.layers;
    if (layers.empty()) {
      for (std::size_t l = 0; l < L; ++l) layers.push_back(l);
    }
    for (std::size_t l : layers) {
      if (l >= L) throw Error(ErrorKind::ConfigError, "layer " + std::to_string(l) + " out of range");
      Eigen::MatrixXd X(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(D));
      for (std::size_t n = 0; n < corpus.size(); ++n) {
        X.row(static_cast<Eigen::Index>(n)) = mean_pool((*corpus[n].hidden)[l], corpus[n].query_mask).transpose();
      }
      mats.push_back(std::move(X));
    }
  } else {
    throw Error(ErrorKind::ConfigError, "one of --corpus or --embeddings is required");
  }

  std::vector<SubspaceWithCentroids> subs(mats.size());
  parallel_for(mats.size(), threads(), [&](std::size_t i) {
    subs[i].subspace = fit_subspace(mats[i], a.rank, layers[i], a.provenance);
    if (!labels.empty()) subs[i].centroids = compute_centroids(mats[i], labels);
  });
  write_subspaces(a.out, subs);
  for (const auto& s : subs) {
    const std::string l = std::to_string(s.subspace.layer);
    run.path("subspace_L" + l + ".npy");
    run.path("mu_L" + l + ".npy");
    run.path("sv_L" + l + ".npy");
    if (!s.centroids.empty()) run.path("centroids_L" + l + ".npy");
  }
  run.path("subspace.json");
  run.finish();
  std::cout << "fit-subspace: " << subs.size() << " layer(s), rank " << a.rank << "\n";
  return 0;
}

// ---- project ----------------------------------------------------------------

struct ProjectArgs {
  std::string subspace, embeddings, out;
  std::size_t layer = 0;
};

const SubspaceWithCentroids& find_layer(const std::vector<SubspaceWithCentroids>& subs, std::size_t layer,
                                        const std::string& dir) {
  for (const auto& s : subs) {
    if (s.subspace.layer == layer) return s;
  }
  throw Error(ErrorKind::ConfigError, dir + " has no subspace for layer " + std::to_string(layer));
}

int cmd_project(const CLI::App& sub, const ProjectArgs& a) {
  Run run(sub, a.out);
  const auto subs = read_subspaces(a.subspace);
  const auto& s = find_layer(subs, a.layer, a.subspace);
  const auto P = project_complement(to_eigen(npy::read<double>(a.embeddings), a.embeddings), s.subspace);
  Tensor<double> t({static_cast<std::size_t>(P.rows()), static_cast<std::size_t>(P.cols())});
  for (Eigen::Index r = 0; r < P.rows(); ++r) {
    for (Eigen::Index c = 0; c < P.cols(); ++c) t.data[static_cast<std::size_t>(r * P.cols() + c)] = P(r, c);
  }
  npy::write(run.path("projected_L" + std::to_string(a.layer) + ".npy"), t);
  run.finish();
  std::cout << "project: " << P.rows() << " vectors onto the complement of a rank-" << s.subspace.rank()
            << " subspace\n";
  return 0;
}

// ---- drift ------------------------------------------------------------------

struct DriftArgs {
  std::string corpus, subspace, out;
  std::vector<std::size_t> layers;
  PairLossOptions loss;
};

int cmd_drift(const CLI::App& sub, const DriftArgs& a) {
  Run run(sub, a.out);
  const auto corpus = read_corpus(a.corpus, threads());
  // variants grouped by variant_of (a bundle without it is its own group)
  std::vector<std::string> order;
  std::map<std::string, std::vector<const AttentionBundle*>> groups;
  for (const auto& b : corpus) {
    const std::string key = b.manifest.variant_of.value_or(b.manifest.example_id);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&b);
  }
  std::vector<std::vector<const AttentionBundle*>> sets;
  std::size_t singletons = 0;
  for (const auto& key : order) {
    auto g = groups[key];
    if (g.size() < 2) {
      ++singletons;
      continue;
    }
    std::stable_sort(g.begin(), g.end(), [](const AttentionBundle* x, const AttentionBundle* y) {
      if (x->manifest.emotion != y->manifest.emotion) return x->manifest.emotion < y->manifest.emotion;
      return x->manifest.example_id < y->manifest.example_id;
    });
    sets.push_back(std::move(g));
  }
  if (sets.empty()) throw Error(ErrorKind::EmptyInput, "no group with >= 2 emotion variants");

  const auto* first = sets.front().front();
  const std::size_t M = sets.front().size(), T = first->manifest.seq_len, D = first->manifest.hidden_dim;
  for (const auto& g : sets) {
    for (const auto* b : g) {
      if (!b->hidden) throw Error(ErrorKind::InvalidBundle, b->manifest.example_id + ": no hidden states");
      if (g.size() != M || b->manifest.seq_len != T || b->manifest.hidden_dim != D ||
          b->manifest.num_layers != first->manifest.num_layers) {
        throw Error(ErrorKind::ShapeMismatch, b->manifest.example_id +
                                                  ": variant groups must share M, T, D and the layer count");
      }
      if (b->context_mask != g.front()->context_mask) {
        throw Error(ErrorKind::ShapeMismatch, b->manifest.example_id + ": variants disagree on the context mask");
      }
    }
  }

  std::map<std::size_t, EmotionalSubspace> subspaces;
  std::vector<std::size_t> layers = a.layers;
  if (!a.subspace.empty()) {
    for (auto& s : read_subspaces(a.subspace)) subspaces.emplace(s.subspace.layer, std::move(s.subspace));
    if (layers.empty()) {
      for (const auto& [l, s] : subspaces) layers.push_back(l);
    }
    for (std::size_t l : layers) {
      if (!subspaces.count(l)) throw Error(ErrorKind::ConfigError, "no subspace for layer " + std::to_string(l));
    }
  } else if (layers.empty()) {
    for (std::size_t l = 0; l < first->manifest.num_layers; ++l) layers.push_back(l);
  }
  for (std::size_t l : layers) {
    if (l >= first->manifest.num_layers) throw Error(ErrorKind::ConfigError, "layer " + std::to_string(l) + " out of range");
  }

  VariantHiddenSet hs(layers, sets.size(), M, T, D);
  for (std::size_t b = 0; b < sets.size(); ++b) {
    for (std::size_t t = 0; t < T; ++t) hs.context_mask[b * T + t] = sets[b].front()->context_mask[t] ? 1 : 0;
    for (std::size_t li = 0; li < layers.size(); ++li) {
      for (std::size_t m = 0; m < M; ++m) {
        const auto& h = (*sets[b][m]->hidden)[layers[li]].data;
        for (std::size_t t = 0; t < T; ++t) {
          auto dst = hs.state(li, b, m, t);
          for (std::size_t d = 0; d < D; ++d) dst[d] = h[t * D + d];
        }
      }
    }
  }
  const auto r = pair_losses(hs, subspaces, a.loss);

  ojson j;
  j["groups"] = sets.size();
  j["skipped_singletons"] = singletons;
  j["variants"] = M;
  j["tokens"] = T;
  j["layers"] = layers;
  j["projected"] = !subspaces.empty();
  j["alpha"] = a.loss.alpha;
  j["beta"] = a.loss.beta;
  j["epsilon"] = a.loss.epsilon;
  j["normalize_pairs"] = a.loss.normalize_pairs;
  j["L_rel"] = r.rel;
  j["L_cos"] = r.cos;
  j["L_pair"] = r.pair;
  j["mask_all_zero"] = r.mask_all_zero;
  run.write_json("drift.json", j);
  run.finish();
  if (r.mask_all_zero) std::cerr << "note: context mask is empty; losses reported as 0\n";
  std::cout << "drift: L_rel " << format_real(r.rel) << ", L_cos " << format_real(r.cos) << ", L_pair "
            << format_real(r.pair) << "\n";
  return 0;
}

// ---- align ------------------------------------------------------------------

struct AlignArgs {
  std::string a, b, out;
  std::size_t layer = 0;
  std::vector<std::string> pairs;
};

int cmd_align(const CLI::App& sub, const AlignArgs& a) {
  Run run(sub, a.out);
  const auto sa = read_subspaces(a.a), sb = read_subspaces(a.b);
  const auto& la = find_layer(sa, a.layer, a.a);
  const auto& lb = find_layer(sb, a.layer, a.b);
  if (la.centroids.empty() || lb.centroids.empty()) {
    throw Error(ErrorKind::LabelSetMismatch, "both subspace directories need emotion centroids");
  }
  const auto r = subspace_alignment(la, lb);

  ojson j;
  j["layer"] = a.layer;
  j["centroid_cosines"] = ojson::object();
  for (const auto& [e, c] : r.centroid_cosines) j["centroid_cosines"][std::string(to_string(e))] = c;
  j["stress"] = r.stress;
  j["mean_distortion"] = r.mean_distortion;
  j["mse"] = r.mse;
  j["pairs"] = ojson::array();
  // pair directions are compared in each side's centered latent coordinates
  auto latent = [](const SubspaceWithCentroids& s) {
    CentroidMap z;
    for (const auto& [e, c] : s.centroids) z[e] = s.subspace.basis.transpose() * (c - s.subspace.mean);
    return z;
  };
  const auto za = latent(la);
  CentroidMap zb;
  for (const auto& [e, c] : lb.centroids) zb[e] = la.subspace.basis.transpose() * (c - lb.subspace.mean);
  for (const auto& p : a.pairs) {
    const auto comma = p.find(',');
    if (comma == std::string::npos) throw Error(ErrorKind::ConfigError, "--pair expects e1,e2 (got " + p + ")");
    const Emotion e1 = parse_emotion(p.substr(0, comma)), e2 = parse_emotion(p.substr(comma + 1));
    j["pairs"].push_back({{"a", std::string(to_string(e1))},
                          {"b", std::string(to_string(e2))},
                          {"cosine", pair_direction_alignment(za, zb, e1, e2)}});
  }
  run.write_json("alignment.json", j);
  run.finish();
  std::cout << "align: stress " << format_real(r.stress) << ", distortion " << format_real(r.mean_distortion)
            << ", mse " << format_real(r.mse) << "\n";
  return 0;
}

// ---- segment / sweep --------------------------------------------------------

struct SegmentArgs {
  std::string scores, out;
  double threshold = kDefaultMarginThreshold;
  std::vector<double> grid;
};

int cmd_segment(const CLI::App& sub, const SegmentArgs& a) {
  Run run(sub, a.out);
  const auto scores = read_sentence_scores(a.scores);
  const auto segs = build_segments(scores, a.threshold);
  auto f = run.open("segments.jsonl");
  write_segments_jsonl(f, segs, scores);
  ojson j;
  j["sentences"] = scores.size();
  j["threshold"] = a.threshold;
  j["segments"] = segs.size();
  std::array<std::size_t, kNumEmotions> counts{};
  std::size_t ties = 0;
  for (const auto& s : segs) {
    ++counts[index_of(s.emotion)];
    ties += s.tie;
  }
  j["per_emotion"] = ojson::object();
  for (std::size_t k = 0; k < kNumEmotions; ++k) j["per_emotion"][std::string(kEmotionNames[k])] = counts[k];
  j["segments_with_ties"] = ties;
  run.write_json("segment_summary.json", j);
  run.finish();
  std::cout << "segment: " << segs.size() << " segments from " << scores.size() << " sentences\n";
  return 0;
}

int cmd_sweep(const CLI::App& sub, const SegmentArgs& a) {
  Run run(sub, a.out);
  const auto scores = read_sentence_scores(a.scores);
  const auto grid = a.grid.empty() ? default_sweep_grid() : a.grid;
  const auto rows = sweep_threshold(scores, grid);
  auto f = run.open("sweep.csv");
  write_sweep_csv(f, rows);
  run.finish();
  std::cout << "sweep: " << rows.size() << " thresholds\n";
  return 0;
}

// ---- qa-filter --------------------------------------------------------------

struct QaArgs {
  std::string input, out;
};

// Record: {"id", "human_answers": [...], "answer"?, "large_answer"?, "small_answer"?}.
// A model is counted correct when its answer token-set matches a majority of
// the human answers.
int cmd_qa_filter(const CLI::App& sub, const QaArgs& a) {
  Run run(sub, a.out);
  std::ifstream in(a.input);
  if (!in) throw Error(ErrorKind::MissingFile, a.input + " does not exist");
  auto out = run.open("qa_filter.jsonl");
  std::size_t n = 0, retained = 0, majority = 0, unanimous = 0, with_answer = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, a.input + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const auto humans = rec.at("human_answers").get<std::vector<std::string>>();
    ojson o;
    o["id"] = rec.contains("id") ? rec["id"] : nlohmann::json(lineno);
    if (rec.contains("answer")) {
      const auto c = count_matches(rec["answer"].get<std::string>(), humans);
      o["answer_matches"] = c.matches;
      o["majority"] = c.majority();
      o["unanimous"] = c.unanimous();
      ++with_answer;
      majority += c.majority();
      unanimous += c.unanimous();
    }
    if (rec.contains("large_answer") && rec.contains("small_answer")) {
      const bool large = count_matches(rec["large_answer"].get<std::string>(), humans).majority();
      const bool small = count_matches(rec["small_answer"].get<std::string>(), humans).majority();
      o["large_correct"] = large;
      o["small_correct"] = small;
      o["retain"] = dual_filter(large, small);
      retained += dual_filter(large, small);
    }
    out << o.dump() << "\n";
    ++n;
  }
  run.write_json("qa_summary.json", {{"records", n},
                                     {"retained", retained},
                                     {"with_answer", with_answer},
                                     {"majority_match", majority},
                                     {"unanimous_match", unanimous}});
  run.finish();
  std::cout << "qa-filter: " << retained << " of " << n << " records retained\n";
  return 0;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::IoFailure: return 3;
    default: return 2;
  }
}

}  // namespace

int main_impl(int argc, char** argv) {
  CLI::App app{"Attention-geometry and latent-drift analysis of emotion-varied transformer dumps", "affectlens"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  app.add_option("--threads", g_threads, "worker count (default: AFFECTLENS_THREADS, else all cores)");
  std::function<int()> action;

  auto add = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };
  auto add_folds = [](CLI::App* s, std::size_t& folds) {
    s->add_option("--folds", folds, "cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
  };

  ValidateArgs va;
  auto* s_validate = add("validate", "check bundles against the storage invariants");
  s_validate->add_option("--corpus", va.corpus, "corpus directory");
  s_validate->add_option("--bundle", va.bundle, "single bundle directory");
  s_validate->add_option("--out", va.out, "directory for validation.json");
  s_validate->callback([&] { action = [&] { return cmd_validate(*s_validate, va); }; });

  FeaturesArgs fa;
  auto* s_features = add("features", "aggregate attention features into a CSV");
  s_features->add_option("--corpus", fa.corpus, "corpus directory")->required();
  s_features->add_option("--out", fa.out, "output directory")->required();
  s_features->add_option("--d0", fa.cfg.d0, "tail-mass distance threshold")->capture_default_str()->check(CLI::PositiveNumber);
  s_features->add_option("--k", fa.cfg.top_k, "top-k for overlap and focus-from")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  s_features->add_flag("--raw-tailmass", fa.cfg.raw_tailmass, "tail mass without the 1/H factor");
  s_features->callback([&] { action = [&] { return cmd_features(*s_features, fa); }; });

  PredictArgs pa;
  auto* s_predict = add("predict-accuracy", "cross-validated logistic regression on correctness");
  pa.src.add_options(s_predict);
  s_predict->add_option("--out", pa.out, "output directory")->required();
  add_folds(s_predict, pa.folds);
  s_predict->add_option("--seed", pa.seed, "fold seed")->capture_default_str();
  s_predict->add_option("--l2", pa.l2, "L2 penalty")->capture_default_str()->check(CLI::NonNegativeNumber);
  s_predict->add_flag("--global-zscore", pa.global_zscore, "standardize once on the whole corpus");
  s_predict->callback([&] { action = [&] { return cmd_predict_accuracy(*s_predict, pa); }; });

  ClassifyArgs ca;
  auto* s_classify = add("emotion-classify", "random-forest emotion prediction");
  ca.src.add_options(s_classify);
  s_classify->add_option("--out", ca.out, "output directory")->required();
  add_folds(s_classify, ca.folds);
  s_classify->add_option("--seed", ca.forest.seed, "fold and forest seed")->capture_default_str();
  s_classify->add_option("--trees", ca.forest.num_trees, "trees per forest")->capture_default_str()->check(CLI::PositiveNumber);
  s_classify->add_option("--max-depth", ca.forest.max_depth, "0 = unlimited")->capture_default_str();
  s_classify->add_option("--min-leaf", ca.forest.min_samples_leaf, "minimum samples per leaf")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  s_classify->add_option("--max-features", ca.forest.max_features, "features per split, 0 = floor(sqrt(F))")
      ->capture_default_str();
  s_classify->add_flag("--global-zscore", ca.global_zscore, "standardize once on the whole corpus");
  s_classify->callback([&] { action = [&] { return cmd_emotion_classify(*s_classify, ca); }; });

  EffectArgs ea;
  auto* s_effect = add("effect-sizes", "one-vs-rest Cohen's d matrix and heatmap");
  ea.src.add_options(s_effect);
  s_effect->add_option("--out", ea.out, "output directory")->required();
  s_effect->add_option("--exclude-emotion", ea.exclude, "drop an emotion's row (repeatable)")->take_all();
  s_effect->callback([&] { action = [&] { return cmd_effect_sizes(*s_effect, ea); }; });

  AttnDiffArgs da;
  auto* s_diff = add("attn-diff", "row-standardized pairwise emotion attention differences");
  s_diff->add_option("--corpus", da.corpus, "corpus directory")->required();
  s_diff->add_option("--out", da.out, "output directory")->required();
  s_diff->add_option("--last-n", da.last_n, "average over the last n layers (0 = all)")->capture_default_str();
  s_diff->callback([&] { action = [&] { return cmd_attn_diff(*s_diff, da); }; });

  FitArgs fi;
  auto* s_fit = add("fit-subspace", "centered-SVD emotional subspaces");
  s_fit->add_option("--corpus", fi.corpus, "corpus with hidden states (mean-pooled over query positions)");
  s_fit->add_option("--embeddings", fi.embeddings, "[N, d] NPY embedding matrix");
  s_fit->add_option("--labels", fi.labels, "one emotion label per embedding row");
  s_fit->add_option("--layer", fi.layer, "layer index recorded for --embeddings")->capture_default_str();
  s_fit->add_option("--layers", fi.layers, "layers to fit from --corpus (default: all)")->delimiter(',');
  s_fit->add_option("--rank", fi.rank, "subspace rank k")->required()->check(CLI::PositiveNumber);
  s_fit->add_option("--provenance", fi.provenance, "module kind tag")->capture_default_str();
  s_fit->add_option("--out", fi.out, "output directory")->required();
  s_fit->callback([&] { action = [&] { return cmd_fit_subspace(*s_fit, fi); }; });

  ProjectArgs pr;
  auto* s_project = add("project", "project embeddings onto a subspace complement");
  s_project->add_option("--subspace", pr.subspace, "subspace directory")->required();
  s_project->add_option("--embeddings", pr.embeddings, "[N, d] NPY matrix")->required();
  s_project->add_option("--layer", pr.layer, "layer index")->capture_default_str();
  s_project->add_option("--out", pr.out, "output directory")->required();
  s_project->callback([&] { action = [&] { return cmd_project(*s_project, pr); }; });

  DriftArgs dr;
  auto* s_drift = add("drift", "pairwise drift losses between emotion variants");
  s_drift->add_option("--corpus", dr.corpus, "corpus whose bundles carry variant_of and hidden states")->required();
  s_drift->add_option("--subspace", dr.subspace, "project onto these subspace complements first");
  s_drift->add_option("--layers", dr.layers, "layers to include")->delimiter(',');
  s_drift->add_option("--alpha", dr.loss.alpha, "weight of L_rel")->capture_default_str();
  s_drift->add_option("--beta", dr.loss.beta, "weight of L_cos")->capture_default_str();
  s_drift->add_option("--epsilon", dr.loss.epsilon, "denominator stabilizer")->capture_default_str()->check(CLI::PositiveNumber);
  s_drift->add_flag("--normalize-pairs", dr.loss.normalize_pairs, "average over ordered variant pairs");
  s_drift->add_option("--out", dr.out, "output directory")->required();
  s_drift->callback([&] { action = [&] { return cmd_drift(*s_drift, dr); }; });

  AlignArgs al;
  auto* s_align = add("align", "compare two subspaces' emotion geometry");
  s_align->add_option("--a", al.a, "reference subspace directory")->required();
  s_align->add_option("--b", al.b, "compared subspace directory")->required();
  s_align->add_option("--layer", al.layer, "layer index")->capture_default_str();
  s_align->add_option("--pair", al.pairs, "emotion pair e1,e2 for direction alignment (repeatable)");
  s_align->add_option("--out", al.out, "output directory")->required();
  s_align->callback([&] { action = [&] { return cmd_align(*s_align, al); }; });

  SegmentArgs sg;
  auto* s_segment = add("segment", "margin-gated emotion segments");
  s_segment->add_option("--scores", sg.scores, "sentence score JSON lines")->required();
  s_segment->add_option("--threshold", sg.threshold, "margin threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  s_segment->add_option("--out", sg.out, "output directory")->required();
  s_segment->callback([&] { action = [&] { return cmd_segment(*s_segment, sg); }; });

  SegmentArgs sw;
  auto* s_sweep = add("sweep", "retained segments across margin thresholds");
  s_sweep->add_option("--scores", sw.scores, "sentence score JSON lines")->required();
  s_sweep->add_option("--grid", sw.grid, "ascending thresholds (default 0.05..0.50 step 0.025)")->delimiter(',');
  s_sweep->add_option("--out", sw.out, "output directory")->required();
  s_sweep->callback([&] { action = [&] { return cmd_sweep(*s_sweep, sw); }; });

  QaArgs qa;
  auto* s_qa = add("qa-filter", "token-set answer agreement and dual-model retention");
  s_qa->add_option("--input", qa.input, "QA records as JSON lines")->required();
  s_qa->add_option("--out", qa.out, "output directory")->required();
  s_qa->callback([&] { action = [&] { return cmd_qa_filter(*s_qa, qa); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: ConfigError: " << e.what() << "\n";
    return 3;
  }

  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.detail() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: ParseError: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace affectlens::cli

int main(int argc, char** argv) { return affectlens::cli::main_impl(argc, argv); }
