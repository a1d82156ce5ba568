// Library walk-through: load (or synthesize) a corpus, compute the 26 attention
// features, then run the accuracy-prediction and emotion-classification
// protocols and print the strongest one-vs-rest effects.
//
//   quickstart [corpus_dir]

#include <filesystem>
#include <iomanip>
#include <iostream>

#include "affectlens/affectlens.hpp"

namespace fs = std::filesystem;
using namespace affectlens;

namespace {

std::vector<AttentionBundle> toy_corpus() {
  SyntheticSpec spec;
  spec.layers = 3;
  spec.seq_len = 10;
  Rng rng(1);
  std::vector<AttentionBundle> out;
  for (int rep = 0; rep < 12; ++rep) {
    for (Emotion e : kAllEmotions) {
      // longer-range attention tends to come with wrong answers here
      const bool correct = rng.uniform() < (index_of(e) < 5 ? 0.8 : 0.3);
      out.push_back(synthetic_bundle(rng, spec, std::string(to_string(e)) + std::to_string(rep), e, correct));
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const std::size_t threads = resolve_thread_count();
    const auto corpus = argc > 1 ? read_corpus(argv[1], threads) : toy_corpus();
    const auto rows = aggregate_corpus(corpus, {}, threads);
    const auto X = feature_matrix(rows);
    std::cout << corpus.size() << " bundles, " << X.cols << " features\n";

    std::vector<int> correct, label;
    std::vector<Emotion> emotions;
    for (const auto& r : rows) {
      correct.push_back(r.correct.value_or(false) ? 1 : 0);
      label.push_back(static_cast<int>(index_of(r.emotion)));
      emotions.push_back(r.emotion);
    }

    const stats::CVOptions opt{3, 42, false, threads};
    const auto auc = stats::cv_logistic_auc(X, correct, {}, opt);
    std::cout << std::fixed << std::setprecision(3) << "correctness AUC " << auc.mean << " +/- " << auc.std << "\n";

    stats::ForestConfig forest;
    forest.num_trees = 100;
    const auto rf = stats::cv_forest(X, label, forest, opt);
    std::cout << "emotion macro-F1 " << rf.macro_f1.mean << ", accuracy " << rf.accuracy.mean << "\n";

    const auto d = stats::cohens_d_one_vs_rest(X, emotions, feature_names());
    std::cout << "most emotion-sensitive feature: " << d.features.front() << "\n";
    for (std::size_t e = 0; e < d.emotions.size(); ++e) {
      std::cout << "  " << std::setw(10) << to_string(d.emotions[e]) << "  d = " << std::showpos << d.d(e, 0)
                << std::noshowpos << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.detail() << "\n";
    return 2;
  }
  return 0;
}
