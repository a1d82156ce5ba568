// Regenerates the small committed fixtures under tests/fixtures (or argv[1]).
//
//   corpus/      27 toy bundles, 3 per emotion, with hidden states
//   drift/       4 contexts x 3 emotion variants sharing a context base
//   drift_same/  2 contexts x 2 variants with identical hidden states
//   bad_bundle/  a bundle whose layer-0 row 1 sums to 0.8
//   scores.jsonl sentence-level emotion probabilities for two documents
//   qa.jsonl     QA records with human answers and two model answers

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "affectlens/affectlens.hpp"

namespace fs = std::filesystem;
using namespace affectlens;

namespace {

void write_corpus(const fs::path& root) {
  SyntheticSpec spec;
  spec.layers = 3;
  spec.heads = 2;
  spec.seq_len = 8;
  spec.hidden_dim = 4;
  Rng rng(7);
  std::vector<std::string> ids;
  for (int rep = 0; rep < 3; ++rep) {
    for (Emotion e : kAllEmotions) {
      const auto id = std::string(to_string(e)) + "_" + std::to_string(rep);
      write_bundle(synthetic_bundle(rng, spec, id, e, (index_of(e) + rep) % 2 == 0), root / id);
      ids.push_back(id);
    }
  }
  write_corpus_index(root, ids);
}

void write_drift(const fs::path& root) {
  SyntheticSpec spec;
  spec.layers = 2;
  spec.heads = 2;
  spec.seq_len = 8;
  spec.hidden_dim = 6;
  Rng rng(11);
  std::vector<std::string> ids;
  for (int ctx = 0; ctx < 4; ++ctx) {
    const auto base = synthetic_context_base(100 + ctx, spec);
    for (Emotion e : {Emotion::Happy, Emotion::Sad, Emotion::Anger}) {
      auto b = synthetic_bundle(rng, spec, "ctx" + std::to_string(ctx) + "_" + std::string(to_string(e)), e,
                                std::nullopt, &base);
      b.manifest.variant_of = "ctx" + std::to_string(ctx);
      write_bundle(b, root / b.manifest.example_id);
      ids.push_back(b.manifest.example_id);
    }
  }
  write_corpus_index(root, ids);
}

void write_drift_same(const fs::path& root) {
  SyntheticSpec spec;
  spec.layers = 2;
  spec.seq_len = 6;
  spec.hidden_dim = 3;
  spec.hidden_noise = 0.0;
  Rng rng(13);
  std::vector<std::string> ids;
  for (int ctx = 0; ctx < 2; ++ctx) {
    const auto first = synthetic_bundle(rng, spec, "same" + std::to_string(ctx) + "_happy", Emotion::Happy);
    for (Emotion e : {Emotion::Happy, Emotion::Sad}) {
      auto b = first;
      b.manifest.example_id = "same" + std::to_string(ctx) + "_" + std::string(to_string(e));
      b.manifest.emotion = e;
      b.manifest.variant_of = "same" + std::to_string(ctx);
      write_bundle(b, root / b.manifest.example_id);
      ids.push_back(b.manifest.example_id);
    }
  }
  write_corpus_index(root, ids);
}

void write_bad_bundle(const fs::path& dir) {
  Rng rng(17);
  SyntheticSpec spec;
  spec.seq_len = 4;
  auto b = synthetic_bundle(rng, spec, "bad", Emotion::Fear);
  write_bundle(b, dir);
  auto& A = b.attention[0];
  for (std::size_t j = 0; j < 4; ++j) A.data[1 * 4 + j] *= 0.8f;
  npy::write(dir / "attn_L0.npy", A);
}

void write_scores(const fs::path& path) {
  Rng rng(19);
  std::ofstream out(path);
  int sid = 0;
  for (const char* doc : {"story_a", "story_b"}) {
    Emotion cur = Emotion::Sad;
    for (int i = 0; i < 30; ++i) {
      if (rng.uniform() < 0.2) cur = emotion_from_index(rng.below(kNumEmotions));
      // peaked on the current label with a random margin
      const double top = 0.3 + 0.65 * rng.uniform();
      std::vector<double> p(kNumEmotions, (1.0 - top) / double(kNumEmotions - 1));
      p[index_of(cur)] = top;
      nlohmann::json j{{"document_id", doc},
                       {"sentence_id", "s" + std::to_string(sid++)},
                       {"word_count", 6 + rng.below(20)},
                       {"probs", p}};
      out << j.dump() << "\n";
    }
  }
}

void write_qa(const fs::path& path) {
  std::ofstream out(path);
  const nlohmann::json recs = nlohmann::json::array({
      {{"id", "q1"},
       {"human_answers", {"raw meat", "Raw meat.", "cooked meat"}},
       {"answer", "the raw meat"},
       {"large_answer", "raw meat"},
       {"small_answer", "cooked meat"}},
      {{"id", "q2"},
       {"human_answers", {"the stony plains", "Stony plains", "plains"}},
       {"answer", "stony plains"},
       {"large_answer", "Stony plains"},
       {"small_answer", "stony plains!"}},
      {{"id", "q3"},
       {"human_answers", {"a lantern", "lantern", "an old lantern"}},
       {"answer", "candle"},
       {"large_answer", "candle"},
       {"small_answer", "lantern"}},
  });
  for (const auto& r : recs) out << r.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("tests/fixtures");
  try {
    for (const char* d : {"corpus", "drift", "drift_same", "bad_bundle"}) fs::remove_all(root / d);
    fs::create_directories(root);
    write_corpus(root / "corpus");
    write_drift(root / "drift");
    write_drift_same(root / "drift_same");
    write_bad_bundle(root / "bad_bundle");
    write_scores(root / "scores.jsonl");
    write_qa(root / "qa.jsonl");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cout << "fixtures written to " << root << "\n";
  return 0;
}
