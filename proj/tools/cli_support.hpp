#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>
#include <unicode/uvernum.h>

#include "affectlens/affectlens.hpp"

namespace affectlens::cli {

inline constexpr const char* kToolVersion = "0.1.0";

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// Tracks the artifacts of one subcommand run and writes run_manifest.json.
class Run {
 public:
  Run(const CLI::App& sub, fs::path out) : sub_(sub), out_(std::move(out)) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec || !fs::is_directory(out_)) {
      throw Error(ErrorKind::IoFailure, out_.string() + ": cannot create output directory");
    }
  }

  fs::path path(const std::string& name) {
    outputs_.push_back(name);
    return out_ / name;
  }

  std::ofstream open(const std::string& name) {
    const auto p = path(name);
    std::ofstream f(p, std::ios::trunc | std::ios::binary);
    if (!f) throw Error(ErrorKind::IoFailure, p.string() + ": cannot write");
    return f;
  }

  void write_json(const std::string& name, const ojson& j) {
    auto f = open(name);
    f << j.dump(2) << "\n";
    if (!f) throw Error(ErrorKind::IoFailure, name + ": write failed");
  }

  // Config echo covers every option of the subcommand, defaults included.
  // The worker count is left out on purpose: outputs do not depend on it.
  void finish() {
    ojson config = ojson::object();
    for (const CLI::Option* o : sub_.get_options()) {
      const std::string name = o->get_single_name();
      if (name == "help" || name == "h" || name == "threads") continue;
      if (o->get_expected_min() == 0) {
        config[name] = o->count() > 0;
      } else if (o->count() > 0) {
        const auto& r = o->results();
        if (o->get_expected_max() > 1) {
          config[name] = r;
        } else {
          config[name] = r.back();
        }
      } else if (!o->get_default_str().empty()) {
        config[name] = o->get_default_str();
      } else {
        config[name] = nullptr;
      }
    }
    ojson m;
    m["tool"] = "affectlens";
    m["version"] = kToolVersion;
    m["subcommand"] = sub_.get_name();
    m["config"] = config;
    m["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                     "." + std::to_string(EIGEN_MINOR_VERSION)},
                      {"icu", U_ICU_VERSION},
                      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                      {"cli11", CLI11_VERSION}};
    m["outputs"] = outputs_;
    std::ofstream f(out_ / "run_manifest.json", std::ios::trunc);
    if (!f) throw Error(ErrorKind::IoFailure, (out_ / "run_manifest.json").string() + ": cannot write");
    f << m.dump(2) << "\n";
  }

 private:
  const CLI::App& sub_;
  fs::path out_;
  std::vector<std::string> outputs_;
};

/// Features either from a precomputed CSV or computed from a corpus.
struct FeatureSource {
  std::string features_csv;
  std::string corpus;
  FeatureConfig cfg;

  void add_options(CLI::App* sub) {
    auto* csv = sub->add_option("--features", features_csv, "feature CSV written by `features`");
    auto* dir = sub->add_option("--corpus", corpus, "bundle corpus directory");
    csv->excludes(dir);
    sub->add_option("--d0", cfg.d0, "tail-mass distance threshold")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--k", cfg.top_k, "top-k for overlap and focus-from")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_flag("--raw-tailmass", cfg.raw_tailmass, "tail mass without the 1/H factor");
  }

  FeatureTable load(std::size_t threads) const {
    if (!features_csv.empty()) return read_feature_csv(features_csv);
    if (corpus.empty()) throw Error(ErrorKind::ConfigError, "one of --features or --corpus is required");
    return {feature_names(), aggregate_corpus(read_corpus(corpus, threads), cfg, threads)};
  }
};

inline std::vector<int> emotion_labels(const FeatureTable& t) {
  std::vector<int> y;
  y.reserve(t.rows.size());
  for (const auto& r : t.rows) y.push_back(static_cast<int>(index_of(r.emotion)));
  return y;
}

inline ojson cv_json(const stats::CVReport& r) {
  return {{"metric", r.metric}, {"fold_values", r.fold_values}, {"mean", r.mean}, {"std", r.std}};
}

inline Eigen::MatrixXd to_eigen(const Tensor<double>& t, const std::string& where) {
  if (t.rank() != 2) throw Error(ErrorKind::ShapeMismatch, where + ": expected an [N, d] array");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    for (std::size_t c = 0; c < t.dim(1); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.data[r * t.dim(1) + c];
    }
  }
  return m;
}

inline std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::MissingFile, p.string() + " does not exist");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace affectlens::cli
