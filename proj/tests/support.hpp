#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ikea/corpus.hpp"
#include "ikea/prompt.hpp"
#include "ikea/rollout.hpp"

namespace ikea::testing {

inline PromptTemplate tiny_prompt() { return PromptTemplate("Answer with tags.\nQuestion: {question}"); }

inline std::vector<Document> capital_docs() {
  return {
      {"d0", "France", "The capital of France is Paris."},
      {"d1", "Germany", "The capital of Germany is Berlin."},
      {"d2", "Italy", "The capital of Italy is Rome. Rome is old."},
  };
}

inline TaskInstance task(std::string id, std::string q, std::vector<std::string> golds,
                         Label label = Label::Unlabeled, std::string source = "t") {
  return TaskInstance{std::move(id), std::move(q), std::move(golds), label, std::move(source)};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ikea-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Random lowercase text over a small alphabet of words.
inline std::string random_text(std::mt19937_64& rng, std::size_t words) {
  static const std::vector<std::string> pool = {"alpha", "beta", "gamma", "delta", "eps",   "zeta",
                                                "eta",   "theta", "iota", "kappa", "lambda", "mu",
                                                "nu",    "xi",    "omicron", "pi",  "rho",   "sigma"};
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out += ' ';
    out += pool[rng() % pool.size()];
  }
  return out;
}

/// BM25 computed from scratch for every document: term counts by scanning
/// the raw text, document frequencies by scanning the whole corpus.
inline std::vector<Hit> brute_force_bm25(const std::vector<Document>& docs, const std::string& query,
                                         std::size_t k, Bm25Params p = {}) {
  std::vector<std::vector<std::string>> terms;
  double total = 0;
  for (const auto& d : docs) {
    auto t = index_terms(d.title);
    for (auto& b : index_terms(d.body)) t.push_back(b);
    total += static_cast<double>(t.size());
    terms.push_back(std::move(t));
  }
  const double n = static_cast<double>(docs.size());
  const double avg = docs.empty() ? 0.0 : total / n;
  std::vector<std::string> q;
  for (auto& t : index_terms(query)) {
    if (std::find(q.begin(), q.end(), t) == q.end()) q.push_back(t);
  }
  std::vector<Hit> hits;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    double score = 0.0;
    for (const auto& term : q) {
      double df = 0;
      for (const auto& other : terms) df += std::count(other.begin(), other.end(), term) > 0 ? 1 : 0;
      if (df == 0) continue;
      const double tf = static_cast<double>(std::count(terms[d].begin(), terms[d].end(), term));
      if (tf == 0) continue;
      const double idf = std::max(0.0, std::log(1.0 + (n - df + 0.5) / (df + 0.5)));
      const double norm = 1.0 - p.b + p.b * static_cast<double>(terms[d].size()) / avg;
      score += idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * norm);
    }
    if (score > 0.0) hits.push_back({docs[d].doc_id, score});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

/// Corpus of `n` random documents over the word pool.
inline std::vector<Document> random_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back({"doc" + std::to_string(1000 + i), random_text(rng, 1 + rng() % 2),
                    random_text(rng, 5 + rng() % 30)});
  }
  return docs;
}

}  // namespace ikea::testing
