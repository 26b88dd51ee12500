#pragma once

// Document store, BM25 inverted index and observation formatting.

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ikea/text.hpp"

namespace ikea {

struct Document {
  std::string doc_id;
  std::string title;
  std::string body;

  bool operator==(const Document&) const = default;
};

struct Hit {
  std::string doc_id;
  double score = 0.0;
};

struct RetrievalResult {
  std::string query;
  std::vector<Hit> hits;  // score descending, doc_id ascending on ties
  std::size_t k = 0;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

class DuplicateIdError : public Error {
 public:
  explicit DuplicateIdError(const std::string& id) : Error("duplicate doc_id: " + id) {}
};

/// Immutable after construction; safe for concurrent readers.
class CorpusIndex {
 public:
  struct Posting {
    std::size_t doc = 0;
    std::size_t tf = 0;
  };

  CorpusIndex() = default;

  const std::vector<Document>& documents() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  const Bm25Params& params() const { return params_; }
  double average_length() const { return avg_len_; }
  std::size_t vocabulary_size() const { return postings_.size(); }
  std::size_t doc_length(std::size_t doc) const { return lengths_[doc]; }

  /// Posting list for `term`; empty when the term is unknown.
  const std::vector<Posting>& postings(std::string_view term) const;
  std::size_t document_frequency(std::string_view term) const { return postings(term).size(); }

  const Document* find(std::string_view doc_id) const;

  /// Natural-log IDF, ln(1 + (N - df + 0.5) / (df + 0.5)), floored at 0.
  double idf(std::size_t df) const;

 private:
  friend CorpusIndex index_corpus(std::vector<Document> docs, Bm25Params params);

  std::vector<Document> docs_;
  std::vector<std::size_t> lengths_;
  double avg_len_ = 0.0;
  Bm25Params params_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Indexes title and body terms of every document.
CorpusIndex index_corpus(std::vector<Document> docs, Bm25Params params = {});

/// Unique query terms in order of first occurrence.
std::vector<std::string> query_terms(std::string_view query);

/// Top-k documents by BM25; zero-score documents are excluded.
RetrievalResult retrieve(const CorpusIndex& index, std::string_view query, std::size_t k);

/// Batched retrieval. The serial variant is the reference for the OpenMP one;
/// both return identical results.
std::vector<RetrievalResult> retrieve_batch(const CorpusIndex& index,
                                            const std::vector<std::string>& queries, std::size_t k);
std::vector<RetrievalResult> retrieve_batch_serial(const CorpusIndex& index,
                                                   const std::vector<std::string>& queries,
                                                   std::size_t k);

inline constexpr std::string_view kNoResults = "No results found.";
inline constexpr std::string_view kSearchLimit = "Search limit reached.";

/// Body of one hit as shown to the agent: "Title: <title>\n<body>\n".
std::string observation_block(const Document& doc);

/// `<context>` + whole blocks whose cumulative length fits `max_chars` +
/// `</context>`. A first block longer than `max_chars` is cut to fit so an
/// observation is never empty.
std::string format_observation(const RetrievalResult& result, const CorpusIndex& index,
                               std::size_t max_chars);

/// Body text (between the tags) of `format_observation`.
std::string observation_body(const RetrievalResult& result, const CorpusIndex& index,
                             std::size_t max_chars);

}  // namespace ikea
