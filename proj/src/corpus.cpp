#include "ikea/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace ikea {

namespace {

const std::vector<CorpusIndex::Posting> kEmptyPostings;

bool hit_before(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

}  // namespace

const std::vector<CorpusIndex::Posting>& CorpusIndex::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  return it == postings_.end() ? kEmptyPostings : it->second;
}

const Document* CorpusIndex::find(std::string_view doc_id) const {
  auto it = by_id_.find(std::string(doc_id));
  return it == by_id_.end() ? nullptr : &docs_[it->second];
}

double CorpusIndex::idf(std::size_t df) const {
  const double n = static_cast<double>(docs_.size());
  const double d = static_cast<double>(df);
  return std::max(0.0, std::log(1.0 + (n - d + 0.5) / (d + 0.5)));
}

CorpusIndex index_corpus(std::vector<Document> docs, Bm25Params params) {
  CorpusIndex index;
  index.params_ = params;
  std::size_t total = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (!index.by_id_.emplace(docs[d].doc_id, d).second) throw DuplicateIdError(docs[d].doc_id);
    std::unordered_map<std::string, std::size_t> tf;
    std::size_t len = 0;
    for (const auto* field : {&docs[d].title, &docs[d].body}) {
      for (auto& term : index_terms(*field)) {
        ++tf[term];
        ++len;
      }
    }
    for (auto& [term, count] : tf) index.postings_[term].push_back({d, count});
    index.lengths_.push_back(len);
    total += len;
  }
  // Postings are built doc by doc so each list is already in doc order.
  index.avg_len_ = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
  index.docs_ = std::move(docs);
  return index;
}

std::vector<std::string> query_terms(std::string_view query) {
  std::vector<std::string> terms;
  std::unordered_set<std::string> seen;
  for (auto& t : index_terms(query)) {
    if (seen.insert(t).second) terms.push_back(std::move(t));
  }
  return terms;
}

RetrievalResult retrieve(const CorpusIndex& index, std::string_view query, std::size_t k) {
  RetrievalResult result;
  result.query = std::string(query);
  result.k = k;
  if (index.size() == 0 || k == 0) return result;

  const auto& p = index.params();
  const double avg = index.average_length();
  std::vector<double> scores(index.size(), 0.0);
  for (const auto& term : query_terms(query)) {
    const auto& plist = index.postings(term);
    if (plist.empty()) continue;
    const double idf = index.idf(plist.size());
    for (const auto& post : plist) {
      const double tf = static_cast<double>(post.tf);
      const double norm = 1.0 - p.b + p.b * static_cast<double>(index.doc_length(post.doc)) / avg;
      scores[post.doc] += idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * norm);
    }
  }

  std::vector<Hit> hits;
  for (std::size_t d = 0; d < scores.size(); ++d) {
    if (scores[d] > 0.0) hits.push_back({index.documents()[d].doc_id, scores[d]});
  }
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), hit_before);
  hits.resize(keep);
  result.hits = std::move(hits);
  return result;
}

std::vector<RetrievalResult> retrieve_batch_serial(const CorpusIndex& index,
                                                   const std::vector<std::string>& queries,
                                                   std::size_t k) {
  std::vector<RetrievalResult> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(retrieve(index, q, k));
  return out;
}

std::vector<RetrievalResult> retrieve_batch(const CorpusIndex& index,
                                            const std::vector<std::string>& queries,
                                            std::size_t k) {
  std::vector<RetrievalResult> out(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = retrieve(index, queries[static_cast<std::size_t>(i)], k);
  }
  return out;
}

std::string observation_block(const Document& doc) {
  return "Title: " + doc.title + "\n" + doc.body + "\n";
}

std::string observation_body(const RetrievalResult& result, const CorpusIndex& index,
                             std::size_t max_chars) {
  if (result.hits.empty()) return std::string(kNoResults);
  std::string body;
  for (const auto& hit : result.hits) {
    const Document* doc = index.find(hit.doc_id);
    if (doc == nullptr) continue;
    std::string block = observation_block(*doc);
    if (body.size() + block.size() > max_chars) {
      if (body.empty()) body = block.substr(0, max_chars);
      break;
    }
    body += block;
  }
  return body;
}

std::string format_observation(const RetrievalResult& result, const CorpusIndex& index,
                               std::size_t max_chars) {
  return std::string(kContextOpen) + observation_body(result, index, max_chars) +
         std::string(kContextClose);
}

}  // namespace ikea
