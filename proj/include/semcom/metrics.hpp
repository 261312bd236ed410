#pragma once

#include <vector>

namespace semcom::metrics {

// Fraction of queries whose top-k ranked gallery items contain at least one
// entry with the query's label. rankings[q] lists gallery indices best-first.
double recall_at_k(const std::vector<std::vector<int>>& rankings,
                   const std::vector<int>& query_labels, const std::vector<int>& gallery_labels,
                   int k);

// Sentence BLEU: geometric mean of modified n-gram precisions (n = 1..max_n,
// capped at the candidate length) times the brevity penalty. No smoothing; a
// zero precision at any order gives zero. Empty candidates score zero.
double sentence_bleu(const std::vector<int>& candidate, const std::vector<int>& reference,
                     int max_n = 4);

// Mean of sentence scores over the corpus.
double corpus_bleu(const std::vector<std::vector<int>>& candidates,
                   const std::vector<std::vector<int>>& references, int max_n = 4);

// Exact-match fraction. Throws on length mismatch.
double answer_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace semcom::metrics
