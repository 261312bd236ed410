#include "semcom/metrics.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace semcom::metrics {

double recall_at_k(const std::vector<std::vector<int>>& rankings,
                   const std::vector<int>& query_labels, const std::vector<int>& gallery_labels,
                   int k) {
    if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
    if (rankings.empty()) throw std::invalid_argument("recall_at_k: no queries");
    if (rankings.size() != query_labels.size())
        throw std::invalid_argument("recall_at_k: rankings/labels length mismatch");
    int hits = 0;
    for (size_t q = 0; q < rankings.size(); ++q) {
        const auto& r = rankings[q];
        const int lim = std::min<int>(k, static_cast<int>(r.size()));
        for (int i = 0; i < lim; ++i) {
            if (gallery_labels.at(r[i]) == query_labels[q]) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

namespace {
std::map<std::vector<int>, int> ngram_counts(const std::vector<int>& seq, int n) {
    std::map<std::vector<int>, int> counts;
    if (static_cast<int>(seq.size()) < n) return counts;
    for (size_t i = 0; i + n <= seq.size(); ++i)
        ++counts[std::vector<int>(seq.begin() + i, seq.begin() + i + n)];
    return counts;
}
}  // namespace

double sentence_bleu(const std::vector<int>& candidate, const std::vector<int>& reference,
                     int max_n) {
    if (reference.empty()) throw std::invalid_argument("sentence_bleu: empty reference");
    if (candidate.empty()) return 0.0;
    const int c = static_cast<int>(candidate.size());
    const int r = static_cast<int>(reference.size());
    const int orders = std::min(max_n, c);

    double log_sum = 0.0;
    for (int n = 1; n <= orders; ++n) {
        const auto cand = ngram_counts(candidate, n);
        const auto ref = ngram_counts(reference, n);
        long matched = 0, total = 0;
        for (const auto& [gram, count] : cand) {
            total += count;
            auto it = ref.find(gram);
            if (it != ref.end()) matched += std::min(count, it->second);
        }
        if (matched == 0) return 0.0;
        log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
    }
    const double bp = c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / c);
    return bp * std::exp(log_sum / orders);
}

double corpus_bleu(const std::vector<std::vector<int>>& candidates,
                   const std::vector<std::vector<int>>& references, int max_n) {
    if (candidates.size() != references.size())
        throw std::invalid_argument("corpus_bleu: length mismatch");
    if (candidates.empty()) throw std::invalid_argument("corpus_bleu: empty corpus");
    double sum = 0.0;
    for (size_t i = 0; i < candidates.size(); ++i)
        sum += sentence_bleu(candidates[i], references[i], max_n);
    return sum / static_cast<double>(candidates.size());
}

double answer_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("answer_accuracy: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("answer_accuracy: empty input");
    int correct = 0;
    for (size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace semcom::metrics
