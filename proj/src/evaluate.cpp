#include <algorithm>
#include <cmath>

#include "semcom/experiments.hpp"
#include "semcom/metrics.hpp"

namespace semcom::exp {

using namespace semcom::nn;

namespace {

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a ^ (0x9e3779b97f4a7c15ULL + b);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    return x ^ (x >> 27);
}

// Operating-point channel: user count override and per-point CSI quality;
// AWGN is identity-matrix only, so its antenna count tracks the user count.
model::ChannelParams point_channel(const model::ChannelParams& base, const EvalOptions& opt) {
    model::ChannelParams ch = base;
    if (opt.users > 0) ch.users = opt.users;
    ch.csi_error_var = opt.csi_error_var;
    if (ch.model == chan::FadingModel::AWGN) ch.m_antennas = ch.users;
    if (ch.m_antennas < ch.users)
        throw std::invalid_argument("evaluation: user count exceeds receive antennas");
    return ch;
}

std::vector<int> capped_indices(const std::vector<int>& all, int cap) {
    std::vector<int> out = all;
    if (cap > 0 && static_cast<int>(out.size()) > cap) out.resize(cap);
    return out;
}

// Drops the query's own gallery slot and keeps the best k.
std::vector<int> strip_self(const std::vector<int>& ranked, int self, int k) {
    std::vector<int> out;
    for (int idx : ranked) {
        if (idx == self) continue;
        out.push_back(idx);
        if (static_cast<int>(out.size()) == k) break;
    }
    return out;
}

}  // namespace

double eval_ir_recall(const model::RetrievalTransceiver& tx, const data::RetrievalDataset& ds,
                      const model::ChannelParams& base, const EvalOptions& opt, int k) {
    const auto ch_params = point_channel(base, opt);
    model::MultiUserChannel ch(ch_params);
    const int k_users = ch_params.users;

    // Server-side gallery: clean embeddings of the held-out images.
    const auto& test = ds.test_indices;
    Mat gallery(static_cast<int>(test.size()), tx.config().d_model);
    std::vector<int> gallery_labels(test.size());
    for (size_t i = 0; i < test.size(); ++i) {
        Var z = tx.semantic_encode(ds.images[test[i]]);
        for (int j = 0; j < gallery.cols; ++j) gallery.at(static_cast<int>(i), j) = z->val.at(0, j);
        gallery_labels[i] = ds.labels[test[i]];
    }

    auto queries = capped_indices(test, opt.max_samples);
    const int n_blocks = static_cast<int>(queries.size()) / k_users;
    if (n_blocks == 0) throw std::invalid_argument("eval_ir_recall: too few queries for K users");

    Rng rng(mix(opt.seed, 0x1701));
    std::vector<std::vector<int>> rankings;
    std::vector<int> query_labels;
    for (int b = 0; b < n_blocks; ++b) {
        std::vector<Var> rows;
        for (int u = 0; u < k_users; ++u) {
            const int img_idx = queries[b * k_users + u];
            rows.push_back(tx.transmit_encode(tx.semantic_encode(ds.images[img_idx])));
        }
        auto res = ch.pass(rows, opt.snr_db, rng.next_u64(), rng.next_u64());
        for (int u = 0; u < k_users; ++u) {
            const int qpos = b * k_users + u;
            Var z_hat = tx.receive_decode(res.detected_rows[u]);
            auto ranked = model::rank_by_distance(z_hat->val, gallery, k + 1);
            rankings.push_back(strip_self(ranked, qpos, k));
            query_labels.push_back(ds.labels[queries[qpos]]);
        }
    }
    return metrics::recall_at_k(rankings, query_labels, gallery_labels, k);
}

double eval_mt_bleu(const model::TranslationTransceiver& tx, const data::ParallelCorpus& ds,
                    const model::ChannelParams& base, const EvalOptions& opt) {
    const auto ch_params = point_channel(base, opt);
    model::MultiUserChannel ch(ch_params);
    const int k_users = ch_params.users;

    auto samples = capped_indices(ds.test_indices, opt.max_samples);
    const int n_blocks = static_cast<int>(samples.size()) / k_users;
    if (n_blocks == 0) throw std::invalid_argument("eval_mt_bleu: too few sentences for K users");

    Rng rng(mix(opt.seed, 0x2702));
    std::vector<std::vector<int>> cands, refs;
    for (int b = 0; b < n_blocks; ++b) {
        std::vector<Var> rows;
        std::vector<std::vector<bool>> masks;
        for (int u = 0; u < k_users; ++u) {
            auto enc = tx.semantic_encode(ds.source[samples[b * k_users + u]]);
            masks.push_back(enc.mask);
            rows.push_back(tx.transmit_encode(enc.z));
        }
        auto res = ch.pass(rows, opt.snr_db, rng.next_u64(), rng.next_u64());
        for (int u = 0; u < k_users; ++u) {
            Var z_hat = tx.receive_decode(res.detected_rows[u]);
            cands.push_back(tx.decode_greedy(z_hat, masks[u], tx.config().max_len + 2));
            refs.push_back(ds.target[samples[b * k_users + u]]);
        }
    }
    return metrics::corpus_bleu(cands, refs);
}

double eval_vqa_accuracy(const model::VqaTransceiver& tx, const data::VqaDataset& ds,
                         const model::ChannelParams& base, const EvalOptions& opt) {
    const auto ch_params = point_channel(base, opt);
    if (ch_params.users % 2 != 0)
        throw std::invalid_argument("eval_vqa_accuracy: VQA needs an even user count");
    model::MultiUserChannel ch(ch_params);
    const int pairs = ch_params.users / 2;

    auto samples = capped_indices(ds.test_indices, opt.max_samples);
    const int n_blocks = static_cast<int>(samples.size()) / pairs;
    if (n_blocks == 0) throw std::invalid_argument("eval_vqa_accuracy: too few questions");

    Rng rng(mix(opt.seed, 0x3703));
    std::vector<int> predictions, labels;
    for (int b = 0; b < n_blocks; ++b) {
        std::vector<Var> rows;
        std::vector<const data::VqaQuestion*> qs;
        std::vector<std::vector<bool>> txt_masks;
        for (int p = 0; p < pairs; ++p) {
            const auto& q = ds.questions[samples[b * pairs + p]];
            qs.push_back(&q);
            rows.push_back(
                tx.image_transmit_encode(tx.image_semantic_encode(ds.scenes[q.scene].image)));
            auto txt = tx.text_semantic_encode(q.tokens);
            txt_masks.push_back(txt.mask);
            rows.push_back(tx.text_transmit_encode(txt.z));
        }
        auto res = ch.pass(rows, opt.snr_db, rng.next_u64(), rng.next_u64());
        for (int p = 0; p < pairs; ++p) {
            Var img_tokens = tx.dimension_increase(
                tx.image_receive_decode(res.detected_rows[2 * p]));
            Var txt_tokens = tx.text_receive_decode(res.detected_rows[2 * p + 1]);
            auto trace = tx.fuse(txt_tokens, txt_masks[p], img_tokens);
            Var dist = tx.information_fusion(trace.text_cls, trace.image_cls);
            int best = 0;
            for (int j = 1; j < dist->cols(); ++j)
                if (dist->val.at(0, j) > dist->val.at(0, best)) best = j;
            predictions.push_back(best);
            labels.push_back(qs[p]->answer);
        }
    }
    return metrics::answer_accuracy(predictions, labels);
}

double eval_ir_recall_baseline(const model::RetrievalTransceiver& tx,
                               const data::RetrievalDataset& ds,
                               const model::ChannelParams& base, const EvalOptions& opt,
                               baseline::Modulation mod, int k) {
    const auto ch_params = point_channel(base, opt);
    const int k_users = ch_params.users;

    const auto& test = ds.test_indices;
    Mat gallery(static_cast<int>(test.size()), tx.config().d_model);
    std::vector<int> gallery_labels(test.size());
    for (size_t i = 0; i < test.size(); ++i) {
        Var z = tx.semantic_encode(ds.images[test[i]]);
        for (int j = 0; j < gallery.cols; ++j) gallery.at(static_cast<int>(i), j) = z->val.at(0, j);
        gallery_labels[i] = ds.labels[test[i]];
    }

    auto queries = capped_indices(test, opt.max_samples);
    const int n_blocks = static_cast<int>(queries.size()) / k_users;
    if (n_blocks == 0) throw std::invalid_argument("baseline ir eval: too few queries");

    Rng rng(mix(opt.seed, 0x4704));
    std::vector<std::vector<int>> rankings;
    std::vector<int> query_labels;
    for (int b = 0; b < n_blocks; ++b) {
        std::vector<baseline::BaselinePayload> payloads(k_users);
        for (int u = 0; u < k_users; ++u) {
            payloads[u].kind = baseline::SourceKind::ImageRaw;
            payloads[u].image = ds.images[queries[b * k_users + u]];
            payloads[u].mod = mod;
        }
        auto res = baseline::baseline_end_to_end(payloads, ch_params, opt.snr_db, rng.next_u64());
        for (int u = 0; u < k_users; ++u) {
            const int qpos = b * k_users + u;
            if (res[u].decode_ok) {
                Var z = tx.semantic_encode(res[u].image);
                auto ranked = model::rank_by_distance(z->val, gallery, k + 1);
                rankings.push_back(strip_self(ranked, qpos, k));
            } else {
                rankings.push_back({});  // destroyed image: retrieval miss
            }
            query_labels.push_back(ds.labels[queries[qpos]]);
        }
    }
    return metrics::recall_at_k(rankings, query_labels, gallery_labels, k);
}

double eval_mt_bleu_baseline(const model::TranslationTransceiver& tx,
                             const data::ParallelCorpus& ds, const model::ChannelParams& base,
                             const EvalOptions& opt, baseline::Modulation mod) {
    const auto ch_params = point_channel(base, opt);
    const int k_users = ch_params.users;

    auto samples = capped_indices(ds.test_indices, opt.max_samples);
    const int n_blocks = static_cast<int>(samples.size()) / k_users;
    if (n_blocks == 0) throw std::invalid_argument("baseline mt eval: too few sentences");

    Rng rng(mix(opt.seed, 0x5705));
    std::vector<std::vector<int>> cands, refs;
    for (int b = 0; b < n_blocks; ++b) {
        std::vector<baseline::BaselinePayload> payloads(k_users);
        for (int u = 0; u < k_users; ++u) {
            payloads[u].kind = baseline::SourceKind::TextUtf8;
            payloads[u].text = ds.source[samples[b * k_users + u]];
            payloads[u].mod = mod;
        }
        auto res = baseline::baseline_end_to_end(payloads, ch_params, opt.snr_db, rng.next_u64());
        for (int u = 0; u < k_users; ++u) {
            std::vector<int> cand;
            if (res[u].decode_ok &&
                static_cast<int>(res[u].text.size()) <= tx.config().max_len) {
                bool in_vocab = true;
                for (int id : res[u].text) in_vocab &= id >= 0 && id < tx.config().vocab;
                if (in_vocab && !res[u].text.empty()) {
                    // Received source text, translated by the clean model.
                    auto enc = tx.semantic_encode(res[u].text);
                    cand = tx.decode_greedy(enc.z, enc.mask, tx.config().max_len + 2);
                }
            }
            cands.push_back(std::move(cand));  // empty candidate scores zero
            refs.push_back(ds.target[samples[b * k_users + u]]);
        }
    }
    return metrics::corpus_bleu(cands, refs);
}

double eval_vqa_accuracy_baseline(const model::VqaTransceiver& tx, const data::VqaDataset& ds,
                                  const model::ChannelParams& base, const EvalOptions& opt,
                                  baseline::Modulation text_mod, baseline::Modulation image_mod) {
    const auto ch_params = point_channel(base, opt);
    if (ch_params.users % 2 != 0)
        throw std::invalid_argument("baseline vqa eval: even user count required");
    const int pairs = ch_params.users / 2;

    auto samples = capped_indices(ds.test_indices, opt.max_samples);
    const int n_blocks = static_cast<int>(samples.size()) / pairs;
    if (n_blocks == 0) throw std::invalid_argument("baseline vqa eval: too few questions");

    Rng rng(mix(opt.seed, 0x6706));
    std::vector<int> predictions, labels;
    const int vocab = tx.config().question_vocab;
    for (int b = 0; b < n_blocks; ++b) {
        std::vector<baseline::BaselinePayload> payloads(2 * pairs);
        std::vector<const data::VqaQuestion*> qs;
        for (int p = 0; p < pairs; ++p) {
            const auto& q = ds.questions[samples[b * pairs + p]];
            qs.push_back(&q);
            payloads[2 * p].kind = baseline::SourceKind::ImageRaw;
            payloads[2 * p].image = ds.scenes[q.scene].image;
            payloads[2 * p].mod = image_mod;
            payloads[2 * p + 1].kind = baseline::SourceKind::TextUtf8;
            payloads[2 * p + 1].text = q.tokens;
            payloads[2 * p + 1].mod = text_mod;
        }
        auto res = baseline::baseline_end_to_end(payloads, ch_params, opt.snr_db, rng.next_u64());
        for (int p = 0; p < pairs; ++p) {
            int answer = -1;  // never matches a label
            const auto& img_res = res[2 * p];
            const auto& txt_res = res[2 * p + 1];
            bool ok = img_res.decode_ok && txt_res.decode_ok &&
                      static_cast<int>(txt_res.text.size()) <= tx.config().max_question_len &&
                      !txt_res.text.empty();
            if (ok)
                for (int id : txt_res.text) ok &= id >= 0 && id < vocab;
            if (ok) {
                Var img_tokens =
                    tx.dimension_increase(tx.image_semantic_encode(img_res.image));
                auto txt = tx.text_semantic_encode(txt_res.text);
                auto trace = tx.fuse(txt.z, txt.mask, img_tokens);
                Var dist = tx.information_fusion(trace.text_cls, trace.image_cls);
                answer = 0;
                for (int j = 1; j < dist->cols(); ++j)
                    if (dist->val.at(0, j) > dist->val.at(0, answer)) answer = j;
            }
            predictions.push_back(answer);
            labels.push_back(qs[p]->answer);
        }
    }
    return metrics::answer_accuracy(predictions, labels);
}

}  // namespace semcom::exp
