#include "semcom/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace semcom::train {

using namespace semcom::nn;
using model::MultiUserChannel;

Var loss_ir(const Var& z_batch, const std::vector<int>& labels, double margin) {
    return pairwise_embedding_loss(z_batch, labels, margin);
}

Var loss_mse(const Var& z_hat, const Var& z, const std::vector<bool>& row_mask) {
    return mse_loss_rows(z_hat, z, row_mask);
}

Var loss_ce(const Var& logits, const std::vector<int>& targets, const std::vector<bool>& mask) {
    return cross_entropy_loss(logits, targets, mask);
}

void divergence_guard(double loss, double grad_norm) {
    if (!std::isfinite(loss)) throw TrainingDiverged("non-finite loss");
    if (!std::isfinite(grad_norm) || grad_norm > 1e6)
        throw TrainingDiverged("gradient norm exploded");
}

namespace {

std::vector<int> shuffled(std::vector<int> idx, Rng& rng) {
    for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.uniform_int(0, i)]);
    return idx;
}

// Train-time augmentation for the metric-learning phase: random shift,
// brightness scale and pixel noise. Fresh per presentation, so same-class
// embeddings never align exactly and separating gradients stay alive.
Image augment(const Image& src, Rng& rng) {
    Image out(src.h, src.w, src.c);
    const int dy = rng.uniform_int(-2, 2);
    const int dx = rng.uniform_int(-2, 2);
    const double gain = rng.uniform(0.85, 1.1);
    for (int y = 0; y < src.h; ++y)
        for (int x = 0; x < src.w; ++x) {
            const int sy = std::clamp(y + dy, 0, src.h - 1);
            const int sx = std::clamp(x + dx, 0, src.w - 1);
            for (int c = 0; c < src.c; ++c)
                out.at(y, x, c) = std::clamp(
                    src.at(sy, sx, c) * gain + 0.02 * rng.normal(), 0.0, 1.0);
        }
    return out;
}

Var mean_of(const std::vector<Var>& parts) {
    Var s = parts.at(0);
    for (size_t i = 1; i < parts.size(); ++i) s = add(s, parts[i]);
    return scale(s, 1.0 / static_cast<double>(parts.size()));
}

AdamConfig adam_from(const PhaseConfig& cfg) {
    AdamConfig a;
    a.lr = cfg.lr;
    a.beta1 = cfg.beta1;
    a.beta2 = cfg.beta2;
    a.weight_decay = cfg.weight_decay;
    return a;
}

void run_step(Adam& opt, const Var& loss, const std::string& phase, int step,
              std::vector<LossRecord>& log) {
    opt.zero_grad();
    backward(loss);
    const double gn = grad_norm(opt.params());
    divergence_guard(loss->val.at(0, 0), gn);
    opt.step();
    log.push_back({phase, step, loss->val.at(0, 0), gn});
}

}  // namespace

void IrTraining::semantic_phase(const PhaseConfig& cfg, uint64_t seed) {
    if (cfg.batch < 2)
        throw std::invalid_argument("ir semantic phase: batch must be >= 2 for pairs");
    std::map<int, std::vector<int>> by_class;
    for (int i : ds_.train_indices) by_class[ds_.labels[i]].push_back(i);
    std::vector<int> classes;
    for (const auto& [cls, members] : by_class) classes.push_back(cls);
    if (classes.size() < 2)
        throw std::invalid_argument("ir semantic phase: need at least two classes");

    // Class-balanced batches: P classes x Q samples.
    const int p_request = cfg.classes_per_batch > 0 ? cfg.classes_per_batch
                                                    : std::max(2, cfg.batch / 4);
    const int p = std::min<int>(static_cast<int>(classes.size()), std::max(2, p_request));
    const int q = std::max(2, cfg.batch / p);

    Rng rng(seed);
    Adam opt(tx_.params().vars_with_prefix("sem_enc."), adam_from(cfg));
    const int steps_per_epoch =
        std::max<int>(1, static_cast<int>(ds_.train_indices.size()) / (p * q));

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int s = 0; s < steps_per_epoch; ++s) {
            auto order = shuffled(classes, rng);
            std::vector<Var> rows;
            std::vector<int> labels;
            for (int ci = 0; ci < p; ++ci) {
                const auto& members = by_class[order[ci]];
                for (int k = 0; k < q; ++k) {
                    const int idx = members[rng.uniform_int(
                        0, static_cast<int>(members.size()) - 1)];
                    rows.push_back(tx_.semantic_encode(augment(ds_.images[idx], rng)));
                    labels.push_back(ds_.labels[idx]);
                }
            }
            Var loss = loss_ir(concat_rows(rows), labels, cfg.margin);
            run_step(opt, loss, "ir_semantic", step++, log_);
        }
    }
}

void IrTraining::jsc_phase(const PhaseConfig& cfg, uint64_t seed) {
    // Frozen semantic encoder: embeddings are computed once and detached.
    std::vector<Mat> cached;
    cached.reserve(ds_.train_indices.size());
    for (int i : ds_.train_indices) cached.push_back(tx_.semantic_encode(ds_.images[i])->val);

    Rng rng(seed);
    Adam opt(tx_.params().vars_with_prefix("jsc."), adam_from(cfg));
    MultiUserChannel ch(ch_);
    const int k_users = ch_.users;
    const int batch = std::max(k_users, cfg.batch - cfg.batch % k_users);
    const int steps_per_epoch = std::max<int>(1, static_cast<int>(cached.size()) / batch);

    std::vector<int> order(cached.size());
    for (size_t i = 0; i < cached.size(); ++i) order[i] = static_cast<int>(i);

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto epoch_order = shuffled(order, rng);
        for (int s = 0; s < steps_per_epoch; ++s) {
            const double snr = rng.uniform(cfg.snr_low_db, cfg.snr_high_db);
            const uint64_t h_seed = rng.next_u64();  // one realization per batch
            std::vector<Var> z_hats, z_refs;
            for (int b = 0; b < batch; b += k_users) {
                std::vector<Var> rows;
                std::vector<Var> refs;
                for (int u = 0; u < k_users; ++u) {
                    const int idx = epoch_order[(s * batch + b + u) % epoch_order.size()];
                    Var z = constant(cached[idx]);
                    refs.push_back(z);
                    rows.push_back(tx_.transmit_encode(z));
                }
                auto res = ch.pass(rows, snr, h_seed, rng.next_u64());
                for (int u = 0; u < k_users; ++u) {
                    z_hats.push_back(tx_.receive_decode(res.detected_rows[u]));
                    z_refs.push_back(refs[u]);
                }
            }
            Var loss = loss_mse(concat_rows(z_hats), concat_rows(z_refs));
            run_step(opt, loss, "ir_jsc", step++, log_);
        }
    }
}

void MtTraining::semantic_phase(const PhaseConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    auto params = tx_.params().vars_with_prefix("sem_enc.");
    auto dec = tx_.params().vars_with_prefix("sem_dec.");
    params.insert(params.end(), dec.begin(), dec.end());
    Adam opt(std::move(params), adam_from(cfg));

    const int steps_per_epoch =
        std::max<int>(1, static_cast<int>(ds_.train_indices.size()) / cfg.batch);
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = shuffled(ds_.train_indices, rng);
        for (int s = 0; s < steps_per_epoch; ++s) {
            std::vector<Var> losses;
            for (int b = 0; b < cfg.batch; ++b) {
                const int idx = order[(s * cfg.batch + b) % order.size()];
                auto enc = tx_.semantic_encode(ds_.source[idx]);
                std::vector<int> tgt = ds_.target[idx];
                tgt.push_back(data::ParallelCorpus::kEos);
                Var logits = tx_.decode_teacher_forced(enc.z, enc.mask, tgt);
                losses.push_back(loss_ce(logits, tgt));
            }
            run_step(opt, mean_of(losses), "mt_semantic", step++, log_);
        }
    }
}

void MtTraining::jsc_phase(const PhaseConfig& cfg, uint64_t seed) {
    // Frozen semantic codec: encoder outputs cached and detached.
    std::vector<Mat> cached;
    std::vector<std::vector<bool>> masks;
    for (int i : ds_.train_indices) {
        auto enc = tx_.semantic_encode(ds_.source[i]);
        cached.push_back(enc.z->val);
        masks.push_back(enc.mask);
    }

    Rng rng(seed);
    Adam opt(tx_.params().vars_with_prefix("jsc."), adam_from(cfg));
    MultiUserChannel ch(ch_);
    const int k_users = ch_.users;
    const int batch = std::max(k_users, cfg.batch - cfg.batch % k_users);
    const int steps_per_epoch = std::max<int>(1, static_cast<int>(cached.size()) / batch);

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(cached.size());
        for (size_t i = 0; i < cached.size(); ++i) order[i] = static_cast<int>(i);
        order = shuffled(order, rng);
        for (int s = 0; s < steps_per_epoch; ++s) {
            const double snr = rng.uniform(cfg.snr_low_db, cfg.snr_high_db);
            const uint64_t h_seed = rng.next_u64();
            std::vector<Var> losses;
            for (int b = 0; b < batch; b += k_users) {
                std::vector<Var> rows;
                std::vector<int> idxs;
                for (int u = 0; u < k_users; ++u) {
                    const int idx = order[(s * batch + b + u) % order.size()];
                    idxs.push_back(idx);
                    rows.push_back(tx_.transmit_encode(constant(cached[idx])));
                }
                auto res = ch.pass(rows, snr, h_seed, rng.next_u64());
                for (int u = 0; u < k_users; ++u) {
                    Var z_hat = tx_.receive_decode(res.detected_rows[u]);
                    losses.push_back(
                        loss_mse(z_hat, constant(cached[idxs[u]]), masks[idxs[u]]));
                }
            }
            run_step(opt, mean_of(losses), "mt_jsc", step++, log_);
        }
    }
}

void MtTraining::whole_phase(const PhaseConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    Adam opt(tx_.params().vars(), adam_from(cfg));
    MultiUserChannel ch(ch_);
    const int k_users = ch_.users;
    const int batch = std::max(k_users, cfg.batch - cfg.batch % k_users);
    const int steps_per_epoch =
        std::max<int>(1, static_cast<int>(ds_.train_indices.size()) / batch);

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = shuffled(ds_.train_indices, rng);
        for (int s = 0; s < steps_per_epoch; ++s) {
            const double snr = rng.uniform(cfg.snr_low_db, cfg.snr_high_db);
            const uint64_t h_seed = rng.next_u64();
            std::vector<Var> losses;
            for (int b = 0; b < batch; b += k_users) {
                std::vector<Var> rows;
                std::vector<int> idxs;
                std::vector<std::vector<bool>> msks;
                for (int u = 0; u < k_users; ++u) {
                    const int idx = order[(s * batch + b + u) % order.size()];
                    auto enc = tx_.semantic_encode(ds_.source[idx]);
                    idxs.push_back(idx);
                    msks.push_back(enc.mask);
                    rows.push_back(tx_.transmit_encode(enc.z));
                }
                auto res = ch.pass(rows, snr, h_seed, rng.next_u64());
                for (int u = 0; u < k_users; ++u) {
                    Var z_hat = tx_.receive_decode(res.detected_rows[u]);
                    std::vector<int> tgt = ds_.target[idxs[u]];
                    tgt.push_back(data::ParallelCorpus::kEos);
                    Var logits = tx_.decode_teacher_forced(z_hat, msks[u], tgt);
                    losses.push_back(loss_ce(logits, tgt));
                }
            }
            run_step(opt, mean_of(losses), "mt_whole", step++, log_);
        }
    }
}

VqaTraining::VqaTraining(model::VqaTransceiver& tx, const data::VqaDataset& ds,
                         const model::ChannelParams& ch)
    : tx_(tx), ds_(ds), ch_(ch) {
    if (ch.users != 2)
        throw std::invalid_argument("VqaTraining: VQA needs a two-user channel (image + text)");
}

void VqaTraining::semantic_phase(const PhaseConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    Rng drop_rng(rng.next_u64());
    std::vector<Var> params;
    for (const char* prefix : {"img_sem.", "txt_sem.", "fusion."}) {
        auto part = tx_.params().vars_with_prefix(prefix);
        params.insert(params.end(), part.begin(), part.end());
    }
    Adam opt(std::move(params), adam_from(cfg));

    const int steps_per_epoch =
        std::max<int>(1, static_cast<int>(ds_.train_indices.size()) / cfg.batch);
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = shuffled(ds_.train_indices, rng);
        for (int s = 0; s < steps_per_epoch; ++s) {
            std::vector<Var> losses;
            for (int b = 0; b < cfg.batch; ++b) {
                const auto& q = ds_.questions[order[(s * cfg.batch + b) % order.size()]];
                Var img_z = tx_.image_semantic_encode(ds_.scenes[q.scene].image);
                auto txt = tx_.text_semantic_encode(q.tokens);
                Var img_tokens = tx_.dimension_increase(img_z, true, &drop_rng);
                auto trace = tx_.fuse(txt.z, txt.mask, img_tokens);
                Var logits =
                    tx_.answer_logits(trace.text_cls, trace.image_cls, true, &drop_rng);
                losses.push_back(loss_ce(logits, {q.answer}));
            }
            run_step(opt, mean_of(losses), "vqa_semantic", step++, log_);
        }
    }
}

void VqaTraining::jsc_phase(const PhaseConfig& cfg, uint64_t seed) {
    // Frozen semantic encoders; per-sample image/text features cached.
    std::vector<Mat> img_cached, txt_cached;
    std::vector<std::vector<bool>> txt_masks;
    std::vector<int> scene_of;
    {
        std::map<int, int> scene_slot;
        for (int qi : ds_.train_indices) {
            const auto& q = ds_.questions[qi];
            if (!scene_slot.count(q.scene)) {
                scene_slot[q.scene] = static_cast<int>(img_cached.size());
                img_cached.push_back(tx_.image_semantic_encode(ds_.scenes[q.scene].image)->val);
            }
            scene_of.push_back(scene_slot[q.scene]);
            auto txt = tx_.text_semantic_encode(q.tokens);
            txt_cached.push_back(txt.z->val);
            txt_masks.push_back(txt.mask);
        }
    }

    Rng rng(seed);
    std::vector<Var> params;
    for (const char* prefix : {"img_jsc.", "txt_jsc."}) {
        auto part = tx_.params().vars_with_prefix(prefix);
        params.insert(params.end(), part.begin(), part.end());
    }
    Adam opt(std::move(params), adam_from(cfg));
    MultiUserChannel ch(ch_);

    const int n = static_cast<int>(txt_cached.size());
    const int steps_per_epoch = std::max(1, n / cfg.batch);
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        order = shuffled(order, rng);
        for (int s = 0; s < steps_per_epoch; ++s) {
            const double snr = rng.uniform(cfg.snr_low_db, cfg.snr_high_db);
            const uint64_t h_seed = rng.next_u64();
            std::vector<Var> losses;
            for (int b = 0; b < cfg.batch; ++b) {
                const int idx = order[(s * cfg.batch + b) % order.size()];
                Var img_z = constant(img_cached[scene_of[idx]]);
                Var txt_z = constant(txt_cached[idx]);
                auto res = ch.pass({tx_.image_transmit_encode(img_z),
                                    tx_.text_transmit_encode(txt_z)},
                                   snr, h_seed, rng.next_u64());
                Var img_hat = tx_.image_receive_decode(res.detected_rows[0]);
                Var txt_hat = tx_.text_receive_decode(res.detected_rows[1]);
                // Joint recovery loss: image term plus text term.
                losses.push_back(add(loss_mse(img_hat, img_z),
                                     loss_mse(txt_hat, txt_z, txt_masks[idx])));
            }
            run_step(opt, mean_of(losses), "vqa_jsc", step++, log_);
        }
    }
}

void VqaTraining::whole_phase(const PhaseConfig& cfg, uint64_t seed,
                              bool freeze_image_encoder) {
    Rng rng(seed);
    Rng drop_rng(rng.next_u64());
    std::vector<Var> params;
    for (const char* prefix : {"img_sem.", "txt_sem.", "img_jsc.", "txt_jsc.", "fusion."}) {
        if (freeze_image_encoder && std::string(prefix) == "img_sem.") continue;
        auto part = tx_.params().vars_with_prefix(prefix);
        params.insert(params.end(), part.begin(), part.end());
    }
    Adam opt(std::move(params), adam_from(cfg));
    MultiUserChannel ch(ch_);

    const int steps_per_epoch =
        std::max<int>(1, static_cast<int>(ds_.train_indices.size()) / cfg.batch);
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = shuffled(ds_.train_indices, rng);
        for (int s = 0; s < steps_per_epoch; ++s) {
            const double snr = rng.uniform(cfg.snr_low_db, cfg.snr_high_db);
            const uint64_t h_seed = rng.next_u64();
            std::vector<Var> losses;
            for (int b = 0; b < cfg.batch; ++b) {
                const auto& q = ds_.questions[order[(s * cfg.batch + b) % order.size()]];
                Var img_z = tx_.image_semantic_encode(ds_.scenes[q.scene].image);
                if (freeze_image_encoder) img_z = detach(img_z);
                auto txt = tx_.text_semantic_encode(q.tokens);
                auto res = ch.pass({tx_.image_transmit_encode(img_z),
                                    tx_.text_transmit_encode(txt.z)},
                                   snr, h_seed, rng.next_u64());
                Var img_tokens = tx_.dimension_increase(
                    tx_.image_receive_decode(res.detected_rows[0]), true, &drop_rng);
                Var txt_tokens = tx_.text_receive_decode(res.detected_rows[1]);
                auto trace = tx_.fuse(txt_tokens, txt.mask, img_tokens);
                Var logits =
                    tx_.answer_logits(trace.text_cls, trace.image_cls, true, &drop_rng);
                losses.push_back(loss_ce(logits, {q.answer}));
            }
            run_step(opt, mean_of(losses), "vqa_whole", step++, log_);
        }
    }
}

}  // namespace semcom::train
