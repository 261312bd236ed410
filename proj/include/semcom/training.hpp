#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "semcom/data.hpp"
#include "semcom/transceivers.hpp"

namespace semcom::train {

// Optimizer and schedule settings for one training phase.
struct PhaseConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.0;
    int batch = 16;
    int epochs = 10;
    double margin = 0.5;       // pairwise embedding loss only
    int classes_per_batch = 0;  // balanced sampler: 0 picks batch/4, floor 2
    // Channel-in-the-loop phases draw a per-batch SNR uniformly from this
    // range (dB).
    double snr_low_db = 0.0;
    double snr_high_db = 18.0;
};

struct LossRecord {
    std::string phase;
    int step = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
};

struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Loss functions. These are thin named wrappers; the gradient path lives in
// the autograd ops they call.
nn::Var loss_ir(const nn::Var& z_batch, const std::vector<int>& labels, double margin);
nn::Var loss_mse(const nn::Var& z_hat, const nn::Var& z, const std::vector<bool>& row_mask = {});
nn::Var loss_ce(const nn::Var& logits, const std::vector<int>& targets,
                const std::vector<bool>& mask = {});

// Aborts the step loop on non-finite losses or exploding gradients.
void divergence_guard(double loss, double grad_norm);

// ---- image retrieval: two phases ----
class IrTraining {
public:
    IrTraining(model::RetrievalTransceiver& tx, const data::RetrievalDataset& ds,
               const model::ChannelParams& ch)
        : tx_(tx), ds_(ds), ch_(ch) {}

    // Phase 1: metric learning on the semantic encoder, channel-free.
    void semantic_phase(const PhaseConfig& cfg, uint64_t seed);
    // Phase 2: JSC codec on recovery MSE with the channel in the loop; the
    // semantic encoder stays frozen.
    void jsc_phase(const PhaseConfig& cfg, uint64_t seed);

    const std::vector<LossRecord>& log() const { return log_; }

private:
    model::RetrievalTransceiver& tx_;
    const data::RetrievalDataset& ds_;
    model::ChannelParams ch_;
    std::vector<LossRecord> log_;
};

// ---- machine translation: three phases ----
class MtTraining {
public:
    MtTraining(model::TranslationTransceiver& tx, const data::ParallelCorpus& ds,
               const model::ChannelParams& ch)
        : tx_(tx), ds_(ds), ch_(ch) {}

    void semantic_phase(const PhaseConfig& cfg, uint64_t seed);  // CE, channel-free
    void jsc_phase(const PhaseConfig& cfg, uint64_t seed);       // MSE through channel
    void whole_phase(const PhaseConfig& cfg, uint64_t seed);     // CE through channel

    const std::vector<LossRecord>& log() const { return log_; }

private:
    model::TranslationTransceiver& tx_;
    const data::ParallelCorpus& ds_;
    model::ChannelParams ch_;
    std::vector<LossRecord> log_;
};

// ---- VQA: three phases over a two-user channel ----
class VqaTraining {
public:
    VqaTraining(model::VqaTransceiver& tx, const data::VqaDataset& ds,
                const model::ChannelParams& ch);

    void semantic_phase(const PhaseConfig& cfg, uint64_t seed);
    void jsc_phase(const PhaseConfig& cfg, uint64_t seed);
    // freeze_image_encoder keeps the image semantic encoder untouched during
    // the end-to-end fine-tune.
    void whole_phase(const PhaseConfig& cfg, uint64_t seed, bool freeze_image_encoder);

    const std::vector<LossRecord>& log() const { return log_; }

private:
    model::VqaTransceiver& tx_;
    const data::VqaDataset& ds_;
    model::ChannelParams ch_;
    std::vector<LossRecord> log_;
};

}  // namespace semcom::train
