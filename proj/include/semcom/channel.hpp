#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semcom/mat.hpp"

namespace semcom::chan {

enum class FadingModel { AWGN, Rayleigh, Rician };

const char* to_string(FadingModel m);
FadingModel fading_model_from_string(const std::string& s);

// One row per user's transmitted symbol stream. valid_cols[k] marks the
// payload length of row k; columns beyond it are zero padding inserted to
// keep all users block-synchronous.
struct SymbolBlock {
    CMat symbols;                 // K x L
    std::vector<int> valid_cols;  // per-row payload length, <= L

    int users() const { return symbols.rows; }
    int block_len() const { return symbols.cols; }
    int valid(int k) const { return valid_cols.empty() ? symbols.cols : valid_cols[k]; }

    static SymbolBlock from_rows(const std::vector<std::vector<cplx>>& rows);
};

// Block-fading channel: one H per transmitted block.
struct ChannelRealization {
    CMat h;  // M x K
    FadingModel model = FadingModel::AWGN;
    double rician_r = 0.0;

    int rx_antennas() const { return h.rows; }
    int users() const { return h.cols; }
};

struct CsiEstimate {
    CMat h_hat;
    double sigma_e_sq = 0.0;
};

struct NoiseSpec {
    double sigma_n_sq = 0.0;
    double target_snr_db = 0.0;
};

struct ReceivedBlock {
    CMat y;  // M x L
};

// Draws H for the given fading model. AWGN requires M == K and yields the
// identity matrix; Rayleigh entries are CN(0,1); Rician entries are
// CN(mu, 1/(r+1)) with mu = sqrt(r/(r+1)).
ChannelRealization sample_channel(FadingModel model, int m_antennas, int users,
                                  double rician_r, uint64_t seed);

// H_hat = H + dH with dH entries i.i.d. CN(0, sigma_e_sq).
CsiEstimate estimate_csi(const ChannelRealization& h, double sigma_e_sq, uint64_t seed);

// Chooses sigma_n so that sum_k ||h_k x_k||^2 / (M * L * sigma_n^2) hits the
// target linear SNR. The per-complex-dimension normalization (divide by M*L)
// is this library's convention and is echoed into every run config.
NoiseSpec calibrate_noise(double target_snr_db, const ChannelRealization& h,
                          const SymbolBlock& x);

// Y = H*X + N with N i.i.d. CN(0, sigma_n_sq). Deterministic per seed.
ReceivedBlock transmit(const SymbolBlock& x, const ChannelRealization& h,
                       const NoiseSpec& noise, uint64_t seed);

// X_hat = H_hat^H (H_hat H_hat^H + sigma_n^2 I)^{-1} Y. Throws
// NumericalFailure when sigma_n_sq = 0 and H_hat is rank deficient.
SymbolBlock lmmse_detect(const ReceivedBlock& y, const CsiEstimate& csi,
                         double sigma_n_sq);

// The L-MMSE detection matrix A = H_hat^H (H_hat H_hat^H + sigma_n^2 I)^{-1}.
CMat lmmse_matrix(const CsiEstimate& csi, double sigma_n_sq);

// Measured SNR of a realized (H, X, N) triple under the library convention,
// in dB: sum_k ||h_k x_k||^2 / (M * L * sigma_hat^2) with sigma_hat^2 the
// empirical noise variance.
double measure_snr_db(const ChannelRealization& h, const SymbolBlock& x, const CMat& noise);

double db_to_linear(double db);
double linear_to_db(double lin);

// Scales a vector so the average per-element power is one. Throws on
// all-zero input.
std::vector<double> power_normalize(const std::vector<double>& v);
std::vector<cplx> power_normalize(const std::vector<cplx>& v);

// Pairs (v[2i], v[2i+1]) -> v[2i] + j*v[2i+1]. Inverse of complex_to_real.
std::vector<cplx> real_to_complex(const std::vector<double>& v);
std::vector<double> complex_to_real(const std::vector<cplx>& v);

}  // namespace semcom::chan
