#include "semcom/channel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace semcom::chan {

const char* to_string(FadingModel m) {
    switch (m) {
        case FadingModel::AWGN: return "awgn";
        case FadingModel::Rayleigh: return "rayleigh";
        case FadingModel::Rician: return "rician";
    }
    return "?";
}

FadingModel fading_model_from_string(const std::string& s) {
    if (s == "awgn") return FadingModel::AWGN;
    if (s == "rayleigh") return FadingModel::Rayleigh;
    if (s == "rician") return FadingModel::Rician;
    throw std::invalid_argument("unknown channel model: " + s);
}

SymbolBlock SymbolBlock::from_rows(const std::vector<std::vector<cplx>>& rows) {
    if (rows.empty()) throw std::invalid_argument("SymbolBlock: no rows");
    int len = 0;
    for (const auto& r : rows) len = std::max(len, static_cast<int>(r.size()));
    if (len < 1) throw std::invalid_argument("SymbolBlock: empty rows");
    SymbolBlock b;
    b.symbols = CMat(static_cast<int>(rows.size()), len);
    b.valid_cols.resize(rows.size());
    for (size_t k = 0; k < rows.size(); ++k) {
        b.valid_cols[k] = static_cast<int>(rows[k].size());
        for (size_t j = 0; j < rows[k].size(); ++j) b.symbols.at(static_cast<int>(k), static_cast<int>(j)) = rows[k][j];
    }
    return b;
}

ChannelRealization sample_channel(FadingModel model, int m_antennas, int users,
                                  double rician_r, uint64_t seed) {
    if (users < 1) throw std::invalid_argument("sample_channel: users must be >= 1");
    if (m_antennas < users)
        throw std::invalid_argument("sample_channel: need M >= K for L-MMSE detection");
    if (rician_r < 0.0) throw std::invalid_argument("sample_channel: negative Rician factor");

    ChannelRealization out;
    out.model = model;
    out.rician_r = rician_r;
    switch (model) {
        case FadingModel::AWGN: {
            if (m_antennas != users)
                throw std::invalid_argument("sample_channel: AWGN requires M == K");
            out.h = CMat::identity(users);
            break;
        }
        case FadingModel::Rayleigh: {
            Rng rng(seed);
            out.h = CMat(m_antennas, users);
            for (auto& v : out.h.data) v = rng.cnormal(1.0);
            break;
        }
        case FadingModel::Rician: {
            Rng rng(seed);
            const double mu = std::sqrt(rician_r / (rician_r + 1.0));
            const double var = 1.0 / (rician_r + 1.0);
            out.h = CMat(m_antennas, users);
            for (auto& v : out.h.data) v = cplx(mu, 0.0) + rng.cnormal(var);
            break;
        }
    }
    return out;
}

CsiEstimate estimate_csi(const ChannelRealization& h, double sigma_e_sq, uint64_t seed) {
    if (sigma_e_sq < 0.0) throw std::invalid_argument("estimate_csi: negative error variance");
    CsiEstimate est;
    est.sigma_e_sq = sigma_e_sq;
    est.h_hat = h.h;
    if (sigma_e_sq > 0.0) {
        Rng rng(seed);
        for (auto& v : est.h_hat.data) v += rng.cnormal(sigma_e_sq);
    }
    return est;
}

namespace {
// sum_k ||h_k x_k||^2 = sum_k ||h_k||^2 ||x_k||^2 for rank-one per-user terms.
double signal_energy(const ChannelRealization& h, const SymbolBlock& x) {
    double total = 0.0;
    for (int k = 0; k < x.users(); ++k) {
        double hk = 0.0;
        for (int m = 0; m < h.rx_antennas(); ++m) hk += std::norm(h.h.at(m, k));
        double xk = 0.0;
        for (int j = 0; j < x.block_len(); ++j) xk += std::norm(x.symbols.at(k, j));
        total += hk * xk;
    }
    return total;
}
}  // namespace

NoiseSpec calibrate_noise(double target_snr_db, const ChannelRealization& h,
                          const SymbolBlock& x) {
    if (h.users() != x.users())
        throw std::invalid_argument("calibrate_noise: H/X user counts differ");
    const double energy = signal_energy(h, x);
    if (energy <= 0.0) throw std::invalid_argument("calibrate_noise: all-zero transmit block");
    const double snr_lin = db_to_linear(target_snr_db);
    NoiseSpec spec;
    spec.target_snr_db = target_snr_db;
    spec.sigma_n_sq = energy / (static_cast<double>(h.rx_antennas()) * x.block_len() * snr_lin);
    return spec;
}

ReceivedBlock transmit(const SymbolBlock& x, const ChannelRealization& h,
                       const NoiseSpec& noise, uint64_t seed) {
    if (h.users() != x.users())
        throw std::invalid_argument("transmit: H columns must match X rows");
    ReceivedBlock out;
    out.y = cmatmul(h.h, x.symbols);
    if (noise.sigma_n_sq > 0.0) {
        Rng rng(seed);
        for (auto& v : out.y.data) v += rng.cnormal(noise.sigma_n_sq);
    }
    return out;
}

CMat lmmse_matrix(const CsiEstimate& csi, double sigma_n_sq) {
    if (sigma_n_sq < 0.0) throw std::invalid_argument("lmmse_matrix: negative noise variance");
    const CMat& hh = csi.h_hat;
    CMat gram = cmatmul(hh, hermitian(hh));  // M x M
    for (int i = 0; i < gram.rows; ++i) gram.at(i, i) += sigma_n_sq;
    // A = H^H G^{-1}  computed as  (G^{-1} H)^H  since G is Hermitian.
    CMat g_inv_h = solve(gram, hh);
    return hermitian(g_inv_h);
}

SymbolBlock lmmse_detect(const ReceivedBlock& y, const CsiEstimate& csi,
                         double sigma_n_sq) {
    const CMat a = lmmse_matrix(csi, sigma_n_sq);
    SymbolBlock out;
    out.symbols = cmatmul(a, y.y);
    out.valid_cols.assign(out.symbols.rows, out.symbols.cols);
    return out;
}

double measure_snr_db(const ChannelRealization& h, const SymbolBlock& x, const CMat& noise) {
    const double energy = signal_energy(h, x);
    double noise_energy = 0.0;
    for (const auto& v : noise.data) noise_energy += std::norm(v);
    const double sigma_hat = noise_energy / static_cast<double>(noise.size());
    return linear_to_db(energy /
                        (static_cast<double>(h.rx_antennas()) * x.block_len() * sigma_hat));
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

std::vector<double> power_normalize(const std::vector<double>& v) {
    double p = 0.0;
    for (double x : v) p += x * x;
    if (p <= 0.0) throw std::invalid_argument("power_normalize: all-zero input");
    const double scale = std::sqrt(static_cast<double>(v.size()) / p);
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] * scale;
    return out;
}

std::vector<cplx> power_normalize(const std::vector<cplx>& v) {
    double p = 0.0;
    for (const cplx& x : v) p += std::norm(x);
    if (p <= 0.0) throw std::invalid_argument("power_normalize: all-zero input");
    const double scale = std::sqrt(static_cast<double>(v.size()) / p);
    std::vector<cplx> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] * scale;
    return out;
}

std::vector<cplx> real_to_complex(const std::vector<double>& v) {
    if (v.size() % 2 != 0) throw std::invalid_argument("real_to_complex: odd-length input");
    std::vector<cplx> out(v.size() / 2);
    for (size_t i = 0; i < out.size(); ++i) out[i] = cplx(v[2 * i], v[2 * i + 1]);
    return out;
}

std::vector<double> complex_to_real(const std::vector<cplx>& v) {
    std::vector<double> out(2 * v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        out[2 * i] = v[i].real();
        out[2 * i + 1] = v[i].imag();
    }
    return out;
}

}  // namespace semcom::chan
