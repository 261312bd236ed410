#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "semcom/channel.hpp"

using namespace semcom;
using namespace semcom::chan;

namespace {

SymbolBlock random_unit_power_block(int users, int len, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<cplx>> rows(users);
    for (auto& r : rows) {
        std::vector<cplx> v(len);
        for (auto& x : v) x = rng.cnormal(1.0);
        r = power_normalize(v);
    }
    return SymbolBlock::from_rows(rows);
}

}  // namespace

TEST_CASE("awgn channel is the identity matrix") {
    auto h = sample_channel(FadingModel::AWGN, 2, 2, 0.0, 7);
    CHECK(h.h.rows == 2);
    CHECK(h.h.cols == 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(h.h.at(i, j) == (i == j ? cplx(1, 0) : cplx(0, 0)));
    CHECK_THROWS_AS(sample_channel(FadingModel::AWGN, 4, 2, 0.0, 7), std::invalid_argument);
}

TEST_CASE("rician r=2 matches the CN(sqrt(2/3), 1/3) statistics") {
    const int draws = 100000;
    Rng seed_rng(11);
    cplx mean(0, 0);
    double second = 0.0;
    int n = 0;
    for (int i = 0; i < draws / 8; ++i) {
        auto h = sample_channel(FadingModel::Rician, 4, 2, 2.0, seed_rng.next_u64());
        for (const auto& v : h.h.data) {
            mean += v;
            second += std::norm(v);
            ++n;
        }
    }
    mean /= static_cast<double>(n);
    const double mu = std::sqrt(2.0 / 3.0);
    CHECK(std::abs(mean - cplx(mu, 0)) < 0.02 * mu);
    // E|h|^2 = mu^2 + 1/3 = 1.
    CHECK(second / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rayleigh entries have unit mean-square and Rayleigh-magnitude mean") {
    const int draws = 100000;
    Rng seed_rng(12);
    double second = 0.0, mag = 0.0;
    int n = 0;
    while (n < draws) {
        auto h = sample_channel(FadingModel::Rayleigh, 4, 2, 0.0, seed_rng.next_u64());
        for (const auto& v : h.h.data) {
            second += std::norm(v);
            mag += std::abs(v);
            ++n;
        }
    }
    CHECK(second / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(mag / n == doctest::Approx(std::sqrt(M_PI) / 2.0).epsilon(0.02));
}

TEST_CASE("csi error variance is realized empirically") {
    auto h = sample_channel(FadingModel::Rayleigh, 10, 10, 0.0, 3);
    double err = 0.0;
    int n = 0;
    Rng seed_rng(4);
    for (int rep = 0; rep < 1000; ++rep) {
        auto est = estimate_csi(h, 0.025, seed_rng.next_u64());
        for (size_t i = 0; i < est.h_hat.data.size(); ++i) {
            err += std::norm(est.h_hat.data[i] - h.h.data[i]);
            ++n;
        }
    }
    CHECK(err / n == doctest::Approx(0.025).epsilon(0.05));

    auto exact = estimate_csi(h, 0.0, 99);
    CHECK(frobenius_norm(exact.h_hat - h.h) == 0.0);
    CHECK_THROWS_AS(estimate_csi(h, -1e-3, 1), std::invalid_argument);
}

TEST_CASE("noise calibration closed forms") {
    auto h = sample_channel(FadingModel::AWGN, 1, 1, 0.0, 1);
    auto x = random_unit_power_block(1, 64, 5);
    auto n0 = calibrate_noise(0.0, h, x);
    CHECK(n0.sigma_n_sq == doctest::Approx(1.0).epsilon(1e-9));
    auto n18 = calibrate_noise(18.0, h, x);
    CHECK(n18.sigma_n_sq == doctest::Approx(std::pow(10.0, -1.8)).epsilon(1e-9));
}

TEST_CASE("generated noise hits the target snr within 0.1 dB") {
    auto h = sample_channel(FadingModel::Rayleigh, 4, 2, 0.0, 21);
    auto x = random_unit_power_block(2, 50000, 22);  // M*L = 2e5 noise samples
    auto spec = calibrate_noise(6.0, h, x);
    auto y = transmit(x, h, spec, 23);
    CMat noise = y.y - cmatmul(h.h, x.symbols);
    CHECK(std::abs(measure_snr_db(h, x, noise) - 6.0) < 0.1);
}

TEST_CASE("transmit is deterministic per seed and noiseless identity is exact") {
    auto h = sample_channel(FadingModel::AWGN, 2, 2, 0.0, 1);
    auto x = random_unit_power_block(2, 16, 9);
    NoiseSpec off{0.0, 0.0};
    auto y = transmit(x, h, off, 0);
    CHECK(frobenius_norm(y.y - x.symbols) == 0.0);

    auto spec = calibrate_noise(3.0, h, x);
    auto y1 = transmit(x, h, spec, 77);
    auto y2 = transmit(x, h, spec, 77);
    CHECK(frobenius_norm(y1.y - y2.y) == 0.0);
    auto y3 = transmit(x, h, spec, 78);
    CHECK(frobenius_norm(y1.y - y3.y) > 0.0);
}

TEST_CASE("lmmse identity and scalar closed forms") {
    // H_hat = I, sigma = 0 -> X_hat = Y.
    auto h = sample_channel(FadingModel::AWGN, 2, 2, 0.0, 1);
    auto csi = estimate_csi(h, 0.0, 0);
    auto x = random_unit_power_block(2, 8, 13);
    auto y = transmit(x, h, NoiseSpec{0.0, 0.0}, 0);
    auto det = lmmse_detect(y, csi, 0.0);
    CHECK(frobenius_norm(det.symbols - x.symbols) < 1e-12);

    // Scalar channel h=1, sigma^2=1 -> X_hat = Y / 2.
    ChannelRealization scalar;
    scalar.h = CMat::identity(1);
    auto scsi = estimate_csi(scalar, 0.0, 0);
    ReceivedBlock ry;
    ry.y = CMat(1, 3);
    ry.y.at(0, 0) = cplx(1, 1);
    ry.y.at(0, 1) = cplx(-2, 0.5);
    ry.y.at(0, 2) = cplx(0, -3);
    auto sdet = lmmse_detect(ry, scsi, 1.0);
    for (int j = 0; j < 3; ++j)
        CHECK(std::abs(sdet.symbols.at(0, j) - ry.y.at(0, j) / 2.0) < 1e-12);
}

TEST_CASE("lmmse approaches least squares at vanishing noise") {
    // Oracle: direct least-squares solve X_ls = (H^H H)^{-1} H^H Y.
    Rng seed_rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        auto h = sample_channel(FadingModel::Rayleigh, 4, 2, 0.0, seed_rng.next_u64());
        auto csi = estimate_csi(h, 0.0, 0);
        auto x = random_unit_power_block(2, 32, seed_rng.next_u64());
        auto spec = NoiseSpec{1e-8, 0.0};
        auto y = transmit(x, h, spec, seed_rng.next_u64());

        auto det = lmmse_detect(y, csi, 1e-8);
        CMat hh = cmatmul(hermitian(h.h), h.h);
        CMat x_ls = solve(hh, cmatmul(hermitian(h.h), y.y));
        CHECK(frobenius_norm(det.symbols - x_ls) / frobenius_norm(x_ls) < 1e-3);
        CHECK(frobenius_norm(det.symbols - x.symbols) / frobenius_norm(x.symbols) < 1e-3);
    }
}

TEST_CASE("rank-deficient noiseless detection raises a numerical failure") {
    CsiEstimate csi;
    csi.h_hat = CMat(2, 2);  // rank 1
    csi.h_hat.at(0, 0) = cplx(1, 0);
    csi.h_hat.at(0, 1) = cplx(1, 0);
    csi.h_hat.at(1, 0) = cplx(1, 0);
    csi.h_hat.at(1, 1) = cplx(1, 0);
    ReceivedBlock y;
    y.y = CMat(2, 4);
    CHECK_THROWS_AS(lmmse_detect(y, csi, 0.0), NumericalFailure);
}

TEST_CASE("mmse shrinkage on a scalar channel") {
    ChannelRealization scalar;
    scalar.h = CMat(1, 1);
    scalar.h.at(0, 0) = cplx(0.8, -0.3);
    auto csi = estimate_csi(scalar, 0.0, 0);
    Rng rng(55);
    ReceivedBlock y;
    y.y = CMat(1, 64);
    for (auto& v : y.y.data) v = rng.cnormal(1.0);
    auto det = lmmse_detect(y, csi, 0.5);
    const double habs = std::abs(scalar.h.at(0, 0));
    for (int j = 0; j < 64; ++j)
        CHECK(std::abs(det.symbols.at(0, j)) <= std::abs(y.y.at(0, j)) / habs + 1e-12);
}

TEST_CASE("power normalization and real/complex mapping") {
    std::vector<double> ones{1, 1, 1, 1};
    CHECK(power_normalize(ones) == ones);

    std::vector<cplx> two{cplx(2, 0), cplx(0, 0)};
    auto n2 = power_normalize(two);
    CHECK(std::abs(n2[0] - cplx(2.0 / std::sqrt(2.0), 0)) < 1e-12);
    CHECK(std::abs(n2[1]) == 0.0);

    Rng rng(3);
    std::vector<double> v(34);
    for (auto& x : v) x = rng.normal();
    auto nv = power_normalize(v);
    double p = 0.0;
    for (double x : nv) p += x * x;
    CHECK(p / nv.size() == doctest::Approx(1.0).epsilon(1e-6));

    CHECK_THROWS_AS(power_normalize(std::vector<double>{0, 0}), std::invalid_argument);

    auto c = real_to_complex({1, 2, 3, 4});
    CHECK(c[0] == cplx(1, 2));
    CHECK(c[1] == cplx(3, 4));
    CHECK(real_to_complex({0, 0})[0] == cplx(0, 0));
    CHECK_THROWS_AS(real_to_complex({1, 2, 3}), std::invalid_argument);

    auto rt = complex_to_real(real_to_complex(v));
    CHECK(rt == v);
}

TEST_CASE("sampling is a pure function of arguments and seed") {
    auto h1 = sample_channel(FadingModel::Rician, 4, 3, 2.0, 42);
    auto h2 = sample_channel(FadingModel::Rician, 4, 3, 2.0, 42);
    CHECK(frobenius_norm(h1.h - h2.h) == 0.0);
    auto h3 = sample_channel(FadingModel::Rician, 4, 3, 2.0, 43);
    CHECK(frobenius_norm(h1.h - h3.h) > 0.0);
    CHECK_THROWS_AS(sample_channel(FadingModel::Rayleigh, 2, 4, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_channel(FadingModel::Rician, 4, 2, -1.0, 1), std::invalid_argument);
}
