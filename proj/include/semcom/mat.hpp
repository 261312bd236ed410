#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace semcom {

using cplx = std::complex<double>;

// Dense row-major matrix of doubles. All model math runs in 64-bit.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    static Mat zeros(int r, int c) { return Mat(r, c); }
    static Mat full(int r, int c, double v);
    static Mat identity(int n);
    static Mat row_vector(std::initializer_list<double> v);
    static Mat from_rows(std::initializer_list<std::initializer_list<double>> v);

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row_ptr(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return data.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;

    Mat& operator+=(const Mat& o);
    Mat& operator-=(const Mat& o);
    Mat& operator*=(double s);
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(Mat a, const Mat& b);
Mat operator*(Mat a, double s);

Mat matmul(const Mat& a, const Mat& b);
// aT_b computes a^T * b, a_bT computes a * b^T; both avoid materializing the transpose.
Mat matmul_aT_b(const Mat& a, const Mat& b);
Mat matmul_a_bT(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);

double frobenius_norm(const Mat& a);
double max_abs_diff(const Mat& a, const Mat& b);

// Dense row-major complex matrix for the channel path.
struct CMat {
    int rows = 0;
    int cols = 0;
    std::vector<cplx> data;

    CMat() = default;
    CMat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, cplx(0.0, 0.0)) {}

    static CMat zeros(int r, int c) { return CMat(r, c); }
    static CMat identity(int n);

    cplx& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    cplx at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return data.size(); }
    bool same_shape(const CMat& o) const { return rows == o.rows && cols == o.cols; }
};

CMat cmatmul(const CMat& a, const CMat& b);
CMat hermitian(const CMat& a);
CMat operator+(CMat a, const CMat& b);
CMat operator-(CMat a, const CMat& b);

// Solves A*X = B by Gaussian elimination with partial pivoting.
// Throws NumericalFailure when a pivot falls below the singularity threshold.
CMat solve(CMat a, CMat b);

double frobenius_norm(const CMat& a);

struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic random stream: every stochastic operation in the library
// draws from an explicitly seeded Rng, never from global state. Normal
// variates use Box-Muller so the stream is identical on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform();                    // [0, 1)
    double uniform(double lo, double hi);
    int uniform_int(int lo, int hi);     // inclusive bounds
    double normal();                     // N(0, 1)
    cplx cnormal(double variance);       // circular CN(0, variance)

    void fill_normal(Mat& m, double mean, double stddev);
    void fill_uniform(Mat& m, double lo, double hi);

private:
    uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace semcom
