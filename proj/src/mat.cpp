#include "semcom/mat.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace semcom {

Mat Mat::full(int r, int c, double v) {
    Mat m(r, c);
    for (auto& x : m.data) x = v;
    return m;
}

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Mat Mat::row_vector(std::initializer_list<double> v) {
    Mat m(1, static_cast<int>(v.size()));
    int j = 0;
    for (double x : v) m.at(0, j++) = x;
    return m;
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> v) {
    Mat m(static_cast<int>(v.size()), static_cast<int>(v.begin()->size()));
    int i = 0;
    for (const auto& row : v) {
        if (static_cast<int>(row.size()) != m.cols)
            throw std::invalid_argument("from_rows: ragged rows");
        int j = 0;
        for (double x : row) m.at(i, j++) = x;
        ++i;
    }
    return m;
}

bool Mat::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

Mat& Mat::operator+=(const Mat& o) {
    if (!same_shape(o)) throw std::invalid_argument("Mat += shape mismatch");
    for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
}

Mat& Mat::operator-=(const Mat& o) {
    if (!same_shape(o)) throw std::invalid_argument("Mat -= shape mismatch");
    for (size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
    return *this;
}

Mat& Mat::operator*=(double s) {
    for (double& x : data) x *= s;
    return *this;
}

Mat operator+(Mat a, const Mat& b) { return a += b; }
Mat operator-(Mat a, const Mat& b) { return a -= b; }
Mat operator*(Mat a, double s) { return a *= s; }

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dims differ");
    Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row_ptr(i);
        double* cr = c.row_ptr(i);
        for (int k = 0; k < a.cols; ++k) {
            const double av = ar[k];
            const double* br = b.row_ptr(k);
            for (int j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
    return c;
}

Mat matmul_aT_b(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_aT_b: row counts differ");
    Mat c(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* ar = a.row_ptr(k);
        const double* br = b.row_ptr(k);
        for (int i = 0; i < a.cols; ++i) {
            const double av = ar[i];
            double* cr = c.row_ptr(i);
            for (int j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
    return c;
}

Mat matmul_a_bT(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_a_bT: col counts differ");
    Mat c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row_ptr(i);
        double* cr = c.row_ptr(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.row_ptr(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += ar[k] * br[k];
            cr[j] = s;
        }
    }
    return c;
}

Mat transpose(const Mat& a) {
    Mat t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

double frobenius_norm(const Mat& a) {
    double s = 0.0;
    for (double x : a.data) s += x * x;
    return std::sqrt(s);
}

double max_abs_diff(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

CMat CMat::identity(int n) {
    CMat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = cplx(1.0, 0.0);
    return m;
}

CMat cmatmul(const CMat& a, const CMat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("cmatmul: inner dims differ");
    CMat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const cplx av = a.at(i, k);
            if (av == cplx(0.0, 0.0)) continue;
            for (int j = 0; j < b.cols; ++j) c.at(i, j) += av * b.at(k, j);
        }
    }
    return c;
}

CMat hermitian(const CMat& a) {
    CMat h(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) h.at(j, i) = std::conj(a.at(i, j));
    return h;
}

CMat operator+(CMat a, const CMat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("CMat +: shape mismatch");
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
    return a;
}

CMat operator-(CMat a, const CMat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("CMat -: shape mismatch");
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] -= b.data[i];
    return a;
}

CMat solve(CMat a, CMat b) {
    if (a.rows != a.cols) throw std::invalid_argument("solve: A must be square");
    if (a.rows != b.rows) throw std::invalid_argument("solve: A and B row counts differ");
    const int n = a.rows;
    const int m = b.cols;

    // Scale the singularity threshold by the matrix magnitude so that
    // uniformly tiny but well-conditioned systems still solve.
    double amax = 0.0;
    for (const cplx& x : a.data) amax = std::max(amax, std::abs(x));
    const double tiny = (amax > 0.0 ? amax : 1.0) * 1e-13;

    for (int col = 0; col < n; ++col) {
        int piv = col;
        double best = std::abs(a.at(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double v = std::abs(a.at(r, col));
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best < tiny)
            throw NumericalFailure("solve: matrix is singular to working precision");
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(a.at(col, j), a.at(piv, j));
            for (int j = 0; j < m; ++j) std::swap(b.at(col, j), b.at(piv, j));
        }
        const cplx inv_p = cplx(1.0, 0.0) / a.at(col, col);
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const cplx f = a.at(r, col) * inv_p;
            if (f == cplx(0.0, 0.0)) continue;
            for (int j = col; j < n; ++j) a.at(r, j) -= f * a.at(col, j);
            for (int j = 0; j < m; ++j) b.at(r, j) -= f * b.at(col, j);
        }
    }
    for (int r = 0; r < n; ++r) {
        const cplx inv_p = cplx(1.0, 0.0) / a.at(r, r);
        for (int j = 0; j < m; ++j) b.at(r, j) *= inv_p;
    }
    return b;
}

double frobenius_norm(const CMat& a) {
    double s = 0.0;
    for (const cplx& x : a.data) s += std::norm(x);
    return std::sqrt(s);
}

// xoshiro256++ seeded through SplitMix64. Chosen over std::mt19937_64 plus
// std distributions because distribution output is implementation-defined;
// this stream is reproducible byte-for-byte everywhere.
namespace {
inline uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64(sm);
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
    // Modulo bias is negligible for the small ranges used here.
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

cplx Rng::cnormal(double variance) {
    const double s = std::sqrt(variance / 2.0);
    return cplx(s * normal(), s * normal());
}

void Rng::fill_normal(Mat& m, double mean, double stddev) {
    for (double& x : m.data) x = mean + stddev * normal();
}

void Rng::fill_uniform(Mat& m, double lo, double hi) {
    for (double& x : m.data) x = uniform(lo, hi);
}

}  // namespace semcom
