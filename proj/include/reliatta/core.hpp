#pragma once
// Dense vector/matrix primitives, probability transforms, and the
// parameter-block abstraction every trainable piece of the model uses.
// All accumulation is done in double; inputs are validated to stay finite.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace reliatta {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DegenerateEmbeddingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised by loss functions when called with an empty reliable set. The
// adaptation step checks for emptiness first and skips the update, so this
// surfaces only on misuse.
struct EmptyReliableSetError : std::logic_error {
    using std::logic_error::logic_error;
};

// Binary parse failure carrying the offset of the offending bytes.
struct ParseError : std::runtime_error {
    std::size_t byte_offset;
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg), byte_offset(offset) {}
};

// Embedding directions with norm at or below this are meaningless; callers
// route such samples to the unreliable path instead of dividing by near-zero.
inline constexpr double kNormEpsilon = 1e-12;

// ---------------------------------------------------------------------------
// Matrix (row-major, dense, double)
// ---------------------------------------------------------------------------

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::span<const double> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
    std::span<double> row(int r) {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }

    std::size_t size() const { return data.size(); }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

// ---------------------------------------------------------------------------
// ParameterBlock: named value + gradient pair with matching shapes.
// Gradients are zeroed by the optimizer after every application.
// ---------------------------------------------------------------------------

struct ParameterBlock {
    std::string name;
    int rows = 0;
    int cols = 1;
    Vec value;
    Vec grad;
    bool trainable = true;

    ParameterBlock() = default;
    ParameterBlock(std::string n, int r, int c, bool train = true)
        : name(std::move(n)),
          rows(r),
          cols(c),
          value(static_cast<std::size_t>(r) * c, 0.0),
          grad(static_cast<std::size_t>(r) * c, 0.0),
          trainable(train) {}

    std::size_t size() const { return value.size(); }
    double& v(int r, int c) { return value[static_cast<std::size_t>(r) * cols + c]; }
    double v(int r, int c) const { return value[static_cast<std::size_t>(r) * cols + c]; }
    double& g(int r, int c) { return grad[static_cast<std::size_t>(r) * cols + c]; }

    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

    static ParameterBlock from_matrix(std::string n, const Mat& m, bool train = true) {
        ParameterBlock b(std::move(n), m.rows, m.cols, train);
        b.value = m.data;
        return b;
    }
    Mat as_matrix() const {
        Mat m(rows, cols);
        m.data = value;
        return m;
    }
};

// ---------------------------------------------------------------------------
// Finite-value guards
// ---------------------------------------------------------------------------

bool all_finite(std::span<const double> v);
void ensure_finite(std::span<const double> v, const char* what);
void ensure_finite(double x, const char* what);

// ---------------------------------------------------------------------------
// Probability transforms and vector helpers
// ---------------------------------------------------------------------------

// Max-subtracted softmax. Output entries lie in (0,1) and sum to 1.
Vec softmax(std::span<const double> v);

double l2_norm(std::span<const double> v);

// Scales v to unit length. Throws DegenerateEmbeddingError when the norm is
// at or below kNormEpsilon.
Vec l2_normalize(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);

// Index of the largest entry; ties resolve to the lowest index.
int argmax(std::span<const double> v);

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle.
//
// `loss` re-evaluates the objective from the blocks' current values. Each
// block's grad field must already hold the analytic gradient. Returns the
// maximum over trainable coordinates of
//     |g_analytic - g_central| / max(1, |g_central|)
// using central differences with step `eps` (required to be in [1e-7, 1e-4]).
// ---------------------------------------------------------------------------
double check_gradient(const std::function<double()>& loss,
                      std::span<ParameterBlock* const> blocks,
                      double eps);

}  // namespace reliatta
