#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pil {

// Error taxonomy. Every module throws one of these; the CLI maps them to
// exit code 1 with a machine-readable payload.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : error { using error::error; };
struct format_error : error { using error::error; };
struct shape_error : error { using error::error; };
struct argument_error : error { using error::error; };
struct numeric_error : error { using error::error; };
struct integrity_error : error { using error::error; };
struct consistency_error : error { using error::error; };

// Dense row-major matrix. All heavy math in this project runs over flat
// float buffers; this is the one container everything shares.
template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T* row(std::size_t i) { return data.data() + i * cols; }
    const T* row(std::size_t i) const { return data.data() + i * cols; }

    T& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool operator==(const Matrix& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

using MatF = Matrix<float>;
using MatD = Matrix<double>;

// Reads PIL_THREADS and caps the OpenMP worker count. Called once per
// process entry point; a missing or unparsable value leaves the default.
void apply_thread_cap_from_env();

// FNV-1a over a byte range. Used for output-determinism checks.
std::uint64_t fnv1a(const void* bytes, std::size_t len);

template <typename T>
std::uint64_t fnv1a(const std::vector<T>& v) {
    return fnv1a(v.data(), v.size() * sizeof(T));
}

}  // namespace pil
