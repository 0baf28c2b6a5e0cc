#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <new>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpsim {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a conformation tensor loses positive-definiteness.
class SpdLossError : public Error {
public:
    SpdLossError(const std::string& what, double min_eig) : Error(what), min_eigenvalue(min_eig) {}
    double min_eigenvalue;
};

/// Raised when a run produces non-finite values or leaves the admissible phi range.
class BlowUpError : public Error {
public:
    using Error::Error;
};

inline constexpr double pi = std::numbers::pi;

/// 64-byte aligned allocator so every field buffer has the alignment FFTW planned with.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        if (n > std::numeric_limits<std::size_t>::max() / sizeof(T)) throw std::bad_array_new_length();
        std::size_t bytes = (n * sizeof(T) + alignment - 1) / alignment * alignment;
        void* p = std::aligned_alloc(alignment, bytes == 0 ? alignment : bytes);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using RealBuffer = std::vector<double, AlignedAllocator<double>>;
using Complex = std::complex<double>;
/// Half-complex spectrum in FFTW r2c layout: ny rows of (nx/2 + 1) modes.
using Spectrum = std::vector<Complex, AlignedAllocator<Complex>>;

}  // namespace vpsim
