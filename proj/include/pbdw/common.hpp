// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pbdw {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

/// A point of the parameter box Y = [-1,1]^d_y.
using Param = Eigen::VectorXd;

/// Raised when a caller violates a documented precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical step fails in a way the inputs should have ruled out.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Portable random stream. The standard distributions are not bit-identical
/// across library implementations, so the conversions are done by hand.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64()
    {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    Vec normal_vector(Index n)
    {
        Vec v(n);
        for (Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }

    Vec uniform_box(Index d)
    {
        Vec v(d);
        for (Index i = 0; i < d; ++i) v(i) = uniform(-1.0, 1.0);
        return v;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent stream seed from a parent seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag)
{
    Rng mix(parent ^ (tag * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
    return mix.next_u64();
}

/// 64-bit FNV-1a, used for manifest hashes.
inline std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace pbdw

namespace pbdw {

/// Axis-aligned sub-box of the parameter domain.
struct ParamBox {
    Vec lo;
    Vec hi;

    static ParamBox unit(Index d) { return {Vec::Constant(d, -1.0), Vec::Constant(d, 1.0)}; }
    Index dim() const { return lo.size(); }
    Vec center() const { return 0.5 * (lo + hi); }
    Vec width() const { return hi - lo; }
    double volume() const { return (hi - lo).prod(); }
    bool contains(const Vec& y, double slack = 0.0) const
    {
        return ((y - lo).array() >= -slack).all() && ((hi - y).array() >= -slack).all();
    }
    /// Halves along `coord`: (lower half, upper half).
    std::pair<ParamBox, ParamBox> split(Index coord) const
    {
        const double mid = 0.5 * (lo(coord) + hi(coord));
        ParamBox a = *this;
        ParamBox b = *this;
        a.hi(coord) = mid;
        b.lo(coord) = mid;
        return {a, b};
    }
};

}  // namespace pbdw
