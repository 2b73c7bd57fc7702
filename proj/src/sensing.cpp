// SPDX-License-Identifier: Apache-2.0
#include "pbdw/sensing.hpp"

#include <algorithm>
#include <sstream>

namespace pbdw {

namespace {

// Integral of the 1D hat centred at node k*h over [a,b].
double hat_integral(int k, double h, double a, double b)
{
    const double xk = k * h;
    double total = 0.0;
    // rising piece on [xk-h, xk], falling piece on [xk, xk+h]
    const double pieces[2][2] = {{xk - h, xk}, {xk, xk + h}};
    for (const auto& piece : pieces) {
        const double lo = std::max(a, piece[0]);
        const double hi = std::min(b, piece[1]);
        if (hi <= lo) continue;
        const double mid = 0.5 * (lo + hi);
        total += (hi - lo) * std::max(0.0, 1.0 - std::abs(mid - xk) / h);
    }
    return total;
}

double hat_value(int k, double h, double x) { return std::max(0.0, 1.0 - std::abs(x - k * h) / h); }

Vec assemble_functional(const DiscreteSpace& space, const SensorSpec& spec, std::size_t index)
{
    const int dx = space.spatial_dim();
    const int n = space.n_mesh();
    const double h = space.h();
    auto fail = [&](const std::string& why) {
        std::ostringstream msg;
        msg << "sensor " << index << ": " << why;
        throw InvalidInput(msg.str());
    };
    if (static_cast<int>(spec.center.size()) != dx) fail("center must have one entry per spatial dimension");

    Vec functional = Vec::Zero(space.dim());
    if (spec.kind == SensorKind::point_value) {
        if (dx != 1) fail("point values are only admissible in 1D");
        const double x = spec.center[0];
        if (!(x > 0.0 && x < 1.0)) fail("point must lie inside the domain");
        for (int k = 1; k < n; ++k) functional(k - 1) = hat_value(k, h, x);
    } else {
        if (!(spec.width > 0.0)) fail("width must be positive");
        const double half = 0.5 * spec.width;
        for (double c : spec.center)
            if (c - half < -1e-12 || c + half > 1.0 + 1e-12) fail("support leaves the domain");
        std::vector<Vec> axis(dx, Vec::Zero(n - 1));
        for (int d = 0; d < dx; ++d)
            for (int k = 1; k < n; ++k)
                axis[d](k - 1) = hat_integral(k, h, spec.center[d] - half, spec.center[d] + half) / spec.width;
        if (dx == 1) {
            functional = axis[0];
        } else {
            for (int j = 1; j < n; ++j)
                for (int i = 1; i < n; ++i)
                    functional(static_cast<Index>(j - 1) * (n - 1) + (i - 1)) = axis[0](i - 1) * axis[1](j - 1);
        }
    }
    if (functional.norm() == 0.0) fail("functional vanishes on the discrete space");
    return functional;
}

}  // namespace

SensorSpec SensorSpec::from_json(const nlohmann::json& doc)
{
    if (!doc.is_object()) throw InvalidInput("sensor spec must be a JSON object");
    SensorSpec spec;
    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "kind") {
                const auto name = value.get<std::string>();
                if (name == "local_average") spec.kind = SensorKind::local_average;
                else if (name == "point_value") spec.kind = SensorKind::point_value;
                else throw InvalidInput("sensor kind must be local_average or point_value");
            } else if (key == "center") {
                spec.center = value.is_array() ? value.get<std::vector<double>>()
                                               : std::vector<double>{value.get<double>()};
            } else if (key == "width") {
                spec.width = value.get<double>();
            } else {
                throw InvalidInput("sensor spec: unknown key '" + key + "'");
            }
        } catch (const nlohmann::json::exception&) {
            throw InvalidInput("sensor spec: key '" + key + "' has the wrong type");
        }
    }
    if (spec.center.empty()) throw InvalidInput("sensor spec: missing center");
    return spec;
}

nlohmann::json SensorSpec::to_json() const
{
    return {{"kind", kind == SensorKind::local_average ? "local_average" : "point_value"},
            {"center", center},
            {"width", width}};
}

std::vector<SensorSpec> equispaced_sensors(int dx, int count, double width)
{
    std::vector<SensorSpec> specs;
    if (count < 1) return specs;
    if (dx == 1) {
        for (int i = 0; i < count; ++i)
            specs.push_back({SensorKind::local_average, {(i + 0.5) / count}, width});
        return specs;
    }
    int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
    int rows = (count + cols - 1) / cols;
    for (int k = 0; k < count; ++k) {
        const int i = k % cols;
        const int j = k / cols;
        // rows are staggered by column so the layout is not mirror symmetric in y
        const double shift = 0.25 + 0.5 * (i + 0.5) / cols;
        specs.push_back({SensorKind::local_average, {(i + 0.5) / cols, (j + shift) / rows}, width});
    }
    return specs;
}

MeasurementSystem build_system(std::shared_ptr<const DiscreteSpace> space,
                               const std::vector<SensorSpec>& specs, double rank_tol)
{
    if (!space) throw InvalidInput("build_system: null space");
    if (specs.empty()) throw InvalidInput("build_system: at least one sensor is required");
    MeasurementSystem sys;
    sys.space_ = std::move(space);
    const DiscreteSpace& U = *sys.space_;
    const Index m = static_cast<Index>(specs.size());

    sys.functionals_.resize(U.dim(), m);
    for (Index i = 0; i < m; ++i) {
        Vec l = assemble_functional(U, specs[static_cast<std::size_t>(i)], static_cast<std::size_t>(i));
        sys.functionals_.col(i) = l;
        sys.sensors_.push_back({specs[static_cast<std::size_t>(i)], std::move(l)});
    }
    sys.representers_ = U.riesz_lift(sys.functionals_);

    // Modified Gram-Schmidt in the U-inner product with one reorthogonalization pass.
    sys.w_basis_.resize(U.dim(), m);
    for (Index i = 0; i < m; ++i) {
        Vec v = sys.representers_.col(i);
        const double original = U.norm(v);
        for (int pass = 0; pass < 2; ++pass)
            for (Index k = 0; k < i; ++k) v -= U.inner(sys.w_basis_.col(k), v) * sys.w_basis_.col(k);
        const double remaining = U.norm(v);
        if (!(remaining > rank_tol * original)) {
            std::ostringstream msg;
            msg << "sensor " << i << " is linearly dependent on the preceding sensors (relative residual "
                << remaining / original << ")";
            throw InvalidInput(msg.str());
        }
        sys.w_basis_.col(i) = v / remaining;
    }

    // raw_i = <psi_i, u>_U = sum_k <psi_i, b_k>_U coords_k
    sys.change_of_basis_ = sys.w_basis_.transpose() * (U.gram() * sys.representers_);
    const Mat gramian = sys.representers_.transpose() * sys.functionals_;
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (gramian + gramian.transpose()), Eigen::EigenvaluesOnly);
    const Vec ev = eig.eigenvalues();
    sys.gramian_condition_ = ev(0) > 0.0 ? ev(ev.size() - 1) / ev(0) : kInfinity;
    return sys;
}

Vec MeasurementSystem::coords(const Vec& u) const { return w_basis_.transpose() * (space_->gram() * u); }

Mat MeasurementSystem::coords(const Mat& states) const
{
    return w_basis_.transpose() * (space_->gram() * states);
}

Vec MeasurementSystem::coords_from_raw(const Vec& raw) const
{
    if (raw.size() != m()) throw InvalidInput("observation has the wrong number of sensor values");
    return change_of_basis_.transpose().triangularView<Eigen::Lower>().solve(raw);
}

Vec MeasurementSystem::raw_from_coords(const Vec& coords) const
{
    if (coords.size() != m()) throw InvalidInput("observation has the wrong number of coordinates");
    return change_of_basis_.transpose() * coords;
}

std::pair<Vec, Vec> project_w(const MeasurementSystem& system, const Vec& u)
{
    Vec w_part = system.state(system.coords(u));
    Vec perp = u - w_part;
    return {std::move(w_part), std::move(perp)};
}

Observation observe(const MeasurementSystem& system, const Vec& u, const NoiseSpec& noise,
                    std::uint64_t rng_seed)
{
    if (noise.level < 0.0) throw InvalidInput("noise level must be non-negative");
    Observation obs;
    obs.noise = noise.kind;
    obs.noise_level = noise.kind == NoiseKind::none ? 0.0 : noise.level;
    Rng rng(rng_seed);
    switch (noise.kind) {
    case NoiseKind::none:
        obs.raw = system.raw_values(u);
        obs.w_coords = system.coords(u);
        break;
    case NoiseKind::bounded: {
        Vec dir = rng.normal_vector(system.m());
        dir /= dir.norm();
        const double radius = noise.level * std::pow(rng.uniform(), 1.0 / static_cast<double>(system.m()));
        obs.w_coords = system.coords(u) + radius * dir;
        obs.raw = system.raw_from_coords(obs.w_coords);
        break;
    }
    case NoiseKind::gaussian:
        obs.raw = system.raw_values(u) + noise.level * rng.normal_vector(system.m());
        obs.w_coords = system.coords_from_raw(obs.raw);
        break;
    }
    return obs;
}

Observation observation_from_raw(const MeasurementSystem& system, const Vec& raw)
{
    Observation obs;
    obs.raw = raw;
    obs.w_coords = system.coords_from_raw(raw);
    return obs;
}

Observation observation_from_coords(const MeasurementSystem& system, const Vec& coords)
{
    Observation obs;
    obs.w_coords = coords;
    obs.raw = system.raw_from_coords(coords);
    return obs;
}

}  // namespace pbdw
