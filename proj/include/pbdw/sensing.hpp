// SPDX-License-Identifier: Apache-2.0
//
// Linear sensors l_i, their Riesz representers psi_i = G^{-1} l_i, and the
// measurement space W = span{psi_i} with a U-orthonormal basis.
#pragma once

#include "pbdw/common.hpp"
#include "pbdw/elliptic_model.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <utility>

namespace pbdw {

enum class SensorKind { local_average, point_value };

struct SensorSpec {
    SensorKind kind = SensorKind::local_average;
    std::vector<double> center;  ///< one entry per spatial dimension
    double width = 0.1;          ///< side length of the averaging window

    static SensorSpec from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
};

/// `count` equispaced local averages (1D) or a near-square grid of them with
/// rows staggered per column (2D).
std::vector<SensorSpec> equispaced_sensors(int dx, int count, double width);

struct Sensor {
    SensorSpec spec;
    Vec functional;  ///< dual-basis coefficients of l_i
};

class MeasurementSystem {
public:
    const DiscreteSpace& space() const { return *space_; }
    const std::shared_ptr<const DiscreteSpace>& space_ptr() const { return space_; }
    Index m() const { return static_cast<Index>(sensors_.size()); }
    const std::vector<Sensor>& sensors() const { return sensors_; }
    /// Columns l_i (dual vectors).
    const Mat& functionals() const { return functionals_; }
    /// Columns psi_i.
    const Mat& representers() const { return representers_; }
    /// U-orthonormal basis of W.
    const Mat& w_basis() const { return w_basis_; }
    /// Condition number of the representer Gramian psi_i^T G psi_j.
    double gramian_condition() const { return gramian_condition_; }

    /// Coordinates of P_W u in w_basis.
    Vec coords(const Vec& u) const;
    Mat coords(const Mat& states) const;
    /// The m raw values l_i(u).
    Vec raw_values(const Vec& u) const { return functionals_.transpose() * u; }
    /// State of W with the given coordinates.
    Vec state(const Vec& coords) const { return w_basis_ * coords; }

    Vec coords_from_raw(const Vec& raw) const;
    Vec raw_from_coords(const Vec& coords) const;

private:
    friend MeasurementSystem build_system(std::shared_ptr<const DiscreteSpace>,
                                          const std::vector<SensorSpec>&, double);

    std::shared_ptr<const DiscreteSpace> space_;
    std::vector<Sensor> sensors_;
    Mat functionals_;
    Mat representers_;
    Mat w_basis_;
    Mat change_of_basis_;  // upper triangular T with raw = T^T coords
    double gramian_condition_ = 1.0;
};

/// Builds the system. Throws InvalidInput naming the first sensor whose
/// representer depends linearly on its predecessors (relative tolerance rank_tol).
MeasurementSystem build_system(std::shared_ptr<const DiscreteSpace> space,
                               const std::vector<SensorSpec>& specs, double rank_tol = 1e-10);

/// (P_W u, P_{W^perp} u)
std::pair<Vec, Vec> project_w(const MeasurementSystem& system, const Vec& u);

enum class NoiseKind { none, bounded, gaussian };

/// `bounded`: perturbation of Euclidean norm <= level in W-coordinates.
/// `gaussian`: i.i.d. N(0, level^2) added to the raw sensor values.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    double level = 0.0;
};

struct Observation {
    Vec w_coords;
    Vec raw;
    double noise_level = 0.0;
    NoiseKind noise = NoiseKind::none;
};

Observation observe(const MeasurementSystem& system, const Vec& u, const NoiseSpec& noise = {},
                    std::uint64_t rng_seed = 0);

Observation observation_from_raw(const MeasurementSystem& system, const Vec& raw);
Observation observation_from_coords(const MeasurementSystem& system, const Vec& coords);

}  // namespace pbdw
