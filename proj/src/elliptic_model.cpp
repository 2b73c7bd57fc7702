// SPDX-License-Identifier: Apache-2.0
#include "pbdw/elliptic_model.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace pbdw {

namespace {

const char* profile_name(CoeffProfile p) { return p == CoeffProfile::equal ? "equal" : "decay"; }

const char* partition_name(Partition p)
{
    switch (p) {
    case Partition::strips: return "strips";
    case Partition::checkerboard: return "checkerboard";
    case Partition::rings: return "rings";
    default: return "auto";
    }
}

int square_side(int d_y)
{
    const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d_y))));
    return k * k == d_y ? k : 0;
}

template <typename T>
T required_type(const nlohmann::json& value, const std::string& key)
{
    try {
        return value.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidInput("model config: key '" + key + "' has the wrong type");
    }
}

// Element-by-element coefficient integration relies on this layout: elements
// are numbered row-major, ex fastest, and element e owns region element_region[e].
struct Mesh {
    Mat nodes;
    std::vector<std::vector<Index>> element_dofs;  // -1 marks a boundary node
    std::vector<Eigen::Vector2d> element_centers;
    double element_measure = 0.0;
};

Mesh make_mesh(int dx, int n)
{
    Mesh mesh;
    const double h = 1.0 / n;
    if (dx == 1) {
        mesh.nodes.resize(n - 1, 1);
        for (int i = 1; i < n; ++i) mesh.nodes(i - 1, 0) = i * h;
        for (int e = 0; e < n; ++e) {
            const Index left = e == 0 ? -1 : e - 1;
            const Index right = e == n - 1 ? -1 : e;
            mesh.element_dofs.push_back({left, right});
            mesh.element_centers.emplace_back((e + 0.5) * h, 0.0);
        }
        mesh.element_measure = h;
        return mesh;
    }
    const int m = n - 1;
    mesh.nodes.resize(static_cast<Index>(m) * m, 2);
    for (int j = 1; j < n; ++j)
        for (int i = 1; i < n; ++i) {
            const Index k = static_cast<Index>(j - 1) * m + (i - 1);
            mesh.nodes(k, 0) = i * h;
            mesh.nodes(k, 1) = j * h;
        }
    auto dof = [&](int i, int j) -> Index {
        if (i <= 0 || j <= 0 || i >= n || j >= n) return -1;
        return static_cast<Index>(j - 1) * m + (i - 1);
    };
    for (int ey = 0; ey < n; ++ey)
        for (int ex = 0; ex < n; ++ex) {
            // counter-clockwise from the lower-left corner
            mesh.element_dofs.push_back(
                {dof(ex, ey), dof(ex + 1, ey), dof(ex + 1, ey + 1), dof(ex, ey + 1)});
            mesh.element_centers.emplace_back((ex + 0.5) * h, (ey + 0.5) * h);
        }
    mesh.element_measure = h * h;
    return mesh;
}

Mat element_stiffness(int dx, double h)
{
    if (dx == 1) {
        Mat k(2, 2);
        k << 1.0, -1.0, -1.0, 1.0;
        return k / h;
    }
    Mat k(4, 4);
    k << 4, -1, -2, -1,
        -1, 4, -1, -2,
        -2, -1, 4, -1,
        -1, -2, -1, 4;
    return k / 6.0;
}

// Equal-measure partitions, assigned by element center. Rings are concentric
// square annuli around the midpoint, the innermost one first.
int region_of(int dx, int d_y, Partition partition, const Eigen::Vector2d& c)
{
    auto cell = [](double t, int parts) { return std::min(parts - 1, static_cast<int>(t * parts)); };
    if (dx == 2) {
        if (partition == Partition::automatic) partition = square_side(d_y) ? Partition::checkerboard : Partition::strips;
        if (partition == Partition::checkerboard) {
            const int k = square_side(d_y);
            return cell(c.y(), k) * k + cell(c.x(), k);
        }
        if (partition == Partition::rings) {
            const double radius = 2.0 * std::max(std::abs(c.x() - 0.5), std::abs(c.y() - 0.5));
            return cell(radius * radius, d_y);
        }
    }
    return cell(c.x(), d_y);
}

}  // namespace

// ---------------------------------------------------------------------------

ModelConfig ModelConfig::from_json(const nlohmann::json& doc)
{
    if (!doc.is_object()) throw InvalidInput("model config must be a JSON object");
    ModelConfig c;
    for (const auto& [key, value] : doc.items()) {
        if (key == "dx") c.dx = required_type<int>(value, key);
        else if (key == "n_mesh") c.n_mesh = required_type<int>(value, key);
        else if (key == "d_y") c.d_y = required_type<int>(value, key);
        else if (key == "a0") c.a0 = required_type<double>(value, key);
        else if (key == "coeff_profile") {
            const auto name = required_type<std::string>(value, key);
            if (name == "equal") c.coeff_profile = CoeffProfile::equal;
            else if (name == "decay") c.coeff_profile = CoeffProfile::decay;
            else throw InvalidInput("model config: coeff_profile must be \"equal\" or \"decay\"");
        }
        else if (key == "partition") {
            const auto name = required_type<std::string>(value, key);
            if (name == "auto") c.partition = Partition::automatic;
            else if (name == "strips") c.partition = Partition::strips;
            else if (name == "checkerboard") c.partition = Partition::checkerboard;
            else if (name == "rings") c.partition = Partition::rings;
            else throw InvalidInput("model config: partition must be one of auto, strips, checkerboard, rings");
        }
        else if (key == "rho") c.rho = required_type<double>(value, key);
        else if (key == "f") c.f = required_type<double>(value, key);
        else if (key == "solver_tol") c.solver_tol = required_type<double>(value, key);
        else if (key == "seed") c.seed = required_type<std::uint64_t>(value, key);
        else throw InvalidInput("model config: unknown key '" + key + "'");
    }
    return c;
}

nlohmann::json ModelConfig::to_json() const
{
    return {{"dx", dx},   {"n_mesh", n_mesh},
            {"d_y", d_y}, {"a0", a0},
            {"coeff_profile", profile_name(coeff_profile)},
            {"partition", partition_name(partition)},
            {"rho", rho}, {"f", f},
            {"solver_tol", solver_tol},
            {"seed", seed}};
}

// ---------------------------------------------------------------------------

DiscreteSpace::DiscreteSpace(int dx, int n_mesh, Mat nodes, SpMat gram)
    : dx_(dx), n_mesh_(n_mesh), nodes_(std::move(nodes)), gram_(std::move(gram))
{
    auto factor = std::make_shared<Eigen::SimplicialLLT<SpMat>>(gram_);
    if (factor->info() != Eigen::Success)
        throw NumericalError("Gram matrix is not positive definite");
    factor_ = std::move(factor);
}

void DiscreteSpace::check_dim(Index n, const char* what) const
{
    if (n != dim()) {
        std::ostringstream msg;
        msg << what << ": expected dimension " << dim() << ", got " << n;
        throw InvalidInput(msg.str());
    }
}

Vec DiscreteSpace::riesz_lift(const Vec& dual) const
{
    check_dim(dual.size(), "riesz_lift");
    return factor_->solve(dual);
}

Mat DiscreteSpace::riesz_lift(const Mat& duals) const
{
    check_dim(duals.rows(), "riesz_lift");
    return factor_->solve(duals);
}

double DiscreteSpace::dual_norm(const Vec& dual) const
{
    check_dim(dual.size(), "dual_norm");
    // ||L^{-1} P r||_2 with P G P^T = L L^T
    const Vec pr = factor_->permutationP() * dual;
    const Vec z = factor_->matrixL().solve(pr);
    return z.norm();
}

Mat DiscreteSpace::euclidean_coords(const Mat& states) const
{
    check_dim(states.rows(), "euclidean_coords");
    const Mat permuted = factor_->permutationP() * states;
    return factor_->matrixU() * permuted;
}

// ---------------------------------------------------------------------------

void ParametricModel::check_param(const Param& y) const
{
    if (y.size() != d_y()) {
        std::ostringstream msg;
        msg << "parameter has " << y.size() << " entries, model expects " << d_y();
        throw InvalidInput(msg.str());
    }
    for (Index j = 0; j < y.size(); ++j)
        if (!(y(j) >= -1.0 && y(j) <= 1.0)) {
            std::ostringstream msg;
            msg << "parameter component " << j << " = " << y(j) << " lies outside [-1,1]";
            throw InvalidInput(msg.str());
        }
}

SpMat ParametricModel::assemble(const Param& y) const
{
    check_param(y);
    SpMat a = ops_[0];
    for (int j = 0; j < d_y(); ++j) a += y(j) * ops_[j + 1];
    return a;
}

Vec ParametricModel::element_coefficients(const Param& y) const
{
    check_param(y);
    Vec a(static_cast<Index>(element_region_.size()));
    for (std::size_t e = 0; e < element_region_.size(); ++e) {
        const int j = element_region_[e];
        a(static_cast<Index>(e)) = config_.a0 + y(j) * amplitudes_(j);
    }
    return a;
}

std::uint64_t ParametricModel::hash() const { return fnv1a(config_.to_json().dump()); }

ParametricModel build_model(const ModelConfig& config)
{
    if (config.dx != 1 && config.dx != 2) throw InvalidInput("dx must be 1 or 2");
    if (config.n_mesh < 2) throw InvalidInput("n_mesh must be at least 2");
    if (config.d_y < 1) throw InvalidInput("d_y must be at least 1");
    if (!(config.a0 > 0.0)) throw InvalidInput("a0 must be positive");
    if (!(config.rho >= 0.0)) throw InvalidInput("rho must be non-negative");
    if (!(config.solver_tol > 0.0)) throw InvalidInput("solver_tol must be positive");
    if (config.partition == Partition::checkerboard && (config.dx != 2 || !square_side(config.d_y)))
        throw InvalidInput("checkerboard partition needs dx = 2 and a square d_y");
    if (config.partition == Partition::rings && config.dx != 2) throw InvalidInput("rings partition needs dx = 2");

    ParametricModel model;
    model.config_ = config;
    const int d_y = config.d_y;

    model.amplitudes_.resize(d_y);
    if (config.coeff_profile == CoeffProfile::equal) {
        model.amplitudes_.setConstant(config.rho / d_y);
    } else {
        double total = 0.0;
        for (int j = 1; j <= d_y; ++j) total += 1.0 / (static_cast<double>(j) * j);
        for (int j = 1; j <= d_y; ++j)
            model.amplitudes_(j - 1) = config.rho / (static_cast<double>(j) * j * total);
    }
    const double amplitude_sum = model.amplitudes_.cwiseAbs().sum();
    if (amplitude_sum >= config.a0) {
        std::ostringstream msg;
        msg << "ellipticity violated: sum |c_j| = " << amplitude_sum << " >= a0_min = " << config.a0;
        throw InvalidInput(msg.str());
    }
    model.r_ = config.a0 - amplitude_sum;
    model.R_ = config.a0 + amplitude_sum;

    const Mesh mesh = make_mesh(config.dx, config.n_mesh);
    const Index dim = mesh.nodes.rows();
    const Mat k_elem = element_stiffness(config.dx, 1.0 / config.n_mesh);

    std::vector<std::vector<Eigen::Triplet<double>>> region_triplets(d_y);
    model.load_ = Vec::Zero(dim);
    model.region_measure_ = Vec::Zero(d_y);
    model.element_region_.reserve(mesh.element_dofs.size());
    // Integral of a P1/Q1 hat over one element: h/2 in 1D, h^2/4 in 2D.
    const double hat_share = mesh.element_measure / (config.dx == 1 ? 2.0 : 4.0);
    for (std::size_t e = 0; e < mesh.element_dofs.size(); ++e) {
        const int region = region_of(config.dx, d_y, config.partition, mesh.element_centers[e]);
        model.element_region_.push_back(region);
        model.region_measure_(region) += mesh.element_measure;
        const auto& dofs = mesh.element_dofs[e];
        for (std::size_t a = 0; a < dofs.size(); ++a) {
            if (dofs[a] < 0) continue;
            model.load_(dofs[a]) += config.f * hat_share;
            for (std::size_t b = 0; b < dofs.size(); ++b) {
                if (dofs[b] < 0) continue;
                region_triplets[region].emplace_back(dofs[a], dofs[b],
                                                     k_elem(static_cast<Index>(a), static_cast<Index>(b)));
            }
        }
    }

    for (int j = 0; j < d_y; ++j)
        if (model.region_measure_(j) == 0.0)
            throw InvalidInput("mesh too coarse: region " + std::to_string(j) + " contains no element");

    SpMat gram(dim, dim);
    model.ops_.assign(d_y + 1, SpMat(dim, dim));
    for (int j = 0; j < d_y; ++j) {
        SpMat k_region(dim, dim);
        k_region.setFromTriplets(region_triplets[j].begin(), region_triplets[j].end());
        gram += k_region;
        model.ops_[j + 1] = model.amplitudes_(j) * k_region;
    }
    gram.makeCompressed();
    model.ops_[0] = config.a0 * gram;
    for (auto& op : model.ops_) op.makeCompressed();

    model.space_ = std::make_shared<DiscreteSpace>(config.dx, config.n_mesh, mesh.nodes, std::move(gram));
    return model;
}

Vec solve(const ParametricModel& model, const Param& y)
{
    const SpMat a = model.assemble(y);
    Eigen::SimplicialLDLT<SpMat> factor(a);
    if (factor.info() != Eigen::Success) throw NumericalError("A(y) factorization failed");
    const Vec& f = model.load();
    Vec u = factor.solve(f);
    const DiscreteSpace& space = model.space();
    const double target = model.solver_tol() * space.dual_norm(f);
    // iterative refinement until the residual dual norm meets the tolerance
    for (int pass = 0; pass < 3; ++pass) {
        const Vec res = f - a * u;
        if (space.dual_norm(res) <= target) break;
        u += factor.solve(res);
    }
    return u;
}

Residual residual(const ParametricModel& model, const Vec& v, const Param& y)
{
    model.check_param(y);
    if (v.size() != model.space().dim()) throw InvalidInput("residual: state has the wrong dimension");
    Residual res;
    res.components.reserve(model.d_y() + 1);
    res.components.push_back(model.load() - model.ops()[0] * v);
    for (int j = 1; j <= model.d_y(); ++j) res.components.push_back(-(model.ops()[j] * v));
    res.dual_vector = res.components[0];
    for (int j = 1; j <= model.d_y(); ++j) res.dual_vector += y(j - 1) * res.components[j];
    return res;
}

std::pair<double, double> error_residual_envelope(const ParametricModel& model, const Vec& v,
                                                  const Param& y)
{
    const double rn = model.space().dual_norm(residual(model, v, y).dual_vector);
    return {rn / model.R(), rn / model.r()};
}

VertexCheck check_vertex_definiteness(const ParametricModel& model, std::size_t samples,
                                      std::uint64_t seed)
{
    const int d_y = model.d_y();
    VertexCheck check;
    auto test = [&](const Param& y) {
        Eigen::SimplicialLLT<SpMat> llt(model.assemble(y));
        ++check.checked;
        if (llt.info() != Eigen::Success) ++check.failures;
    };
    if (d_y <= 12) {
        check.exhaustive = true;
        const std::uint64_t count = std::uint64_t{1} << d_y;
        for (std::uint64_t bits = 0; bits < count; ++bits) {
            Param y(d_y);
            for (int j = 0; j < d_y; ++j) y(j) = (bits >> j) & 1U ? 1.0 : -1.0;
            test(y);
        }
        return check;
    }
    Rng rng(seed);
    for (std::size_t s = 0; s < samples; ++s) {
        Param y(d_y);
        for (int j = 0; j < d_y; ++j) y(j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
        test(y);
    }
    return check;
}

double coefficient_l2_distance(const ParametricModel& model, const Param& y1, const Param& y2)
{
    const Vec diff = model.element_coefficients(y1) - model.element_coefficients(y2);
    const double h = model.space().h();
    const double measure = model.space().spatial_dim() == 1 ? h : h * h;
    return std::sqrt(diff.squaredNorm() * measure);
}

}  // namespace pbdw
