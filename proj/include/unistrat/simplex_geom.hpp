#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace unistrat {

// Parameter space W_k^ell: ell blocks, each a point on the (k-1)-simplex.
struct ParamSpace {
    int k = 2;   // simplex arity, >= 2
    int ell = 1; // block count, >= 1

    int dim() const { return k * ell; }
    int free_dim() const { return (k - 1) * ell; }
    // Each simplex has diameter sqrt(2); blocks are orthogonal.
    double diameter() const;
};

// A point in W_k^ell, blocks concatenated. Each block: k nonnegative entries
// summing to 1.
struct ParamPoint {
    Eigen::VectorXd coords;
    int k = 0;
    int ell = 0;

    Eigen::VectorBlock<const Eigen::VectorXd> block(int b) const {
        return coords.segment(static_cast<Eigen::Index>(b) * k, k);
    }
};

bool on_simplex(const Eigen::VectorXd& v, double tol = 1e-12);
bool in_param_space(const ParamPoint& p, double tol = 1e-12);

ParamPoint make_point(const ParamSpace& space, Eigen::VectorXd coords);

// Euclidean projection of v onto {x >= 0, sum x = 1}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

// (k-1)-dimensional volume of W_k embedded in R^k: sqrt(k)/(k-1)!.
double simplex_volume(int k);

// Volume of a (k-1)-ball of radius rho embedded in the simplex's hyperplane.
double ball_volume(int k, double rho);

// w^(chi) = (1+chi)(w - center) + center, blockwise about the uniform center.
// chi <= 0 contracts toward the center and stays inside the space; chi > 0
// may leave it (callers check in_param_space if they care).
ParamPoint scale_point(const ParamPoint& p, double chi);

// Axis-aligned grid over W_k^ell in free coordinates (first k-1 entries per
// block; the k-th is 1 minus their sum). Centers sit at multiples of delta.
// A center is kept when its free coords are >= -delta/2 and their block sum
// is <= 1 + delta/2 (cube touches the simplex); kept centers are clamped
// onto the simplex by Euclidean projection. log_weight is the log volume of
// the center's cube intersected with the simplex (product over blocks);
// boundary cubes that only touch have weight zero (-inf).
struct GridSpec {
    ParamSpace space;
    double delta = 0.0;
    std::vector<ParamPoint> centers;
    std::vector<double> log_weight;
    // Flat neighbor table, size() * slots() entries; -1 marks a proposal slot
    // that falls outside the grid.
    std::vector<std::int32_t> neighbor;

    std::size_t size() const { return centers.size(); }
    int slots() const { return 2 * (space.k - 1) * space.ell; }
    std::int32_t neighbor_of(std::size_t center, int slot) const {
        return neighbor[center * static_cast<std::size_t>(slots()) + static_cast<std::size_t>(slot)];
    }
};

GridSpec build_grid(const ParamSpace& space, double delta);

// In-domain axis neighbors of a center (symmetric relation).
std::vector<std::int32_t> neighbors(const GridSpec& grid, std::int32_t center);

// Rejection-sampling estimate of simplex_volume(k) in the free-coordinate
// box, rescaled by the sqrt(k) embedding factor.
double mc_simplex_volume(int k, std::size_t samples, std::uint64_t seed);

} // namespace unistrat
