#include "unistrat/simplex_geom.hpp"

#include "unistrat/errors.hpp"
#include "unistrat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace unistrat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_space(const ParamSpace& space) {
    if (space.k < 2 || space.ell < 1)
        throw DimensionMismatch("parameter space needs k >= 2 and ell >= 1");
}

// Volume of [l,h]^d intersected with {x : sum x <= 1}, l >= 0 per axis.
// Inclusion-exclusion over the box's upper faces: with s = 1 - sum(l) and
// edge lengths b_i = h_i - l_i,
//   vol = sum_{A subset [d]} (-1)^|A| max(0, s - sum_{i in A} b_i)^d / d!
double box_halfspace_volume(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const int d = static_cast<int>(lo.size());
    const double s = 1.0 - lo.sum();
    if (s <= 0.0) return 0.0;
    double factorial = 1.0;
    for (int i = 2; i <= d; ++i) factorial *= i;
    double vol = 0.0;
    const std::uint32_t subsets = 1u << d;
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
        double r = s;
        int bits = 0;
        for (int i = 0; i < d; ++i) {
            if (mask & (1u << i)) {
                r -= hi[i] - lo[i];
                ++bits;
            }
        }
        if (r <= 0.0) continue;
        double term = std::pow(r, d) / factorial;
        vol += (bits % 2 == 0) ? term : -term;
    }
    return std::max(vol, 0.0);
}

struct BlockGrid {
    std::vector<Eigen::VectorXi> lattice;  // free-coordinate multiples of delta
    std::vector<Eigen::VectorXd> points;   // clamped k-vectors on the simplex
    std::vector<double> log_volume;        // cell volume within the simplex
    std::map<std::vector<int>, std::int32_t> index;
};

void enumerate_lattice(int free_dim, int total_cap, Eigen::VectorXi& cur, int pos, int used,
                       std::vector<Eigen::VectorXi>& out) {
    if (pos == free_dim) {
        out.push_back(cur);
        return;
    }
    for (int i = 0; used + i <= total_cap; ++i) {
        cur[pos] = i;
        enumerate_lattice(free_dim, total_cap, cur, pos + 1, used + i, out);
    }
}

BlockGrid build_block(int k, double delta) {
    const int d = k - 1;
    // Retention: sum of free coords <= 1 + delta/2, i.e. integer sum <= 1/delta + 1/2.
    const int cap = static_cast<int>(std::floor(1.0 / delta + 0.5 + 1e-9));
    // C(cap + d, d) lattice points; refuse before enumerating anything huge.
    double count = 1.0;
    for (int i = 1; i <= d; ++i) count *= static_cast<double>(cap + i) / static_cast<double>(i);
    if (count > double(1 << 24)) throw GridTooLarge("grid would exceed 2^24 centers");
    BlockGrid block;
    Eigen::VectorXi cur(d);
    enumerate_lattice(d, cap, cur, 0, 0, block.lattice);

    block.points.reserve(block.lattice.size());
    block.log_volume.reserve(block.lattice.size());
    for (std::size_t i = 0; i < block.lattice.size(); ++i) {
        const Eigen::VectorXi& lat = block.lattice[i];
        Eigen::VectorXd free = lat.cast<double>() * delta;
        Eigen::VectorXd full(k);
        full.head(d) = free;
        full[d] = 1.0 - free.sum();
        if (full[d] < 0.0) full = project_to_simplex(full);
        block.points.push_back(std::move(full));

        Eigen::VectorXd lo(d), hi(d);
        for (int j = 0; j < d; ++j) {
            lo[j] = std::max(0.0, free[j] - delta / 2.0);
            hi[j] = free[j] + delta / 2.0;
        }
        double vol = box_halfspace_volume(lo, hi);
        block.log_volume.push_back(vol > 0.0 ? std::log(vol) : kNegInf);

        std::vector<int> key(lat.data(), lat.data() + d);
        block.index.emplace(std::move(key), static_cast<std::int32_t>(i));
    }
    return block;
}

} // namespace

double ParamSpace::diameter() const { return std::sqrt(2.0 * ell); }

bool on_simplex(const Eigen::VectorXd& v, double tol) {
    if (v.size() == 0) return false;
    if (v.minCoeff() < -tol) return false;
    return std::abs(v.sum() - 1.0) <= tol;
}

bool in_param_space(const ParamPoint& p, double tol) {
    if (p.coords.size() != static_cast<Eigen::Index>(p.k) * p.ell) return false;
    for (int b = 0; b < p.ell; ++b)
        if (!on_simplex(p.block(b), tol)) return false;
    return true;
}

ParamPoint make_point(const ParamSpace& space, Eigen::VectorXd coords) {
    check_space(space);
    if (coords.size() != space.dim())
        throw DimensionMismatch("coordinate count does not match k*ell");
    ParamPoint p{std::move(coords), space.k, space.ell};
    if (!in_param_space(p))
        throw DimensionMismatch("point is not on the simplex product");
    return p;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0;
    double tau = 0.0;
    int rho = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        css += u[static_cast<std::size_t>(j)];
        double t = (css - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - t > 0.0) {
            rho = static_cast<int>(j + 1);
            tau = t;
        }
    }
    (void)rho;
    return (v.array() - tau).cwiseMax(0.0);
}

double simplex_volume(int k) {
    if (k < 2) throw DimensionMismatch("simplex_volume needs k >= 2");
    return std::sqrt(static_cast<double>(k)) / std::tgamma(static_cast<double>(k));
}

double ball_volume(int k, double rho) {
    if (k < 2) throw DimensionMismatch("ball_volume needs k >= 2");
    const double d = static_cast<double>(k - 1);
    return std::pow(3.14159265358979323846, d / 2.0) * std::pow(rho, d) /
           std::tgamma(d / 2.0 + 1.0);
}

ParamPoint scale_point(const ParamPoint& p, double chi) {
    ParamPoint out = p;
    const double center = 1.0 / static_cast<double>(p.k);
    out.coords = (1.0 + chi) * (p.coords.array() - center) + center;
    return out;
}

GridSpec build_grid(const ParamSpace& space, double delta) {
    check_space(space);
    if (!(delta > 0.0) || delta > 1.0)
        throw DimensionMismatch("grid spacing must be in (0, 1]");

    BlockGrid block = build_block(space.k, delta);
    const std::size_t per_block = block.lattice.size();

    double total = 1.0;
    for (int b = 0; b < space.ell; ++b) total *= static_cast<double>(per_block);
    if (total > double(1 << 24))
        throw GridTooLarge("grid would exceed 2^24 centers");
    const std::size_t count = static_cast<std::size_t>(total);

    GridSpec grid;
    grid.space = space;
    grid.delta = delta;
    grid.centers.reserve(count);
    grid.log_weight.reserve(count);

    // Centers in row-major block order: block 0 varies slowest.
    std::vector<std::size_t> idx(static_cast<std::size_t>(space.ell), 0);
    for (std::size_t flat = 0; flat < count; ++flat) {
        Eigen::VectorXd coords(space.dim());
        double lw = 0.0;
        std::size_t rem = flat;
        for (int b = space.ell - 1; b >= 0; --b) {
            idx[static_cast<std::size_t>(b)] = rem % per_block;
            rem /= per_block;
        }
        for (int b = 0; b < space.ell; ++b) {
            const std::size_t i = idx[static_cast<std::size_t>(b)];
            coords.segment(static_cast<Eigen::Index>(b) * space.k, space.k) = block.points[i];
            lw += block.log_volume[i];
        }
        grid.centers.push_back(ParamPoint{std::move(coords), space.k, space.ell});
        grid.log_weight.push_back(lw);
    }

    // Neighbor table: per block, per free axis, -1/+1 lattice steps.
    const int slots = grid.slots();
    const int d = space.k - 1;
    grid.neighbor.assign(count * static_cast<std::size_t>(slots), -1);
    std::vector<int> key(static_cast<std::size_t>(d));
    for (std::size_t flat = 0; flat < count; ++flat) {
        std::size_t rem = flat;
        for (int b = space.ell - 1; b >= 0; --b) {
            idx[static_cast<std::size_t>(b)] = rem % per_block;
            rem /= per_block;
        }
        for (int b = 0; b < space.ell; ++b) {
            const Eigen::VectorXi& lat = block.lattice[idx[static_cast<std::size_t>(b)]];
            std::size_t stride = 1;
            for (int bb = space.ell - 1; bb > b; --bb) stride *= per_block;
            for (int axis = 0; axis < d; ++axis) {
                for (int dir = 0; dir < 2; ++dir) {
                    const int slot = (b * d + axis) * 2 + dir;
                    for (int j = 0; j < d; ++j) key[static_cast<std::size_t>(j)] = lat[j];
                    key[static_cast<std::size_t>(axis)] += dir == 0 ? -1 : 1;
                    auto it = block.index.find(key);
                    if (it == block.index.end()) continue;
                    const std::int64_t diff =
                        static_cast<std::int64_t>(it->second) -
                        static_cast<std::int64_t>(idx[static_cast<std::size_t>(b)]);
                    const std::int64_t nb_flat =
                        static_cast<std::int64_t>(flat) + diff * static_cast<std::int64_t>(stride);
                    grid.neighbor[flat * static_cast<std::size_t>(slots) +
                                  static_cast<std::size_t>(slot)] =
                        static_cast<std::int32_t>(nb_flat);
                }
            }
        }
    }
    return grid;
}

std::vector<std::int32_t> neighbors(const GridSpec& grid, std::int32_t center) {
    std::vector<std::int32_t> out;
    for (int slot = 0; slot < grid.slots(); ++slot) {
        std::int32_t nb = grid.neighbor_of(static_cast<std::size_t>(center), slot);
        if (nb >= 0) out.push_back(nb);
    }
    return out;
}

double mc_simplex_volume(int k, std::size_t samples, std::uint64_t seed) {
    if (k < 2) throw DimensionMismatch("mc_simplex_volume needs k >= 2");
    const int d = k - 1;
    SeqRng rng(seed);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        double sum = 0.0;
        for (int j = 0; j < d; ++j) sum += rng.uniform();
        if (sum <= 1.0) ++hits;
    }
    return std::sqrt(static_cast<double>(k)) * static_cast<double>(hits) /
           static_cast<double>(samples);
}

} // namespace unistrat
