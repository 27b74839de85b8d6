#pragma once

#include "unistrat/market.hpp"
#include "unistrat/rng.hpp"
#include "unistrat/simplex_geom.hpp"
#include "unistrat/strategies.hpp"
#include "unistrat/universalizer.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace unistrat {

// Edge damping f_ij(w) = exp(Gamma * min(w_ij - sigma, 0)): weight 1 in the
// interior, exponentially small within sigma of a simplex face. sigma = 0
// disables damping.
struct DampingSpec {
    double gamma = 0.0;
    double sigma = 0.0;
};

// sigma = delta/2 keeps damping inside the outermost cell layer.
DampingSpec default_damping(double delta);

double log_damping(const ParamPoint& w, const DampingSpec& spec);
double damping_factor(const ParamPoint& w, const DampingSpec& spec);

// Discrete target pi(w) proportional to F(w) = R(w) * damping(w) with equal
// base weight per grid center.
struct TargetDistribution {
    const GridSpec* grid = nullptr;
    std::vector<double> log_weight;
    double log_normalizer = 0.0;

    std::size_t size() const { return log_weight.size(); }
    double prob(std::size_t i) const;
};

TargetDistribution make_target(const GridSpec& grid, std::span<const double> log_R,
                               const DampingSpec& damping);

// log P(from -> to) for an in-domain neighbor pair: uniform proposal over
// the 2(k-1)ell slots, accepted with min(1, F(to)/F(from)).
double log_transition_prob(const TargetDistribution& target, std::int32_t from, std::int32_t to);

struct ChainState {
    std::int32_t position = 0;
    std::uint64_t step_count = 0;
    std::uint64_t accepted = 0;
};

// One Metropolis move; proposals falling outside the grid leave the position
// unchanged but still advance the step counter.
void metropolis_step(ChainState& chain, const TargetDistribution& target, const CounterRng& rng);

struct ChainRun {
    std::vector<std::int32_t> kept;
    ChainState state;
};

ChainRun run_chain(const TargetDistribution& target, std::int32_t start, const CounterRng& rng,
                   std::uint64_t burn_in, std::uint64_t keep, std::uint64_t thin);

// Runtime sampling budget. n_samples is the kept-sample total pooled across
// chains. thinning = 0 picks ceil(L^2/2) automatically (L = lattice sites
// per axis), which makes kept samples nearly independent under the
// one-cell-per-step walk. tv_target/smoothness/confidence feed the
// theoretical calculators only.
struct SamplerBudget {
    std::uint64_t n_samples = 10000;
    std::uint64_t burn_in = 100000;
    int chains = 8;
    std::uint64_t thinning = 0;
    double tv_target = 0.0;
    double smoothness = 0.1;
    double confidence = 0.1;
};

std::uint64_t auto_thinning(const GridSpec& grid);

// Chain starts drawn from stored sample pools of the two previous days,
// consumed from the back without replacement; uniform over the grid when the
// pools run out (counted in fallbacks).
std::vector<std::int32_t> warm_start_positions(std::size_t grid_size,
                                               std::span<const std::int32_t> pool_prev,
                                               std::span<const std::int32_t> pool_prev2,
                                               int chains, std::uint64_t seed, std::uint64_t day,
                                               int* fallbacks = nullptr);

struct ChainDiag {
    int day = 0;
    int chain = 0;
    double acceptance_rate = 0.0;
    double ess = 0.0;
    double tv_exact = 0.0;
    bool has_tv = false;
};

// Runs per-day sampling with warm starts carried between days. Chains run in
// parallel; pooling order is fixed by chain index, so results are
// deterministic for a given seed.
class SamplerSession {
public:
    SamplerSession(const GridSpec& grid, SamplerBudget budget, std::uint64_t seed,
                   DampingSpec damping);

    // Samples the day-t target built from log_R (plus damping); returns the
    // pooled kept positions. tv_cap > 0 adds per-chain exact TV diagnostics
    // when the grid is small enough.
    const std::vector<std::int32_t>& sample_day(int day, std::span<const double> log_R,
                                                std::vector<ChainDiag>* diags = nullptr,
                                                std::size_t tv_cap = 0);

    const GridSpec& grid() const { return *grid_; }
    const SamplerBudget& budget() const { return budget_; }

    // Chain starts that fell back to a uniform draw because the warm pools
    // were exhausted, accumulated across days.
    int warm_fallbacks() const { return warm_fallbacks_; }

private:
    const GridSpec* grid_;
    SamplerBudget budget_;
    std::uint64_t seed_;
    DampingSpec damping_;
    std::vector<double> log_damp_;
    std::uint64_t thin_;
    int warm_fallbacks_ = 0;
    std::vector<std::int32_t> pool_prev_;
    std::vector<std::int32_t> pool_prev2_;
    std::vector<std::int32_t> pooled_;
};

// Mean of floored descriptions over the kept sample positions.
Eigen::VectorXd estimate_description(const Strategy& strategy, const GridSpec& grid,
                                     const EnvironmentSnapshot& env, const FloorSchedule& floor,
                                     std::span<const std::int32_t> kept);

// Universal run whose daily descriptions come from the Metropolis estimator;
// grid log-returns are still tracked exactly (one strategy evaluation per
// center per day), so best_log and regret stay exact.
UniversalRun sampled_universal_run(const Strategy& strategy, const GridSpec& grid,
                                   const RunInput& input, const FloorSchedule& floor,
                                   const SamplerBudget& budget, std::uint64_t seed,
                                   std::optional<DampingSpec> damping = std::nullopt,
                                   std::vector<ChainDiag>* diags = nullptr,
                                   std::size_t tv_cap = 0, bool keep_descriptions = false,
                                   int* warm_fallbacks = nullptr);

// Sample count bound N_t = ceil((8 m^2 (t+1)^8 / eps^4) * log(2m(t+1)^2 / delta)).
double required_samples(int m, int t, double eps, double delta);

// gamma_t = eps^2 / (4 m (t+1)^4).
double gamma_t(int m, int t, double eps);

// Worst-case budget formulas, reported for reference only; runtime defaults
// come from SamplerBudget.
struct TheoreticalBudget {
    double delta_t = 0.0;       // grid scale nu/(3 c' m t^4 k ell)
    double delta_t_prime = 0.0; // delta_t(nu/Gamma)
    double sigma = 0.0;         // delta_t(gamma_t/2)/k
    double gamma_exp = 0.0;     // damping exponent scale 1/sigma
    double gamma_t = 0.0;
    double n_samples = 0.0;
    double tau = 0.0;       // mixing steps k^7 ell^6 m^6 t^24 / (kappa nu^2 eps^4)
    double tau_prime = 0.0; // tau * (k ell + t)
    std::string note = "theoretical bound; not used as runtime defaults";
};

TheoreticalBudget theoretical_budget(const StrategyMeta& meta, int m, int t, double eps, double nu,
                                     double kappa, double confidence);

// Total variation (1/2) sum |a - b| between two distributions on the grid.
double tv_distance(std::span<const double> a, std::span<const double> b);

// TV between the empirical histogram of `samples` and the enumerated target.
// Throws GridTooLarge when the grid exceeds `cap` centers.
double tv_exact_diagnostic(const TargetDistribution& target,
                           std::span<const std::int32_t> samples, std::size_t cap);

// Tail-truncated (Geyer initial monotone positive sequence) effective sample
// size of a scalar series; n for constant or uncorrelated series.
double geyer_ess(std::span<const double> series);

// Split-half potential scale reduction across chains of a scalar series;
// 1 when chains agree. Degenerate inputs return 1.
double split_rhat(const std::vector<std::vector<double>>& chains);

struct ConcavityReport {
    bool eligible = false;
    double max_eigenvalue = 0.0;
    int points_checked = 0;
};

// Numeric Hessian of log R_n(w) in free coordinates at random interior
// points; reports the largest eigenvalue seen. Runs only for strategies
// whose second partials vanish unless forced.
ConcavityReport log_concavity_check(const Strategy& strategy, const RunInput& input,
                                    const FloorSchedule& floor, int trials, std::uint64_t seed,
                                    bool force = false, double fd_step = 1e-3);

} // namespace unistrat
