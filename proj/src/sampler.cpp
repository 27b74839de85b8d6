#include "unistrat/sampler.hpp"

#include "unistrat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace unistrat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double ipow(double base, int exp) {
    double out = 1.0;
    for (int i = 0; i < exp; ++i) out *= base;
    return out;
}

double logsumexp(std::span<const double> values) {
    double shift = kNegInf;
    for (double v : values) shift = std::max(shift, v);
    if (shift == kNegInf) return kNegInf;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - shift);
    return shift + std::log(sum);
}

} // namespace

DampingSpec default_damping(double delta) {
    const double sigma = delta / 2.0;
    return DampingSpec{std::min(10.0 / sigma, 1e6), sigma};
}

double log_damping(const ParamPoint& w, const DampingSpec& spec) {
    if (spec.sigma == 0.0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < w.coords.size(); ++i)
        sum += std::min(w.coords[i] - spec.sigma, 0.0);
    return spec.gamma * sum;
}

double damping_factor(const ParamPoint& w, const DampingSpec& spec) {
    return std::exp(log_damping(w, spec));
}

double TargetDistribution::prob(std::size_t i) const {
    return std::exp(log_weight[i] - log_normalizer);
}

TargetDistribution make_target(const GridSpec& grid, std::span<const double> log_R,
                               const DampingSpec& damping) {
    if (log_R.size() != grid.size())
        throw LengthMismatch("one log return per grid center required");
    TargetDistribution target;
    target.grid = &grid;
    target.log_weight.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        target.log_weight[i] = log_R[i] + log_damping(grid.centers[i], damping);
    target.log_normalizer = logsumexp(target.log_weight);
    return target;
}

double log_transition_prob(const TargetDistribution& target, std::int32_t from, std::int32_t to) {
    const GridSpec& grid = *target.grid;
    bool adjacent = false;
    for (int slot = 0; slot < grid.slots(); ++slot)
        if (grid.neighbor_of(static_cast<std::size_t>(from), slot) == to) adjacent = true;
    if (!adjacent) throw DimensionMismatch("transition probability asked for a non-neighbor pair");
    const double ratio = target.log_weight[static_cast<std::size_t>(to)] -
                         target.log_weight[static_cast<std::size_t>(from)];
    return -std::log(static_cast<double>(grid.slots())) + std::min(0.0, ratio);
}

void metropolis_step(ChainState& chain, const TargetDistribution& target, const CounterRng& rng) {
    const GridSpec& grid = *target.grid;
    const std::uint64_t step = chain.step_count++;
    if (grid.slots() == 0) return; // degenerate one-point space
    const std::uint64_t slot = rng.uniform_int(step, 0, static_cast<std::uint64_t>(grid.slots()));
    const std::int32_t proposal =
        grid.neighbor_of(static_cast<std::size_t>(chain.position), static_cast<int>(slot));
    if (proposal < 0) return; // off-grid: stay
    const double diff = target.log_weight[static_cast<std::size_t>(proposal)] -
                        target.log_weight[static_cast<std::size_t>(chain.position)];
    if (diff >= 0.0 || std::log(rng.uniform(step, 1)) < diff) {
        chain.position = proposal;
        ++chain.accepted;
    }
}

ChainRun run_chain(const TargetDistribution& target, std::int32_t start, const CounterRng& rng,
                   std::uint64_t burn_in, std::uint64_t keep, std::uint64_t thin) {
    ChainRun run;
    run.state.position = start;
    run.kept.reserve(keep);
    for (std::uint64_t i = 0; i < burn_in; ++i) metropolis_step(run.state, target, rng);
    for (std::uint64_t j = 0; j < keep; ++j) {
        for (std::uint64_t i = 0; i < thin; ++i) metropolis_step(run.state, target, rng);
        run.kept.push_back(run.state.position);
    }
    return run;
}

std::uint64_t auto_thinning(const GridSpec& grid) {
    const std::uint64_t sites =
        static_cast<std::uint64_t>(std::floor(1.0 / grid.delta + 0.5 + 1e-9)) + 1;
    return std::max<std::uint64_t>(1, sites * sites / 2);
}

std::vector<std::int32_t> warm_start_positions(std::size_t grid_size,
                                               std::span<const std::int32_t> pool_prev,
                                               std::span<const std::int32_t> pool_prev2,
                                               int chains, std::uint64_t seed, std::uint64_t day,
                                               int* fallbacks) {
    std::vector<std::int32_t> starts(static_cast<std::size_t>(chains));
    int used = 0;
    if (fallbacks) *fallbacks = 0;
    for (int c = 0; c < chains; ++c) {
        const int i = used++;
        if (static_cast<std::size_t>(i) < pool_prev.size()) {
            starts[static_cast<std::size_t>(c)] = pool_prev[pool_prev.size() - 1 -
                                                            static_cast<std::size_t>(i)];
        } else if (static_cast<std::size_t>(i) - pool_prev.size() < pool_prev2.size()) {
            const std::size_t j = static_cast<std::size_t>(i) - pool_prev.size();
            starts[static_cast<std::size_t>(c)] = pool_prev2[pool_prev2.size() - 1 - j];
        } else {
            if (fallbacks) ++(*fallbacks);
            const CounterRng rng(seed, day, static_cast<std::uint64_t>(c));
            starts[static_cast<std::size_t>(c)] =
                static_cast<std::int32_t>(rng.uniform_int(0, 2, grid_size));
        }
    }
    return starts;
}

SamplerSession::SamplerSession(const GridSpec& grid, SamplerBudget budget, std::uint64_t seed,
                               DampingSpec damping)
    : grid_(&grid), budget_(budget), seed_(seed), damping_(damping) {
    if (budget_.chains < 1) throw BudgetTooSmall("at least one chain required");
    if (budget_.n_samples < static_cast<std::uint64_t>(budget_.chains))
        throw BudgetTooSmall("n_samples must be at least the chain count");
    thin_ = budget_.thinning == 0 ? auto_thinning(grid) : budget_.thinning;
    log_damp_.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        log_damp_[i] = log_damping(grid.centers[i], damping_);
}

const std::vector<std::int32_t>& SamplerSession::sample_day(int day,
                                                            std::span<const double> log_R,
                                                            std::vector<ChainDiag>* diags,
                                                            std::size_t tv_cap) {
    if (log_R.size() != grid_->size())
        throw LengthMismatch("one log return per grid center required");

    TargetDistribution target;
    target.grid = grid_;
    target.log_weight.resize(grid_->size());
    for (std::size_t i = 0; i < grid_->size(); ++i)
        target.log_weight[i] = log_R[i] + log_damp_[i];
    target.log_normalizer = logsumexp(target.log_weight);

    const int chains = budget_.chains;
    int fallbacks = 0;
    const std::vector<std::int32_t> starts =
        warm_start_positions(grid_->size(), pool_prev_, pool_prev2_, chains, seed_,
                             static_cast<std::uint64_t>(day), &fallbacks);
    warm_fallbacks_ += fallbacks;

    std::vector<ChainRun> runs(static_cast<std::size_t>(chains));
    const std::uint64_t base_keep = budget_.n_samples / static_cast<std::uint64_t>(chains);
    const std::uint64_t extra = budget_.n_samples % static_cast<std::uint64_t>(chains);
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(chains));
    for (int c = 0; c < chains; ++c) {
        const std::uint64_t keep = base_keep + (static_cast<std::uint64_t>(c) < extra ? 1 : 0);
        workers.emplace_back([&, c, keep]() {
            const CounterRng rng(seed_, static_cast<std::uint64_t>(day),
                                 static_cast<std::uint64_t>(c));
            runs[static_cast<std::size_t>(c)] =
                run_chain(target, starts[static_cast<std::size_t>(c)], rng, budget_.burn_in, keep,
                          thin_);
        });
    }
    for (std::thread& w : workers) w.join();

    pooled_.clear();
    pooled_.reserve(budget_.n_samples);
    for (int c = 0; c < chains; ++c) {
        const ChainRun& run = runs[static_cast<std::size_t>(c)];
        pooled_.insert(pooled_.end(), run.kept.begin(), run.kept.end());
        if (diags) {
            ChainDiag diag;
            diag.day = day;
            diag.chain = c;
            diag.acceptance_rate = run.state.step_count == 0
                                       ? 0.0
                                       : static_cast<double>(run.state.accepted) /
                                             static_cast<double>(run.state.step_count);
            std::vector<double> coord(run.kept.size());
            for (std::size_t i = 0; i < run.kept.size(); ++i)
                coord[i] = grid_->centers[static_cast<std::size_t>(run.kept[i])].coords[0];
            diag.ess = geyer_ess(coord);
            if (tv_cap > 0 && grid_->size() <= tv_cap) {
                diag.tv_exact = tv_exact_diagnostic(target, run.kept, tv_cap);
                diag.has_tv = true;
            }
            diags->push_back(diag);
        }
    }

    pool_prev2_ = std::move(pool_prev_);
    pool_prev_ = pooled_;
    return pooled_;
}

Eigen::VectorXd estimate_description(const Strategy& strategy, const GridSpec& grid,
                                     const EnvironmentSnapshot& env, const FloorSchedule& floor,
                                     std::span<const std::int32_t> kept) {
    if (kept.empty()) throw BudgetTooSmall("no samples to average");
    std::vector<char> seen(grid.size(), 0);
    std::vector<Eigen::VectorXd> memo(grid.size());
    Eigen::VectorXd sum;
    for (std::int32_t idx : kept) {
        const std::size_t i = static_cast<std::size_t>(idx);
        if (!seen[i]) {
            memo[i] = floor_transform(strategy.describe(grid.centers[i], env), env.t, floor);
            seen[i] = 1;
        }
        if (sum.size() == 0)
            sum = memo[i];
        else
            sum += memo[i];
    }
    return sum / static_cast<double>(kept.size());
}

UniversalRun sampled_universal_run(const Strategy& strategy, const GridSpec& grid,
                                   const RunInput& input, const FloorSchedule& floor,
                                   const SamplerBudget& budget, std::uint64_t seed,
                                   std::optional<DampingSpec> damping,
                                   std::vector<ChainDiag>* diags, std::size_t tv_cap,
                                   bool keep_descriptions, int* warm_fallbacks) {
    const DampingSpec damp = damping.value_or(default_damping(grid.delta));
    SamplerSession session(grid, budget, seed, damp);

    UniversalRun run;
    run.final_log_returns.assign(grid.size(), 0.0);
    std::vector<Eigen::VectorXd> alloc(grid.size());
    double log_U = 0.0;
    for (std::size_t t = 0; t < input.days(); ++t) {
        const std::vector<std::int32_t>& kept =
            session.sample_day(static_cast<int>(t), run.final_log_returns, diags, tv_cap);

        // One strategy evaluation per center per day feeds both the sampled
        // estimator and the exact per-center return update.
        for (std::size_t i = 0; i < grid.size(); ++i)
            alloc[i] = floor_transform(strategy.describe(grid.centers[i], input.envs[t]),
                                       input.envs[t].t, floor);

        Eigen::VectorXd u = Eigen::VectorXd::Zero(input.market.m);
        for (std::int32_t idx : kept) u += alloc[static_cast<std::size_t>(idx)];
        u /= static_cast<double>(kept.size());

        const double factor = u.dot(input.market.returns[t]);
        log_U += std::log(factor);
        run.ledger.daily_factor.push_back(factor);
        run.ledger.log_wealth.push_back(log_U);
        if (keep_descriptions) run.descriptions.push_back(u);

        for (std::size_t i = 0; i < grid.size(); ++i)
            run.final_log_returns[i] += std::log(alloc[i].dot(input.market.returns[t]));
        run.best_log.push_back(
            *std::max_element(run.final_log_returns.begin(), run.final_log_returns.end()));
    }
    if (warm_fallbacks) *warm_fallbacks = session.warm_fallbacks();
    return run;
}

double required_samples(int m, int t, double eps, double delta) {
    if (!(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0))
        throw DataError("required_samples needs eps, delta in (0,1)");
    const double tp1 = static_cast<double>(t) + 1.0;
    const double lead = 8.0 * m * m * ipow(tp1, 8) / ipow(eps, 4);
    const double bound = lead * std::log(2.0 * m * ipow(tp1, 2) / delta);
    return std::ceil(bound);
}

double gamma_t(int m, int t, double eps) {
    const double tp1 = static_cast<double>(t) + 1.0;
    return eps * eps / (4.0 * m * ipow(tp1, 4));
}

TheoreticalBudget theoretical_budget(const StrategyMeta& meta, int m, int t, double eps, double nu,
                                     double kappa, double confidence) {
    if (!(eps > 0.0 && eps < 1.0)) throw DataError("eps must lie in (0,1)");
    TheoreticalBudget out;
    const double c_prime = 2.0 * meta.derivative_bound / eps;
    const double k = static_cast<double>(meta.k);
    const double ell = static_cast<double>(meta.ell);
    const double td = static_cast<double>(t);
    const auto delta_of = [&](double slack) {
        return slack / (3.0 * c_prime * m * ipow(td, 4) * k * ell);
    };
    out.gamma_t = gamma_t(m, t, eps);
    out.delta_t = delta_of(nu);
    out.sigma = delta_of(out.gamma_t / 2.0) / k;
    out.gamma_exp = 1.0 / out.sigma;
    out.delta_t_prime = delta_of(nu / out.gamma_exp);
    out.n_samples = required_samples(m, t, eps, confidence);
    out.tau = ipow(k, 7) * ipow(ell, 6) * ipow(static_cast<double>(m), 6) * ipow(td, 24) /
              (kappa * nu * nu * ipow(eps, 4));
    out.tau_prime = out.tau * (k * ell + td);
    return out;
}

double tv_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw LengthMismatch("distributions differ in support size");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum / 2.0;
}

double tv_exact_diagnostic(const TargetDistribution& target,
                           std::span<const std::int32_t> samples, std::size_t cap) {
    if (target.size() > cap)
        throw GridTooLarge("exact TV diagnostic capped at " + std::to_string(cap) + " centers");
    std::vector<double> empirical(target.size(), 0.0);
    for (std::int32_t idx : samples) empirical[static_cast<std::size_t>(idx)] += 1.0;
    for (double& e : empirical) e /= static_cast<double>(samples.size());
    std::vector<double> pi(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) pi[i] = target.prob(i);
    return tv_distance(empirical, pi);
}

double geyer_ess(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 4) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);

    const auto gamma = [&](std::size_t lag) {
        double sum = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i)
            sum += (series[i] - mean) * (series[i + lag] - mean);
        return sum / static_cast<double>(n);
    };

    const double g0 = gamma(0);
    if (!(g0 > 0.0)) return static_cast<double>(n); // constant series

    const std::size_t max_pairs = std::min<std::size_t>(512, (n - 2) / 2);
    double sigma2 = -g0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < max_pairs; ++j) {
        double pair = gamma(2 * j) + gamma(2 * j + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        sigma2 += 2.0 * pair;
    }
    if (!(sigma2 > 0.0)) return static_cast<double>(n);
    const double ess = static_cast<double>(n) * g0 / sigma2;
    return std::min(ess, static_cast<double>(n));
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> halves;
    for (const std::vector<double>& chain : chains) {
        const std::size_t half = chain.size() / 2;
        if (half < 2) continue;
        halves.emplace_back(chain.begin(), chain.begin() + static_cast<std::ptrdiff_t>(half));
        halves.emplace_back(chain.begin() + static_cast<std::ptrdiff_t>(half),
                            chain.begin() + static_cast<std::ptrdiff_t>(2 * half));
    }
    if (halves.size() < 2) return 1.0;
    const std::size_t len = halves[0].size();
    for (const auto& h : halves)
        if (h.size() != len) return 1.0;

    const double mcount = static_cast<double>(halves.size());
    const double ncount = static_cast<double>(len);
    std::vector<double> means;
    double grand = 0.0;
    double within = 0.0;
    for (const auto& h : halves) {
        double mu = 0.0;
        for (double v : h) mu += v;
        mu /= ncount;
        means.push_back(mu);
        grand += mu;
        double var = 0.0;
        for (double v : h) var += (v - mu) * (v - mu);
        within += var / (ncount - 1.0);
    }
    grand /= mcount;
    within /= mcount;
    double between = 0.0;
    for (double mu : means) between += (mu - grand) * (mu - grand);
    between *= ncount / (mcount - 1.0);
    if (!(within > 0.0)) return 1.0;
    const double var_plus = (ncount - 1.0) / ncount * within + between / ncount;
    return std::sqrt(var_plus / within);
}

ConcavityReport log_concavity_check(const Strategy& strategy, const RunInput& input,
                                    const FloorSchedule& floor, int trials, std::uint64_t seed,
                                    bool force, double fd_step) {
    const StrategyMeta info = strategy.meta();
    ConcavityReport report;
    report.eligible = info.second_partials_zero;
    report.max_eigenvalue = kNegInf;
    if (!report.eligible && !force) return report;

    const int d = (info.k - 1) * info.ell;
    const double h = fd_step;
    SeqRng rng(seed);

    const auto log_R_at = [&](const Eigen::VectorXd& free) {
        Eigen::VectorXd coords(info.k * info.ell);
        for (int b = 0; b < info.ell; ++b) {
            const Eigen::Index off = static_cast<Eigen::Index>(b) * info.k;
            double sum = 0.0;
            for (int j = 0; j < info.k - 1; ++j) {
                coords[off + j] = free[b * (info.k - 1) + j];
                sum += free[b * (info.k - 1) + j];
            }
            coords[off + info.k - 1] = 1.0 - sum;
        }
        const ParamPoint w{coords, info.k, info.ell};
        double log_R = 0.0;
        for (std::size_t t = 0; t < input.days(); ++t) {
            const Eigen::VectorXd alloc = floor_transform(strategy.describe(w, input.envs[t]),
                                                          input.envs[t].t, floor);
            log_R += std::log(alloc.dot(input.market.returns[t]));
        }
        return log_R;
    };

    for (int trial = 0; trial < trials; ++trial) {
        Eigen::VectorXd free(d);
        for (int b = 0; b < info.ell; ++b) {
            Eigen::VectorXd block(info.k);
            for (int j = 0; j < info.k; ++j) block[j] = 0.25 + rng.uniform();
            block /= block.sum();
            for (int j = 0; j < info.k - 1; ++j) free[b * (info.k - 1) + j] = block[j];
        }

        Eigen::MatrixXd hessian(d, d);
        const double f0 = log_R_at(free);
        for (int i = 0; i < d; ++i) {
            Eigen::VectorXd up = free, dn = free;
            up[i] += h;
            dn[i] -= h;
            hessian(i, i) = (log_R_at(up) - 2.0 * f0 + log_R_at(dn)) / (h * h);
            for (int j = i + 1; j < d; ++j) {
                Eigen::VectorXd pp = free, pm = free, mp = free, mm = free;
                pp[i] += h;
                pp[j] += h;
                pm[i] += h;
                pm[j] -= h;
                mp[i] -= h;
                mp[j] += h;
                mm[i] -= h;
                mm[j] -= h;
                const double v =
                    (log_R_at(pp) - log_R_at(pm) - log_R_at(mp) + log_R_at(mm)) / (4.0 * h * h);
                hessian(i, j) = v;
                hessian(j, i) = v;
            }
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hessian);
        report.max_eigenvalue =
            std::max(report.max_eigenvalue, solver.eigenvalues().maxCoeff());
        ++report.points_checked;
    }
    return report;
}

} // namespace unistrat
