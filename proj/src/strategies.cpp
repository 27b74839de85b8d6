#include "unistrat/strategies.hpp"

#include "unistrat/errors.hpp"
#include "unistrat/rng.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace unistrat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool cond, const char* msg) {
    if (!cond) throw DimensionMismatch(msg);
}

} // namespace

bool is_allocation(const Eigen::VectorXd& weights, double tol) {
    if (weights.size() == 0) return false;
    if (weights.minCoeff() < -tol) return false;
    return std::abs(weights.sum() - 1.0) <= tol;
}

Eigen::VectorXd floor_transform(const Eigen::VectorXd& raw, int t, const FloorSchedule& floor) {
    if (floor.epsilon == 0.0) return raw;
    const double tp1 = static_cast<double>(t) + 1.0;
    const double lambda = floor.epsilon / (2.0 * tp1 * tp1);
    const double m = static_cast<double>(raw.size());
    return (1.0 - lambda) * raw.array() + lambda / m;
}

double g_step(double x) { return x < 0.0 ? 0.0 : 1.0; }

double g_linear_step(double x, int t) {
    if (t <= 0) return 0.5;
    const double inv = 1.0 / static_cast<double>(t);
    if (x < -inv) return 0.0;
    if (x > inv) return 1.0;
    return (static_cast<double>(t) * x + 1.0) / 2.0;
}

double g_line(double x) { return (x + 1.0) / 2.0; }

// Case order is significant on the boundary rays: x <= y always holds for
// resistance >= support, and (0,0) takes the first case.
double h_step(double x, double y, double alpha) {
    if (x <= y && y <= 0.0) return 0.0;
    if (x < 0.0 && 0.0 < y) return 1.0 / (alpha + 1.0);
    if (y >= x && x >= 0.0) return 1.0;
    assert(false && "h_step needs x <= y");
    return 1.0 / (alpha + 1.0);
}

double h_smoothed(double x, double y, double alpha, int t) {
    return (alpha * g_linear_step(x, t) + g_linear_step(y, t)) / (alpha + 1.0);
}

double h_plane(double x, double y, double alpha) {
    return (alpha * g_line(x) + g_line(y)) / (alpha + 1.0);
}

Eigen::VectorXd SideInfoModel::operator()(const Eigen::VectorXd& side) const {
    if (side.size() != k_states)
        throw DimensionMismatch("side information length must equal k_states");
    if (kind == Kind::one_hot) {
        Eigen::Index best = 0;
        side.maxCoeff(&best);
        Eigen::VectorXd f = Eigen::VectorXd::Zero(k_states);
        f[best] = 1.0;
        return f;
    }
    const double total = side.sum();
    if (!(total > 0.0)) throw DataError("proportional side weights need a positive sum");
    return side / total;
}

CrpStrategy::CrpStrategy(int m) : m_(m) { require(m >= 2, "CRP needs m >= 2"); }

StrategyMeta CrpStrategy::meta() const {
    return {"crp", m_, 1, m_, 1.0, true};
}

Eigen::VectorXd CrpStrategy::describe(const ParamPoint& w, const EnvironmentSnapshot&) const {
    require(w.k == m_ && w.ell == 1, "CRP parameter point must have k = m, one block");
    return w.coords;
}

CrpSideStrategy::CrpSideStrategy(int m, SideInfoModel model) : m_(m), model_(model) {
    require(m >= 2, "CRPside needs m >= 2");
    require(model.k_states >= 1, "CRPside needs k_states >= 1");
}

StrategyMeta CrpSideStrategy::meta() const {
    return {"crpside", m_, model_.k_states, m_, 1.0, true};
}

Eigen::VectorXd CrpSideStrategy::describe(const ParamPoint& w,
                                          const EnvironmentSnapshot& env) const {
    require(w.k == m_ && w.ell == model_.k_states,
            "CRPside parameter point must have k = m and one block per state");
    const Eigen::VectorXd f = model_(env.side_info);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < model_.k_states; ++j) out += f[j] * w.block(j);
    return out;
}

MaStrategy::MaStrategy(int k, MaAlloc alloc) : k_(k), alloc_(alloc) {
    require(k >= 2, "crossover strategy needs window k >= 2");
}

StrategyMeta MaStrategy::meta() const {
    switch (alloc_) {
        case MaAlloc::step: return {"ma:step", k_, 2, 2, kInf, false};
        case MaAlloc::linear_step: return {"ma:linear_step", k_, 2, 2, 0.5, false};
        case MaAlloc::line: return {"ma:line", k_, 2, 2, 0.5, true};
    }
    return {};
}

Eigen::VectorXd MaStrategy::describe(const ParamPoint& w, const EnvironmentSnapshot& env) const {
    require(w.k == k_ && w.ell == 2, "crossover point must have two k-blocks");
    if (env.price_history.size() != k_)
        throw InsufficientHistory("environment price history shorter than window");
    const double arg = (w.block(0) - w.block(1)).dot(env.price_history);
    double g = 0.0;
    switch (alloc_) {
        case MaAlloc::step: g = g_step(arg); break;
        case MaAlloc::linear_step: g = g_linear_step(arg, env.t); break;
        case MaAlloc::line: g = g_line(arg); break;
    }
    Eigen::VectorXd out(2);
    out << g, 1.0 - g;
    return out;
}

SrStrategy::SrStrategy(int k, SrAlloc alloc, MarginSpec margin)
    : k_(k), alloc_(alloc), margin_(margin) {
    require(k >= 2, "level strategy needs window k >= 2");
    if (!(margin.alpha > 0.0 && margin.alpha <= 1.0))
        throw DataError("margin alpha must lie in (0, 1]");
}

StrategyMeta SrStrategy::meta() const {
    switch (alloc_) {
        case SrAlloc::step: return {"sr:step", k_, 1, 2, kInf, false};
        case SrAlloc::smoothed: return {"sr:smoothed", k_, 1, 2, 0.5, false};
        case SrAlloc::plane: return {"sr:plane", k_, 1, 2, 0.5, true};
    }
    return {};
}

Eigen::VectorXd SrStrategy::describe(const ParamPoint& w, const EnvironmentSnapshot& env) const {
    require(w.k == k_ && w.ell == 1, "level point must have one k-block");
    if (env.min_history.size() != k_ || env.max_history.size() != k_)
        throw InsufficientHistory("environment window histories shorter than window");
    const double support = w.coords.dot(env.min_history);
    const double resistance = w.coords.dot(env.max_history);
    const double x = env.current_price - resistance;
    const double y = env.current_price - support;
    double h = 0.0;
    switch (alloc_) {
        case SrAlloc::step: h = h_step(x, y, margin_.alpha); break;
        case SrAlloc::smoothed: h = h_smoothed(x, y, margin_.alpha, env.t); break;
        case SrAlloc::plane: h = h_plane(x, y, margin_.alpha); break;
    }
    Eigen::VectorXd out(2);
    out << h, 1.0 - h;
    return out;
}

IaStrategy::IaStrategy(int m, int k) : m_(m), k_(k) {
    require(m >= 2, "indicator aggregation needs m >= 2");
    require(k >= 2, "indicator aggregation needs k >= 2");
}

StrategyMeta IaStrategy::meta() const {
    const double k = static_cast<double>(k_);
    const double m = static_cast<double>(m_);
    return {"ia", k_, 1, m_, k + m * k * k, false};
}

Eigen::VectorXd IaStrategy::describe(const ParamPoint& w, const EnvironmentSnapshot& env) const {
    require(w.k == k_ && w.ell == 1, "indicator point must have one k-block");
    if (env.indicators.rows() != m_ || env.indicators.cols() != k_)
        throw DimensionMismatch("indicator matrix must be m x k");
    Eigen::VectorXd scores = env.indicators * w.coords;
    const double total = scores.sum();
    if (!(total > 0.0)) throw DataError("indicator scores must have a positive sum");
    return scores / total;
}

DerivativeReport derivative_bound_check(const Strategy& strategy, const RunInput& input,
                                        int trials, std::uint64_t seed) {
    const StrategyMeta info = strategy.meta();
    DerivativeReport report;
    report.declared_bound = info.derivative_bound;
    report.trials = trials;
    if (!std::isfinite(info.derivative_bound)) {
        report.applicable = false;
        return report;
    }
    if (input.days() == 0) throw DataError("derivative check needs at least one day");

    const double h = 1e-6;
    SeqRng rng(seed);
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t t = rng.uniform_int(input.days());
        // Interior point with margin: uniform center plus a small dent.
        Eigen::VectorXd coords(info.k * info.ell);
        for (int b = 0; b < info.ell; ++b) {
            Eigen::VectorXd block(info.k);
            for (int j = 0; j < info.k; ++j) block[j] = 0.2 + rng.uniform();
            coords.segment(static_cast<Eigen::Index>(b) * info.k, info.k) = block / block.sum();
        }
        for (int b = 0; b < info.ell; ++b) {
            for (int j = 0; j < info.k - 1; ++j) {
                const Eigen::Index lo = static_cast<Eigen::Index>(b) * info.k + j;
                const Eigen::Index last = static_cast<Eigen::Index>(b) * info.k + info.k - 1;
                Eigen::VectorXd up = coords;
                up[lo] += h;
                up[last] -= h;
                Eigen::VectorXd dn = coords;
                dn[lo] -= h;
                dn[last] += h;
                const ParamPoint pu{up, info.k, info.ell};
                const ParamPoint pd{dn, info.k, info.ell};
                const Eigen::VectorXd su = strategy.describe(pu, input.envs[t]);
                const Eigen::VectorXd sd = strategy.describe(pd, input.envs[t]);
                const double tp1 = static_cast<double>(input.envs[t].t) + 1.0;
                const double ratio = ((su - sd).cwiseAbs().maxCoeff() / (2.0 * h)) / tp1;
                report.max_ratio = std::max(report.max_ratio, ratio);
                if (ratio > info.derivative_bound * (1.0 + 1e-6)) ++report.violations;
            }
        }
    }
    return report;
}

} // namespace unistrat
