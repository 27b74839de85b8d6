#pragma once

#include "unistrat/market.hpp"
#include "unistrat/simplex_geom.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>

namespace unistrat {

// Nonnegative fractions summing to 1 over the m instruments.
bool is_allocation(const Eigen::VectorXd& weights, double tol = 1e-12);

// Mixes an allocation toward uniform: (1 - eps/(2(t+1)^2)) * raw +
// eps/(2m(t+1)^2), so every instrument keeps a vanishing floor weight.
// epsilon = 0 disables the transform.
struct FloorSchedule {
    double epsilon = 0.0;
};

Eigen::VectorXd floor_transform(const Eigen::VectorXd& raw, int t, const FloorSchedule& floor);

// Allocation functions mapping trend/level signals to a long fraction.
enum class MaAlloc { step, linear_step, line };
enum class SrAlloc { step, smoothed, plane };

double g_step(double x);                  // 0 below 0, else 1
double g_linear_step(double x, int t);    // ramp of width 2/t (constant 1/2 at t=0)
double g_line(double x);                  // (x+1)/2 on [-1,1] signals
double h_step(double x, double y, double alpha);
double h_smoothed(double x, double y, double alpha, int t);
double h_plane(double x, double y, double alpha);

// Maps a side-information vector to k_states nonnegative weights summing
// to 1: proportional (v_i / sum v) or one-hot at the argmax (lowest index
// wins ties).
struct SideInfoModel {
    enum class Kind { proportional, one_hot };
    Kind kind = Kind::proportional;
    int k_states = 2;

    Eigen::VectorXd operator()(const Eigen::VectorXd& side) const;
};

struct StrategyMeta {
    std::string name;
    int k = 2;    // simplex arity of each parameter block
    int ell = 1;  // parameter block count
    int m = 2;    // instrument count
    // |dS_ti/dw| <= derivative_bound * (t+1); infinity for step allocations.
    double derivative_bound = 1.0;
    // True when all second partials of S in the free coordinates vanish,
    // which makes log R_t concave and the sampler applicable.
    bool second_partials_zero = false;
};

class Strategy {
public:
    virtual ~Strategy() = default;
    virtual StrategyMeta meta() const = 0;
    virtual Eigen::VectorXd describe(const ParamPoint& w,
                                     const EnvironmentSnapshot& env) const = 0;

    ParamSpace space() const {
        const StrategyMeta info = meta();
        return ParamSpace{info.k, info.ell};
    }
};

// S_t(w) = w. k = m, one block.
class CrpStrategy : public Strategy {
public:
    explicit CrpStrategy(int m);
    StrategyMeta meta() const override;
    Eigen::VectorXd describe(const ParamPoint& w, const EnvironmentSnapshot& env) const override;

private:
    int m_;
};

// S_t(w) = sum_j f_j(side) w_j over k_states blocks of dimension m.
class CrpSideStrategy : public Strategy {
public:
    CrpSideStrategy(int m, SideInfoModel model);
    StrategyMeta meta() const override;
    Eigen::VectorXd describe(const ParamPoint& w, const EnvironmentSnapshot& env) const override;

private:
    int m_;
    SideInfoModel model_;
};

// Fast/slow weighted-average crossover: two blocks (w_F, w_S), long fraction
// g((w_F - w_S) . v_t), m = 2 (long, short).
class MaStrategy : public Strategy {
public:
    MaStrategy(int k, MaAlloc alloc);
    StrategyMeta meta() const override;
    Eigen::VectorXd describe(const ParamPoint& w, const EnvironmentSnapshot& env) const override;

private:
    int k_;
    MaAlloc alloc_;
};

// Support/resistance: levels s_t = w . min_history, r_t = w . max_history,
// long fraction h(p_t - r_t, p_t - s_t), m = 2 (long, short).
class SrStrategy : public Strategy {
public:
    SrStrategy(int k, SrAlloc alloc, MarginSpec margin);
    StrategyMeta meta() const override;
    Eigen::VectorXd describe(const ParamPoint& w, const EnvironmentSnapshot& env) const override;
    const MarginSpec& margin() const { return margin_; }

private:
    int k_;
    SrAlloc alloc_;
    MarginSpec margin_;
};

// Indicator aggregation: component i is (w . v_ti) / sum_l (w . v_tl).
class IaStrategy : public Strategy {
public:
    IaStrategy(int m, int k);
    StrategyMeta meta() const override;
    Eigen::VectorXd describe(const ParamPoint& w, const EnvironmentSnapshot& env) const override;

private:
    int m_;
    int k_;
};

struct DerivativeReport {
    double max_ratio = 0.0; // max over trials of |finite difference| / (t+1)
    double declared_bound = 0.0;
    int violations = 0;
    int trials = 0;
    bool applicable = true; // false for step allocations
};

// Central finite differences of S_ti along free coordinates at random
// interior points and days, checked against meta().derivative_bound.
DerivativeReport derivative_bound_check(const Strategy& strategy, const RunInput& input,
                                        int trials, std::uint64_t seed);

} // namespace unistrat
