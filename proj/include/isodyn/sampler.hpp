#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isodyn/folded_normal.hpp"
#include "isodyn/likelihood.hpp"
#include "isodyn/rng.hpp"
#include "isodyn/seed.hpp"
#include "isodyn/state.hpp"

namespace isodyn {

/// rho_h - rho_{h+1} with rho past the last bin taken as 0.
inline std::vector<double> rho_increments(const MassDensityVector& rho) {
    const std::size_t n = rho.size();
    std::vector<double> d(n);
    for (std::size_t h = 0; h < n; ++h) d[h] = rho[h] - (h + 1 < n ? rho[h + 1] : 0.0);
    return d;
}

/// f_{j+1} - f_j for j < n_e - 1 (the top bin is pinned at 1).
inline std::vector<double> f_increments(const PhaseDensityVector& f) {
    std::vector<double> d;
    for (std::size_t j = 0; j + 1 < f.size(); ++j) d.push_back(f[j + 1] - f[j]);
    return d;
}

template <class V>
struct Proposal {
    V value;
    /// log q(current | proposed) - log q(proposed | current); add to the log-posterior difference.
    double log_q_ratio;
    /// False when the raw draw left the support and `value` holds its clamped image; such moves are rejected.
    bool in_support = true;
};

inline double folded_log_ratio(std::span<const double> from, std::span<const double> to, std::span<const double> var) {
    double s = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i) {
        const double sd = std::sqrt(var[i]);
        s += folded_normal::log_pdf(from[i], to[i], sd) - folded_normal::log_pdf(to[i], from[i], sd);
    }
    return s;
}

/// Folded-normal moves on the increments, rebuilt from the outermost bin inward.
inline Proposal<MassDensityVector> propose_rho(const MassDensityVector& current, std::span<const double> var, Rng& rng) {
    const auto d = rho_increments(current);
    if (var.size() != d.size()) throw std::invalid_argument("propose_rho: scale vector has wrong size");
    std::vector<double> nd(d.size()), rho(d.size());
    for (std::size_t h = 0; h < d.size(); ++h) nd[h] = folded_normal::sample(d[h], std::sqrt(var[h]), rng);
    double acc = 0.0;
    for (std::size_t h = d.size(); h-- > 0;) {
        acc += nd[h];
        rho[h] = acc;
    }
    return {MassDensityVector(std::move(rho)), folded_log_ratio(d, nd, var)};
}

/**
 * Folded-normal moves on the f increments downward from the pinned top bin.
 * Values below 0 are clamped so the result is always a valid vector, and the
 * proposal is then marked out of support.
 */
inline Proposal<PhaseDensityVector> propose_f(const PhaseDensityVector& current, std::span<const double> var, Rng& rng) {
    const auto d = f_increments(current);
    if (var.size() != d.size()) throw std::invalid_argument("propose_f: scale vector has wrong size");
    const std::size_t n = current.size();
    std::vector<double> raw(n), nd(d.size());
    raw[n - 1] = 1.0;
    for (std::size_t j = n - 1; j-- > 0;) {
        nd[j] = folded_normal::sample(d[j], std::sqrt(var[j]), rng);
        raw[j] = raw[j + 1] - nd[j];
    }
    const bool inside = raw[0] >= 0.0;
    std::vector<double> f(raw);
    for (double& x : f) x = std::max(0.0, x);
    return {PhaseDensityVector(std::move(f)), folded_log_ratio(d, nd, var), inside};
}

/// Metropolis acceptance on a log ratio; always consumes one uniform.
inline bool metropolis_accept(double log_alpha, Rng& rng) {
    const double u = rng.uniform();
    if (std::isnan(log_alpha)) return false;
    return log_alpha >= 0.0 || u < std::exp(log_alpha);
}

/**
 * Streaming per-coordinate mean and variance (Welford).
 */
class RunningVariance {
public:
    explicit RunningVariance(std::size_t dim = 0) : mean_(dim, 0.0), m2_(dim, 0.0) {}

    void push(std::span<const double> x) {
        if (x.size() != mean_.size()) throw std::invalid_argument("RunningVariance: dimension mismatch");
        ++count_;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double delta = x[i] - mean_[i];
            mean_[i] += delta / static_cast<double>(count_);
            m2_[i] += delta * (x[i] - mean_[i]);
        }
    }

    std::size_t count() const { return count_; }
    std::size_t dim() const { return mean_.size(); }
    const std::vector<double>& mean() const { return mean_; }

    /// Unbiased (n - 1) variance per coordinate.
    std::vector<double> variance() const {
        if (count_ < 2) throw std::invalid_argument("RunningVariance: need at least two samples");
        std::vector<double> v(m2_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(0.0, m2_[i] / static_cast<double>(count_ - 1));
        return v;
    }

private:
    std::size_t count_ = 0;
    std::vector<double> mean_, m2_;
};

/// Empirical variance of each increment over the adaptation window, floored.
inline std::vector<double> adapt_scales(const RunningVariance& history, std::span<const double> floor) {
    auto v = history.variance();
    if (floor.size() != v.size()) throw std::invalid_argument("adapt_scales: floor has wrong size");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i], floor[i]);
    return v;
}

inline std::vector<double> adapt_scales(const RunningVariance& history, double floor) {
    return adapt_scales(history, std::vector<double>(history.dim(), floor));
}

struct ProposalScales {
    std::vector<double> rho_var;
    std::vector<double> f_var;
};

enum class UpdateSchedule { alternate, joint };

struct ChainConfig {
    long n_steps = 20000;
    long t0 = 2000;
    long burn_in = 5000;
    std::uint64_t seed = 1;
    SeedProfile seed_profile;
    UpdateSchedule schedule = UpdateSchedule::alternate;
    /// Starting proposal sd as a fraction of each seed increment's cumulative value (rho) or absolute (f).
    double initial_rho_fraction = 0.05;
    double initial_f_sd = 0.05;
    /// Adapted s^2 = multiplier * empirical variance; <= 0 selects 2.38^2 / block dimension.
    double scale_multiplier = 0.0;
    /// Variance floor relative to the squared seed scale.
    double floor_fraction = 1e-12;

    static ChainConfig with_steps(long n, std::uint64_t seed = 1) {
        ChainConfig c;
        c.n_steps = n;
        c.t0 = std::max(1L, n / 10);
        c.burn_in = n / 4;
        c.seed = seed;
        return c;
    }

    void validate() const {
        if (!(t0 > 0 && t0 < n_steps)) throw std::invalid_argument("ChainConfig: need 0 < t0 < n_steps");
        if (!(burn_in >= 0 && burn_in < n_steps)) throw std::invalid_argument("ChainConfig: need 0 <= burn_in < n_steps");
        if (!(initial_rho_fraction > 0.0) || !(initial_f_sd > 0.0))
            throw std::invalid_argument("ChainConfig: initial proposal scales must be positive");
        if (!(floor_fraction > 0.0)) throw std::invalid_argument("ChainConfig: floor_fraction must be positive");
        seed_profile.validate();
    }
};

/// Post-burn-in record of a chain.
struct ChainTrace {
    std::vector<ModelState> states;
    std::vector<double> log_posts;
    std::vector<long> steps;
    double acceptance_rate = 0.0;
    double rho_acceptance_rate = 0.0;
    double f_acceptance_rate = 0.0;

    std::size_t size() const { return states.size(); }
    bool empty() const { return states.empty(); }

    /// Append with invariant checks: prior-box membership and a finite log-posterior.
    void push(const ModelState& s, double log_post, long step, const PriorSpec& prior) {
        if (!prior.contains(s.rho)) throw std::logic_error("ChainTrace: state outside prior box");
        if (!std::isfinite(log_post)) throw std::logic_error("ChainTrace: non-finite log-posterior recorded");
        states.push_back(s);
        log_posts.push_back(log_post);
        steps.push_back(step);
    }
};

/// Independent random sub-streams of one chain.
struct ChainStreams {
    Rng rho, f, accept;
    explicit ChainStreams(std::uint64_t seed) : rho(seed, 1), f(seed, 2), accept(seed, 3) {}
};

struct ChainPosition {
    ModelState state;
    DensityContext ctx;
    double log_post;

    static ChainPosition start(const PosteriorModel& model, ModelState s) {
        auto ctx = model.prepare(s.rho);
        const double lp = model.log_posterior(s.f, s.rho, ctx);
        return {std::move(s), std::move(ctx), lp};
    }
};

enum class UpdateBlock { rho, f, joint };

struct StepOutcome {
    bool accepted;
    double log_post;
};

/**
 * One Metropolis-Hastings update of `pos` on the given block. Proposals
 * outside the prior box are rejected without touching the likelihood.
 */
inline StepOutcome mh_step(const PosteriorModel& model, ChainPosition& pos, UpdateBlock block,
                           const ProposalScales& scales, ChainStreams& rng) {
    const bool move_rho = block != UpdateBlock::f;
    const bool move_f = block != UpdateBlock::rho;

    std::optional<Proposal<MassDensityVector>> pr;
    std::optional<Proposal<PhaseDensityVector>> pf;
    if (move_rho) pr.emplace(propose_rho(pos.state.rho, scales.rho_var, rng.rho));
    if (move_f) pf.emplace(propose_f(pos.state.f, scales.f_var, rng.f));

    const MassDensityVector& rho = pr ? pr->value : pos.state.rho;
    const PhaseDensityVector& f = pf ? pf->value : pos.state.f;
    const double log_q = (pr ? pr->log_q_ratio : 0.0) + (pf ? pf->log_q_ratio : 0.0);

    if ((pf && !pf->in_support) || model.log_prior(rho) == kNegInf) {
        rng.accept.uniform();
        return {false, pos.log_post};
    }
    DensityContext fresh;
    if (pr) fresh = model.prepare(rho);
    const DensityContext& ctx = pr ? fresh : pos.ctx;
    const double lp = model.log_posterior(f, rho, ctx);

    double log_alpha;
    if (lp == kNegInf) log_alpha = kNegInf;
    else if (pos.log_post == kNegInf) log_alpha = 0.0;
    else log_alpha = lp - pos.log_post + log_q;

    if (!metropolis_accept(log_alpha, rng.accept)) return {false, pos.log_post};
    if (pr) {
        pos.state.rho = std::move(pr->value);
        pos.ctx = std::move(fresh);
    }
    if (pf) pos.state.f = std::move(pf->value);
    pos.log_post = lp;
    return {true, lp};
}

/// Initial proposal variances from a seed state.
inline ProposalScales initial_scales(const ModelState& seed, const ChainConfig& cfg) {
    ProposalScales s;
    for (double r : seed.rho.values()) s.rho_var.push_back(std::pow(cfg.initial_rho_fraction * r, 2));
    s.f_var.assign(seed.f.size() - 1, cfg.initial_f_sd * cfg.initial_f_sd);
    return s;
}

/**
 * Adaptive random-walk Metropolis-Hastings over (f, rho). Proposal
 * variances follow the empirical variance of each increment over the
 * states visited since step t0.
 */
inline ChainTrace run_chain(const PosteriorModel& model, const ChainConfig& cfg,
                            const std::optional<ModelState>& start = std::nullopt) {
    cfg.validate();
    const RadialGrid& rg = model.rgrid();
    const EnergyGrid& eg = model.egrid();
    ModelState seed = start ? *start
                            : ModelState(seed_phase_density(cfg.seed_profile, eg),
                                         seed_profile(cfg.seed_profile, rg, model.prior()), rg, eg);
    if (!model.prior().contains(seed.rho)) throw std::invalid_argument("run_chain: starting state outside prior box");

    ChainStreams rng(cfg.seed);
    ProposalScales scales = initial_scales(seed, cfg);
    const double rho_scale = seed.rho[0];
    const std::vector<double> rho_floor(rg.n_x(), cfg.floor_fraction * rho_scale * rho_scale);
    const std::vector<double> f_floor(eg.n_e() - 1, cfg.floor_fraction);
    const double mult_rho = cfg.scale_multiplier > 0.0 ? cfg.scale_multiplier : 2.38 * 2.38 / rg.n_x();
    const double mult_f = cfg.scale_multiplier > 0.0 ? cfg.scale_multiplier : 2.38 * 2.38 / std::max(1, eg.n_e() - 1);

    RunningVariance rho_hist(rg.n_x()), f_hist(eg.n_e() - 1);
    ChainPosition pos = ChainPosition::start(model, std::move(seed));

    ChainTrace trace;
    long accepted = 0, rho_tries = 0, rho_acc = 0, f_tries = 0, f_acc = 0;
    for (long t = 0; t < cfg.n_steps; ++t) {
        if (t > cfg.t0 + 1) {
            scales.rho_var = adapt_scales(rho_hist, rho_floor);
            for (double& v : scales.rho_var) v = std::max(v * mult_rho, rho_floor[0]);
            if (f_hist.dim() > 0) {
                scales.f_var = adapt_scales(f_hist, f_floor);
                for (double& v : scales.f_var) v = std::max(v * mult_f, f_floor[0]);
            }
        }
        UpdateBlock block = UpdateBlock::joint;
        if (cfg.schedule == UpdateSchedule::alternate) block = (t % 2 == 0) ? UpdateBlock::rho : UpdateBlock::f;
        const auto out = mh_step(model, pos, block, scales, rng);
        if (out.accepted) ++accepted;
        if (block != UpdateBlock::f) {
            ++rho_tries;
            rho_acc += out.accepted;
        }
        if (block != UpdateBlock::rho) {
            ++f_tries;
            f_acc += out.accepted;
        }
        if (t >= cfg.t0) {
            rho_hist.push(rho_increments(pos.state.rho));
            if (f_hist.dim() > 0) f_hist.push(f_increments(pos.state.f));
        }
        if (t >= cfg.burn_in && pos.log_post != kNegInf) trace.push(pos.state, pos.log_post, t, model.prior());
    }
    trace.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.n_steps);
    trace.rho_acceptance_rate = rho_tries ? static_cast<double>(rho_acc) / rho_tries : 0.0;
    trace.f_acceptance_rate = f_tries ? static_cast<double>(f_acc) / f_tries : 0.0;
    return trace;
}

inline ChainTrace run_chain(const Dataset& data, const PriorSpec& prior, const RadialGrid& rgrid,
                            const EnergyGrid& egrid, const ChainConfig& cfg) {
    return run_chain(PosteriorModel(data, prior, rgrid, egrid), cfg);
}

struct HpdInterval {
    double lo;
    double hi;
    double mass;
};

/// Shortest interval holding ceil(mass * n) of the sorted samples; ties go to the lower start.
inline HpdInterval hpd(std::span<const double> samples, double mass = 0.95) {
    if (samples.size() < 100) throw DomainError("hpd: need at least 100 samples");
    if (!(mass > 0.0 && mass <= 1.0)) throw std::invalid_argument("hpd: mass must lie in (0, 1]");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    const std::size_t k = std::min(n, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9)));
    std::size_t best = 0;
    double width = x[k - 1] - x[0];
    for (std::size_t i = 1; i + k <= n; ++i) {
        const double w = x[i + k - 1] - x[i];
        if (w < width) {
            width = w;
            best = i;
        }
    }
    return {x[best], x[best + k - 1], mass};
}

/// Trace state with the largest recorded log-posterior (first one on ties).
inline std::size_t modal_index(const ChainTrace& trace) {
    if (trace.empty()) throw DomainError("modal_state: empty trace");
    std::size_t best = 0;
    for (std::size_t i = 1; i < trace.size(); ++i)
        if (trace.log_posts[i] > trace.log_posts[best]) best = i;
    return best;
}

inline ModelState modal_state(const ChainTrace& trace) { return trace.states[modal_index(trace)]; }

/// Mode and HPD of one parameter across a trace.
struct ParameterSummary {
    std::string name;
    double mode;
    HpdInterval interval;
};

/// f_1..f_NE then rho_1..rho_Nx.
inline std::vector<ParameterSummary> summarize(const ChainTrace& trace, double mass = 0.95) {
    const ModelState mode = modal_state(trace);
    std::vector<ParameterSummary> out;
    std::vector<double> col(trace.size());
    for (std::size_t j = 0; j < mode.f.size(); ++j) {
        for (std::size_t i = 0; i < trace.size(); ++i) col[i] = trace.states[i].f[j];
        out.push_back({"f_" + std::to_string(j + 1), mode.f[j], hpd(col, mass)});
    }
    for (std::size_t h = 0; h < mode.rho.size(); ++h) {
        for (std::size_t i = 0; i < trace.size(); ++i) col[i] = trace.states[i].rho[h];
        out.push_back({"rho_" + std::to_string(h + 1), mode.rho[h], hpd(col, mass)});
    }
    return out;
}

}  // namespace isodyn
