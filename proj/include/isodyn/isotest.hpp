#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "isodyn/grid.hpp"
#include "isodyn/sampler.hpp"

namespace isodyn {

/// Outcome of the isotropy test on one dataset.
struct TestReport {
    ModelState theta_star;
    double log_post_star;
    std::size_t a_count;
    std::size_t b_count;
    double support;
};

struct ThetaStar {
    ModelState state;
    double log_post;
};

/// Posterior-maximizing state of the chain run on null-generated data.
inline ThetaStar find_theta_star(const ChainTrace& trace_gen) {
    if (trace_gen.empty()) throw DomainError("find_theta_star: empty trace");
    const std::size_t i = modal_index(trace_gen);
    return {trace_gen.states[i], trace_gen.log_posts[i]};
}

/// Number of values strictly above the threshold; equality counts toward the null.
inline std::size_t count_exceeding(std::span<const double> log_posts, double threshold) {
    std::size_t b = 0;
    for (double lp : log_posts) b += lp > threshold;
    return b;
}

/// 1 - B/A with A the trace length and B the states whose log-posterior exceeds log_post_star.
inline double support_fraction(std::span<const double> log_posts, double log_post_star) {
    if (log_posts.empty()) throw DomainError("support: empty trace");
    const std::size_t b = count_exceeding(log_posts, log_post_star);
    return 1.0 - static_cast<double>(b) / static_cast<double>(log_posts.size());
}

inline TestReport support(const ChainTrace& trace_data, const ThetaStar& star) {
    if (trace_data.empty()) throw DomainError("support: empty trace");
    const std::size_t a = trace_data.size();
    const std::size_t b = count_exceeding(trace_data.log_posts, star.log_post);
    return {star.state, star.log_post, a, b, 1.0 - static_cast<double>(b) / static_cast<double>(a)};
}

/// log posterior relative to a reference density; a uniform reference only shifts it by a constant.
inline double surprise(double log_post, double log_reference) { return log_post - log_reference; }

}  // namespace isodyn
