#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace ccvl::detail {

struct PenalizedSolution {
    std::vector<double> values;
    // True where the maximizing policy puts at least the behavior mass on the
    // action (the penalized branch, whose weight uses delta1 = delta).
    std::vector<char> penalized;
};

/// Solves, for one state, the inner policy maximization of the regularized
/// backup: v(a) = t(a) - c(a) * (pi(a) - beta(a)) with pi the maximizer of
/// sum_a pi(a) v(a) over the simplex. c(a) switches between c_p(a) (pi above
/// beta) and c_b(a) (pi below beta). The maximizer equalizes the values of all
/// actions it supports at a common level m; off-support actions keep
/// t(a) + c_b(a)*beta(a) <= m. An iterated hard argmax has no fixed point once
/// an action gap falls below the penalty scale, so the equalized solution is
/// computed directly; it is exact and piecewise linear in the targets.
inline PenalizedSolution penalized_equilibrium(std::span<const double> t,
                                               std::span<const double> beta,
                                               std::span<const double> c_p,
                                               std::span<const double> c_b) {
    const int num_actions = static_cast<int>(t.size());
    PenalizedSolution out;
    out.values.resize(num_actions);
    out.penalized.assign(num_actions, 0);

    std::vector<double> bps;
    bps.reserve(2 * num_actions);
    for (int a = 0; a < num_actions; ++a) {
        bps.push_back(t[a]);
        bps.push_back(t[a] + c_b[a] * beta[a]);
    }
    std::sort(bps.begin(), bps.end());

    auto total_mass = [&](double m) {
        double sum = 0.0;
        for (int a = 0; a < num_actions; ++a) {
            if (m <= t[a]) {
                sum += beta[a] + (t[a] - m) / c_p[a];
            } else {
                double pi = beta[a] + (t[a] - m) / c_b[a];
                if (pi > 0.0) sum += pi;
            }
        }
        return sum;
    };

    // First breakpoint where mass dips below 1; mass is 0 past the last one.
    int idx = 0;
    while (idx < static_cast<int>(bps.size()) && total_mass(bps[idx]) >= 1.0) ++idx;

    const double probe = idx == 0 ? bps.front() - 1.0 : 0.5 * (bps[idx - 1] + bps[idx]);
    double c0 = 0.0, c1 = 0.0;
    for (int a = 0; a < num_actions; ++a) {
        if (probe <= t[a]) {
            c0 += beta[a] + t[a] / c_p[a];
            c1 += 1.0 / c_p[a];
        } else if (probe < t[a] + c_b[a] * beta[a]) {
            c0 += beta[a] + t[a] / c_b[a];
            c1 += 1.0 / c_b[a];
        }
    }
    double m = (c0 - 1.0) / c1;
    if (idx > 0) m = std::max(m, bps[idx - 1]);
    m = std::min(m, bps[idx]);

    for (int a = 0; a < num_actions; ++a) {
        out.values[a] = std::min(m, t[a] + c_b[a] * beta[a]);
        out.penalized[a] = m <= t[a] + 1e-12;
    }
    return out;
}

/// Direct evaluation with a fixed policy pi (the Softmax mode): each action
/// takes the branch matching the sign of pi(a) - beta(a).
inline PenalizedSolution penalized_with_policy(std::span<const double> t,
                                               std::span<const double> beta,
                                               std::span<const double> pi,
                                               std::span<const double> c_p,
                                               std::span<const double> c_b) {
    const int num_actions = static_cast<int>(t.size());
    PenalizedSolution out;
    out.values.resize(num_actions);
    out.penalized.assign(num_actions, 0);
    for (int a = 0; a < num_actions; ++a) {
        const double excess = pi[a] - beta[a];
        const double c = excess >= 0.0 ? c_p[a] : c_b[a];
        out.values[a] = t[a] - c * excess;
        out.penalized[a] = excess >= 0.0;
    }
    return out;
}

/// Exact maximizer of sum_a pi(a) t(a) - sum_a P_a(pi(a)) + tau * H(pi) over
/// the simplex, where P_a is the piecewise-quadratic penalty with slopes
/// c_p / c_b around beta. Stationarity per action:
///   tau * log pi(a) + c(pi(a)) * (pi(a) - beta(a)) = t(a) - tau - mu,
/// with mu the simplex multiplier. The left side is strictly increasing in
/// pi, and pi(mu) is decreasing, so two nested monotone solves recover the
/// unique optimum. tau > 0 keeps value orderings strict where the tau -> 0
/// limit would tie actions exactly.
inline std::vector<double> entropy_equilibrium_policy(std::span<const double> t,
                                                      std::span<const double> beta,
                                                      std::span<const double> c_p,
                                                      std::span<const double> c_b, double tau) {
    const int num_actions = static_cast<int>(t.size());

    // log pi solving tau*xi + c(e^xi)*(e^xi - beta) = rhs, safeguarded Newton.
    auto solve_log_pi = [&](int a, double rhs) {
        double lo = -745.0, hi = 40.0;
        auto h = [&](double xi) {
            const double pi = std::exp(xi);
            const double c = pi >= beta[a] ? c_p[a] : c_b[a];
            return tau * xi + c * (pi - beta[a]) - rhs;
        };
        double xi = std::min(hi, std::max(lo, rhs / tau));
        for (int it = 0; it < 80; ++it) {
            const double val = h(xi);
            if (val > 0.0)
                hi = xi;
            else
                lo = xi;
            const double pi = std::exp(xi);
            const double c = pi >= beta[a] ? c_p[a] : c_b[a];
            const double deriv = tau + c * pi;
            double next = xi - val / deriv;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - xi) < 1e-15 * std::max(1.0, std::abs(xi))) {
                xi = next;
                break;
            }
            xi = next;
        }
        return xi;
    };

    auto mass = [&](double mu) {
        double sum = 0.0;
        for (int a = 0; a < num_actions; ++a)
            sum += std::exp(solve_log_pi(a, t[a] - tau - mu));
        return sum;
    };

    // Bracket the multiplier, then bisect; mass(mu) is strictly decreasing.
    double mu_lo = t[0], mu_hi = t[0];
    for (int a = 0; a < num_actions; ++a) {
        mu_lo = std::min(mu_lo, t[a] - tau - c_p[a] * (1.0 - beta[a]) - 1.0);
        mu_hi = std::max(mu_hi, t[a] + tau * 50.0 + 1.0);
    }
    while (mass(mu_lo) < 1.0) mu_lo -= std::max(1.0, std::abs(mu_lo));
    while (mass(mu_hi) > 1.0) mu_hi += std::max(1.0, std::abs(mu_hi));
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (mu_lo + mu_hi);
        if (mass(mid) >= 1.0)
            mu_lo = mid;
        else
            mu_hi = mid;
        if (mu_hi - mu_lo < 1e-14 * std::max(1.0, std::abs(mu_lo))) break;
    }
    const double mu = 0.5 * (mu_lo + mu_hi);

    std::vector<double> pi(num_actions);
    double total = 0.0;
    for (int a = 0; a < num_actions; ++a) {
        pi[a] = std::exp(solve_log_pi(a, t[a] - tau - mu));
        total += pi[a];
    }
    for (double& p : pi) p /= total;
    return pi;
}

inline std::vector<double> softmax_policy(std::span<const double> q, double temperature) {
    std::vector<double> pi(q.size());
    double best = -std::numeric_limits<double>::infinity();
    for (double v : q) best = std::max(best, v);
    double total = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) {
        pi[a] = std::exp((q[a] - best) / temperature);
        total += pi[a];
    }
    for (double& p : pi) p /= total;
    return pi;
}

}  // namespace ccvl::detail
