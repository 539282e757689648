#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "octopus/frontier.hpp"

namespace octopus {

/// Regularized incomplete beta: CDF of Beta(a, b) at x.
inline double beta_cdf(double x, double a, double b) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return boost::math::ibeta(a, b, x);
}

/// One-parameter Beta family member: (lambda1, lambda2) = (lambda*nu_bar, lambda*(1-nu_bar)),
/// so the mean is nu_bar by construction and lambda controls the spread.
struct BetaFit {
    double lambda = 1.0;
    double nu_bar = 0.5;
    double residual = 0.0;  // |theta_hat(lambda) - theta| at the optimum
    bool feasible = true;   // false when the (nu_bar, theta) pair is unreachable

    double lambda1() const { return lambda * nu_bar; }
    double lambda2() const { return lambda * (1.0 - nu_bar); }

    double cdf(double x) const { return beta_cdf(x, lambda1(), lambda2()); }
};

/// Counts of tasks per equal-width nu bin over [0,1].
struct BatchHistogram {
    std::vector<long> counts;
    int total() const { return static_cast<int>(std::accumulate(counts.begin(), counts.end(), 0L)); }
    int bins() const { return static_cast<int>(counts.size()); }
    double bin_center(int i) const { return (i + 0.5) / counts.size(); }

    double mean_nu() const {
        long n = 0;
        double s = 0.0;
        for (int i = 0; i < bins(); ++i) {
            n += counts[i];
            s += counts[i] * bin_center(i);
        }
        return n > 0 ? s / n : 0.0;
    }
};

struct LambdaSearch {
    double lo = 0.1;
    double hi = 200.0;
    double step = 0.1;
    double delta_theta = 10.0;  // theta-grid granularity; feasibility uses 0.5 * this
};

namespace detail {

/// Per-bin masses of Beta(lambda*nu, lambda*(1-nu)) over a regular grid.
inline std::vector<double> beta_bin_masses(double lambda, double nu, int bins) {
    const double a = lambda * nu, b = lambda * (1.0 - nu);
    std::vector<double> mass(bins);
    double cdf_lo = 0.0;
    for (int i = 0; i < bins; ++i) {
        double cdf_hi = (i == bins - 1) ? 1.0 : beta_cdf(static_cast<double>(i + 1) / bins, a, b);
        mass[i] = cdf_hi - cdf_lo;
        cdf_lo = cdf_hi;
    }
    return mass;
}

inline double bin_center_mean(const std::vector<double>& mass) {
    double m = 0.0;
    const int bins = static_cast<int>(mass.size());
    for (int i = 0; i < bins; ++i) m += mass[i] * (i + 0.5) / bins;
    return m;
}

/// Masses whose *bin-center* mean equals nu_bar. The center-based mean of a
/// skewed Beta is biased toward 0.5 against its continuous mean, so the raw
/// parameterization would not round-trip through a histogram; bisect on the
/// location parameter to remove the bias.
inline std::vector<double> corrected_beta_masses(double lambda, double nu_bar, int bins) {
    std::vector<double> mass = beta_bin_masses(lambda, nu_bar, bins);
    if (std::abs(bin_center_mean(mass) - nu_bar) <= 1e-9) return mass;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        mass = beta_bin_masses(lambda, std::clamp(mid, 1e-9, 1.0 - 1e-9), bins);
        if (bin_center_mean(mass) < nu_bar)
            lo = mid;
        else
            hi = mid;
    }
    return mass;
}

}  // namespace detail

/// theta_hat(lambda) = n * integral of theta~(., c) against beta_lambda(nu_bar).
/// Exact under the table's piecewise-constant convention: the integral reduces
/// to Beta CDF masses of the grid cells. Masses use the binned-mean
/// parameterization (see corrected_beta_masses) so the estimate is consistent
/// with histograms produced by reconstruct_histogram.
inline double expected_theta(double lambda, double nu_bar, int pay_idx, const ThetaTable& table,
                             int n) {
    if (!(lambda > 0.0)) throw std::invalid_argument("expected_theta: lambda must be > 0");
    if (!(nu_bar > 0.0 && nu_bar < 1.0))
        throw std::invalid_argument("expected_theta: nu_bar must lie in (0,1); clamp degenerate means first");
    const int g = table.resolution();
    std::vector<double> mass = detail::corrected_beta_masses(lambda, nu_bar, g);
    double s = 0.0;
    for (int j = 0; j < g; ++j) s += table.at(j, pay_idx) * mass[j];
    // cell [ (g-1)/g, 1 ) uses the value at (g-1)/g; the point nu = 1 has zero mass
    return n * s;
}

/// Linear search for the lambda whose implied batch theta matches the observed
/// aggregate. Ties go to the smallest lambda. A residual above 0.5 * delta_theta
/// marks the aggregate pair unreachable (used for state-space pruning).
inline BetaFit fit_lambda(double nu_bar, double theta, int pay_idx, const ThetaTable& table, int n,
                          const LambdaSearch& search = {}) {
    if (!(theta >= 0.0)) throw std::invalid_argument("fit_lambda: theta must be >= 0");
    if (n < 1) throw std::invalid_argument("fit_lambda: n must be >= 1");
    // Degenerate point-mass batches carry no spread information; clamp the mean.
    const double lo_clamp = 1.0 / (2.0 * n);
    const double nu = std::clamp(nu_bar, lo_clamp, 1.0 - lo_clamp);

    BetaFit best;
    best.nu_bar = nu;
    double best_res = std::numeric_limits<double>::infinity();
    const int steps = static_cast<int>(std::llround((search.hi - search.lo) / search.step));
    for (int i = 0; i <= steps; ++i) {
        double lam = search.lo + i * search.step;
        double res = std::abs(expected_theta(lam, nu, pay_idx, table, n) - theta);
        if (res < best_res - 1e-12) {
            best_res = res;
            best.lambda = lam;
        }
    }
    best.residual = best_res;
    best.feasible = best_res <= 0.5 * search.delta_theta;
    return best;
}

/// Bins n tasks into the fitted Beta: per-bin CDF masses apportioned to
/// integers by largest remainder, conserving n exactly.
inline BatchHistogram reconstruct_histogram(const BetaFit& fit, int n, int bins) {
    if (bins < 1) throw std::invalid_argument("reconstruct_histogram: bins must be >= 1");
    if (n < 0) throw std::invalid_argument("reconstruct_histogram: n must be >= 0");
    BatchHistogram h;
    h.counts.assign(bins, 0);
    if (n == 0) return h;

    // Same binned-mean parameterization as expected_theta, so that
    // aggregate -> fit -> reconstruct round trips are fixed points.
    std::vector<double> mass = detail::corrected_beta_masses(fit.lambda, fit.nu_bar, bins);
    std::vector<double> exact(bins);
    for (int i = 0; i < bins; ++i) exact[i] = n * mass[i];
    long assigned = 0;
    std::vector<std::pair<double, int>> rem(bins);
    for (int i = 0; i < bins; ++i) {
        h.counts[i] = static_cast<long>(std::floor(exact[i]));
        assigned += h.counts[i];
        rem[i] = {exact[i] - std::floor(exact[i]), i};
    }
    // Largest remainders first; lowest index breaks ties for determinism.
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (long i = 0; i < n - assigned; ++i) ++h.counts[rem[i % bins].second];
    return h;
}

}  // namespace octopus
