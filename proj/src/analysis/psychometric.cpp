#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "crowding/analysis.hpp"

namespace crowding {

namespace {

double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double phi_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846); }

constexpr int kMaxIterations = 500;
constexpr double kStepTolerance = 1e-8;

struct Box {
    double mu_lo, mu_hi, sigma_lo;
};

// Parameters are [mu, sigma, ceiling, floor]; the floor is dropped from the
// solve when fixed.
using Params = std::array<double, 4>;

void project(Params& p, const Box& box, bool floor_fixed) {
    p[0] = std::clamp(p[0], box.mu_lo, box.mu_hi);
    p[1] = std::max(p[1], box.sigma_lo);
    p[2] = std::clamp(p[2], 0.0, 1.0);
    if (!floor_fixed) p[3] = std::clamp(p[3], 0.0, 1.0);
    if (p[3] > p[2]) {
        if (floor_fixed)
            p[2] = p[3];
        else
            p[3] = p[2];
    }
}

double cost(const Params& p, std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = psychometric(x[i], p[0], p[1], p[3], p[2]) - y[i];
        s += r * r;
    }
    return s;
}

struct Outcome {
    Params p;
    double cost;
    int iterations;
    bool converged;
};

Outcome levenberg_marquardt(Params p, std::span<const double> x, std::span<const double> y, const Box& box,
                            bool floor_fixed) {
    const int k = floor_fixed ? 3 : 4;
    const auto n = static_cast<Eigen::Index>(x.size());
    project(p, box, floor_fixed);
    double c = cost(p, x, y);
    double damping = 1e-3;
    Eigen::MatrixXd J(n, k);
    Eigen::VectorXd r(n);

    for (int it = 1; it <= kMaxIterations; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = (x[static_cast<std::size_t>(i)] - p[0]) / p[1];
            const double cdf = phi_cdf(z), pdf = phi_pdf(z);
            const double amp = p[2] - p[3];
            r(i) = p[3] + amp * cdf - y[static_cast<std::size_t>(i)];
            J(i, 0) = -amp * pdf / p[1];
            J(i, 1) = -amp * pdf * z / p[1];
            J(i, 2) = cdf;
            if (!floor_fixed) J(i, 3) = 1.0 - cdf;
        }
        Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;

        // Parameters pinned at a bound with the descent direction pointing out
        // of the box are held fixed for this step; otherwise projection undoes
        // most of every step and the solve crawls along the boundary.
        const std::array<double, 4> lo{box.mu_lo, box.sigma_lo, 0.0, 0.0};
        const std::array<double, 4> hi{box.mu_hi, std::numeric_limits<double>::infinity(), 1.0, 1.0};
        for (int d = 0; d < k; ++d) {
            const auto u = static_cast<std::size_t>(d);
            const bool at_lo = p[u] <= lo[u] + 1e-12 && g(d) > 0.0;
            const bool at_hi = p[u] >= hi[u] - 1e-12 && g(d) < 0.0;
            if (at_lo || at_hi) {
                JtJ.row(d).setZero();
                JtJ.col(d).setZero();
                JtJ(d, d) = 1.0;
                g(d) = 0.0;
            }
        }

        // Raise the damping until a step lowers the cost or becomes negligible.
        while (true) {
            Eigen::MatrixXd A = JtJ;
            for (int d = 0; d < k; ++d) A(d, d) += damping * std::max(JtJ(d, d), 1e-12);
            const Eigen::VectorXd delta = A.ldlt().solve(-g);
            Params trial = p;
            for (int d = 0; d < k; ++d) trial[static_cast<std::size_t>(d)] += delta(d);
            project(trial, box, floor_fixed);
            double change = 0.0;
            for (int d = 0; d < 4; ++d)
                change = std::max(change, std::abs(trial[static_cast<std::size_t>(d)] - p[static_cast<std::size_t>(d)]) /
                                              (1.0 + std::abs(p[static_cast<std::size_t>(d)])));
            if (!std::isfinite(change)) return {p, c, it, false};
            if (change < kStepTolerance) return {p, c, it, true};
            const double tc = cost(trial, x, y);
            if (tc < c) {
                p = trial;
                c = tc;
                damping = std::max(damping / 3.0, 1e-12);
                break;
            }
            damping *= 4.0;
            if (damping > 1e16) return {p, c, it, true};  // stationary within the box
        }
    }
    return {p, c, kMaxIterations, false};
}

}  // namespace

double psychometric(double distance, double mu, double sigma, double floor, double ceiling) {
    return floor + (ceiling - floor) * phi_cdf((distance - mu) / sigma);
}

double PsychometricFit::operator()(double distance) const { return psychometric(distance, mu, sigma, floor, ceiling); }

PsychometricFit fit_psychometric(std::span<const double> distances, std::span<const double> accuracies,
                                 bool fix_floor_to_chance) {
    if (distances.size() != accuracies.size()) throw DataError("distances and accuracies differ in length");
    const std::size_t need = fix_floor_to_chance ? 3 : 4;
    if (distances.size() < need)
        throw DataError("psychometric fit needs at least " + std::to_string(need) + " points, got " +
                        std::to_string(distances.size()));
    for (std::size_t i = 0; i < distances.size(); ++i)
        if (!std::isfinite(distances[i]) || !std::isfinite(accuracies[i])) throw DataError("psychometric data is not finite");
    const auto [xlo, xhi] = std::minmax_element(distances.begin(), distances.end());
    const auto [ylo, yhi] = std::minmax_element(accuracies.begin(), accuracies.end());
    const double range = *xhi - *xlo;
    if (!(range > 0.0)) throw DataError("psychometric fit needs at least two distinct distances");
    if (!(*yhi - *ylo > 1e-12)) throw DataError("psychometric fit is degenerate: accuracy is constant");

    const Box box{*xlo - 2.0 * range, *xhi + 2.0 * range, 1e-3 * range};
    const double floor0 = fix_floor_to_chance ? kChanceLevel : std::clamp(*ylo, 0.0, 1.0);
    const double ceiling0 = std::clamp(*yhi, floor0, 1.0);

    std::optional<Outcome> best;
    int total_iterations = 0;
    for (double mf : {0.1, 0.5, 0.9})
        for (double sf : {0.1, 0.4}) {
            const Params start{*xlo + mf * range, sf * range, ceiling0, floor0};
            const Outcome o = levenberg_marquardt(start, distances, accuracies, box, fix_floor_to_chance);
            total_iterations += o.iterations;
            if (o.converged && (!best || o.cost < best->cost)) best = o;
        }
    if (!best) throw DataError("psychometric fit did not converge from any starting point");

    PsychometricFit fit;
    fit.mu = best->p[0];
    fit.sigma = best->p[1];
    fit.ceiling = best->p[2];
    fit.floor = best->p[3];
    fit.residual = best->cost;
    fit.floor_fixed = fix_floor_to_chance;
    fit.iterations = total_iterations;
    return fit;
}

PsychometricFit fit_psychometric(const SpacingCurve& curve, bool fix_floor_to_chance) {
    std::vector<double> x, y;
    for (const auto& p : curve.points) {
        x.push_back(p.distance);
        y.push_back(p.accuracy());
    }
    return fit_psychometric(x, y, fix_floor_to_chance);
}

}  // namespace crowding
