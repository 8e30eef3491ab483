// Copyright 2026 The msgate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * Least-squares fits used to analyse simulated data: parity fringes,
 * Ramsey oscillations, detuning parabolas, thermal population curves and
 * decay envelopes. Linear models go through QR; the few nonlinear
 * parameters are found by a coarse grid followed by golden-section search.
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "msgate/errors.hpp"
#include "msgate/gate_model.hpp"
#include "msgate/hilbert.hpp"
#include "msgate/propagator.hpp"
#include "msgate/thermal.hpp"

namespace msgate {

struct FitResult {
    std::string model;
    std::map<std::string, double> params;
    std::map<std::string, double> std_error;
    double rms_residual = 0.0;
    std::vector<std::string> warnings;

    double operator[](const std::string &key) const { return params.at(key); }
};

namespace detail {

struct LinearSolution {
    Eigen::VectorXd coef;
    Eigen::VectorXd std_error;
    double rss;
};

/// Ordinary least squares y ~ X c with covariance RSS/(m - k) (X^T X)^-1.
inline LinearSolution linear_lsq(const Eigen::MatrixXd &x, const Eigen::VectorXd &y) {
    const Eigen::Index m = x.rows(), k = x.cols();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    LinearSolution s;
    s.coef = qr.solve(y);
    s.rss = (x * s.coef - y).squaredNorm();
    s.std_error = Eigen::VectorXd::Zero(k);
    if (m > k && qr.rank() == k) {
        const Eigen::MatrixXd cov = (x.transpose() * x).inverse() * (s.rss / static_cast<double>(m - k));
        s.std_error = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    }
    return s;
}

/// Minimum of f on [a, b] by golden-section search.
inline double golden_section(const std::function<double(double)> &f, double a, double b, double rel_tol = 1e-12,
                             int max_iter = 300) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < max_iter && (b - a) > rel_tol * (std::abs(a) + std::abs(b)) + 1e-300; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

inline void check_sizes(std::size_t nx, std::size_t ny, std::size_t min_points, const char *what) {
    if (nx != ny) throw InputError(std::string(what) + ": x and y differ in length");
    if (nx < min_points) {
        throw InputError(std::string(what) + ": need at least " + std::to_string(min_points) + " points");
    }
}

inline double rms(double rss, std::size_t m) { return std::sqrt(rss / static_cast<double>(m)); }

}  // namespace detail

/**
 * y = A sin(2 phi + phi0), with A >= 0 and phi0 in (-pi, pi].
 * Needs at least 5 points spanning half a period (pi/2 in phi).
 */
inline FitResult fit_sinusoid(const std::vector<double> &phi, const std::vector<double> &y) {
    detail::check_sizes(phi.size(), y.size(), 5, "fit_sinusoid");
    const auto [lo, hi] = std::minmax_element(phi.begin(), phi.end());
    if (*hi - *lo < 0.5 * kPi - 1e-12) throw InputError("fit_sinusoid: data must span at least pi/2");
    const auto m = static_cast<Eigen::Index>(phi.size());
    Eigen::MatrixXd x(m, 2);
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        x(i, 0) = std::sin(2.0 * phi[i]);
        x(i, 1) = std::cos(2.0 * phi[i]);
        v(i) = y[i];
    }
    const auto s = detail::linear_lsq(x, v);
    if (!s.coef.allFinite()) throw FitError("fit_sinusoid: singular design", std::sqrt(s.rss));
    const double a = s.coef(0), b = s.coef(1);
    const double amp = std::hypot(a, b);
    FitResult r;
    r.model = "sinusoid_2phi";
    r.params["A"] = amp;
    r.params["phi0"] = amp > 0.0 ? std::atan2(b, a) : 0.0;
    r.std_error["A"] = amp > 0.0 ? std::hypot(a * s.std_error(0), b * s.std_error(1)) / amp
                                 : std::max(s.std_error(0), s.std_error(1));
    r.std_error["phi0"] = amp > 0.0 ? std::hypot(b * s.std_error(0), a * s.std_error(1)) / (amp * amp) : kPi;
    r.rms_residual = detail::rms(s.rss, phi.size());
    return r;
}

/**
 * y = c + a cos(w x) + b sin(w x) with unknown w. Reports the period, the
 * frequency in cycles per unit x, the amplitude sqrt(a^2 + b^2), the offset c
 * and the phase atan2(-b, a).
 */
inline FitResult fit_oscillation(const std::vector<double> &x, const std::vector<double> &y) {
    detail::check_sizes(x.size(), y.size(), 6, "fit_oscillation");
    const auto m = static_cast<Eigen::Index>(x.size());
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const double span = *hi - *lo;
    if (!(span > 0.0)) throw InputError("fit_oscillation: x has zero span");
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) v(i) = y[i];

    auto design = [&](double f) {
        Eigen::MatrixXd d(m, 3);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double ph = kTwoPi * f * (x[i] - *lo);
            d(i, 0) = 1.0;
            d(i, 1) = std::cos(ph);
            d(i, 2) = std::sin(ph);
        }
        return d;
    };
    auto rss = [&](double f) { return detail::linear_lsq(design(f), v).rss; };

    const double f_min = 0.25 / span, f_max = 0.5 * static_cast<double>(m - 1) / span;
    const double step = 0.02 / span;
    double best_f = f_min, best = std::numeric_limits<double>::infinity();
    for (double f = f_min; f <= f_max; f += step) {
        const double r = rss(f);
        if (r < best) {
            best = r;
            best_f = f;
        }
    }
    const double f = detail::golden_section(rss, std::max(best_f - step, 0.5 * f_min), best_f + step, 1e-13);
    const auto s = detail::linear_lsq(design(f), v);
    if (!s.coef.allFinite()) throw FitError("fit_oscillation: singular design", std::sqrt(s.rss));

    // Full Jacobian including the frequency for the parameter covariance.
    Eigen::MatrixXd j(m, 4);
    j.leftCols(3) = design(f);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double dx = kTwoPi * (x[i] - *lo);
        j(i, 3) = dx * (-s.coef(1) * std::sin(kTwoPi * f * (x[i] - *lo)) +
                        s.coef(2) * std::cos(kTwoPi * f * (x[i] - *lo)));
    }
    double f_err = 0.0;
    if (m > 4) {
        const Eigen::MatrixXd cov = (j.transpose() * j).inverse() * (s.rss / static_cast<double>(m - 4));
        f_err = std::sqrt(std::max(cov(3, 3), 0.0));
    }

    FitResult r;
    r.model = "oscillation";
    r.params["frequency"] = f;
    r.params["period"] = 1.0 / f;
    r.params["amplitude"] = std::hypot(s.coef(1), s.coef(2));
    r.params["offset"] = s.coef(0);
    r.params["phase"] = std::atan2(-s.coef(2), s.coef(1));
    r.std_error["frequency"] = f_err;
    r.std_error["period"] = f_err / (f * f);
    r.std_error["offset"] = s.std_error(0);
    r.rms_residual = detail::rms(s.rss, x.size());
    if (1.0 / f > span) r.warnings.push_back("fit_oscillation: less than one period covered");
    return r;
}

/**
 * F = F_max + c (x - x0)^2. Warns when the curvature is not negative or the
 * vertex lies outside the data.
 */
inline FitResult fit_quadratic_detuning(const std::vector<double> &detuning, const std::vector<double> &fidelity) {
    detail::check_sizes(detuning.size(), fidelity.size(), 5, "fit_quadratic_detuning");
    const auto m = static_cast<Eigen::Index>(detuning.size());
    const auto [lo, hi] = std::minmax_element(detuning.begin(), detuning.end());
    const double x_mid = 0.5 * (*lo + *hi);
    Eigen::MatrixXd x(m, 3);
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double d = detuning[i] - x_mid;
        x(i, 0) = 1.0;
        x(i, 1) = d;
        x(i, 2) = d * d;
        v(i) = fidelity[i];
    }
    const auto s = detail::linear_lsq(x, v);
    const double a = s.coef(0), b = s.coef(1), c = s.coef(2);
    const double half = 0.5 * (*hi - *lo);
    const double scale = v.cwiseAbs().maxCoeff();
    if (!s.coef.allFinite() || std::abs(c) * half * half <= 1e-12 * scale) {
        throw FitError("fit_quadratic_detuning: no curvature", std::sqrt(s.rss));
    }
    FitResult r;
    r.model = "quadratic";
    r.params["curvature"] = c;
    r.params["center"] = x_mid - b / (2.0 * c);
    r.params["f_max"] = a - b * b / (4.0 * c);
    r.std_error["curvature"] = s.std_error(2);
    r.std_error["center"] = std::hypot(s.std_error(1) / (2.0 * c), b * s.std_error(2) / (2.0 * c * c));
    r.rms_residual = detail::rms(s.rss, detuning.size());
    if (c > 0.0) r.warnings.push_back("fit_quadratic_detuning: upward curvature");
    if (r.params["center"] < *lo || r.params["center"] > *hi) {
        r.warnings.push_back("fit_quadratic_detuning: vertex outside scanned range");
    }
    return r;
}

/// y = a + b x.
inline FitResult fit_linear(const std::vector<double> &x, const std::vector<double> &y) {
    detail::check_sizes(x.size(), y.size(), 3, "fit_linear");
    const auto m = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd d(m, 2);
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        d(i, 0) = 1.0;
        d(i, 1) = x[i];
        v(i) = y[i];
    }
    const auto s = detail::linear_lsq(d, v);
    FitResult r;
    r.model = "linear";
    r.params["intercept"] = s.coef(0);
    r.params["slope"] = s.coef(1);
    r.std_error["intercept"] = s.std_error(0);
    r.std_error["slope"] = s.std_error(1);
    r.rms_residual = detail::rms(s.rss, x.size());
    return r;
}

/// y = A0 exp(-(x / x0)^2).
inline FitResult fit_gaussian_decay(const std::vector<double> &x, const std::vector<double> &y) {
    detail::check_sizes(x.size(), y.size(), 3, "fit_gaussian_decay");
    const double x_scale = std::max(std::abs(*std::max_element(x.begin(), x.end())), 1e-300);
    auto amp_rss = [&](double x0, double &amp) {
        double gy = 0.0, gg = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double g = std::exp(-(x[i] / x0) * (x[i] / x0));
            gy += g * y[i];
            gg += g * g;
        }
        amp = gg > 0.0 ? gy / gg : 0.0;
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - amp * std::exp(-(x[i] / x0) * (x[i] / x0));
            rss += r * r;
        }
        return rss;
    };
    auto cost = [&](double log_x0) {
        double amp;
        return amp_rss(std::exp(log_x0), amp);
    };
    double best_l = 0.0, best = std::numeric_limits<double>::infinity();
    const double l_lo = std::log(0.05 * x_scale), l_hi = std::log(1e3 * x_scale), dl = 0.05;
    for (double l = l_lo; l <= l_hi; l += dl) {
        const double c = cost(l);
        if (c < best) {
            best = c;
            best_l = l;
        }
    }
    const double l = detail::golden_section(cost, best_l - dl, best_l + dl, 1e-14);
    double amp;
    const double rss = amp_rss(std::exp(l), amp);
    FitResult r;
    r.model = "gaussian_decay";
    r.params["amplitude"] = amp;
    r.params["decay_constant"] = std::exp(l);
    r.rms_residual = detail::rms(rss, x.size());
    if (best_l + dl > l_hi) r.warnings.push_back("fit_gaussian_decay: decay constant at upper search bound");
    return r;
}

struct PopulationPoint {
    double t;
    double p0;
    double p1;
    double p2;
};

/**
 * Mean phonon number from population curves against the closed-form thermal
 * populations. `factors(t)` supplies alpha and gamma at each sample time.
 * Throws FitError when fewer than 8 samples have a non-zero displacement,
 * since such data carry no information on nbar.
 */
inline FitResult fit_nbar(const std::vector<PopulationPoint> &data,
                          const std::function<AnalyticFactors(double)> &factors) {
    if (data.size() < 8) throw InputError("fit_nbar: need at least 8 samples");
    std::vector<AnalyticFactors> f;
    f.reserve(data.size());
    int informative = 0;
    for (const auto &d : data) {
        f.push_back(factors(d.t));
        if (std::abs(f.back().alpha) > 1e-6) ++informative;
    }
    if (informative < 8) {
        throw FitError("fit_nbar: ill-conditioned, fewer than 8 samples with non-zero displacement");
    }
    auto rss = [&](double nbar) {
        double acc = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const ThermalPopulations p = populations_thermal(f[i], nbar);
            acc += (p.p0 - data[i].p0) * (p.p0 - data[i].p0) + (p.p1 - data[i].p1) * (p.p1 - data[i].p1) +
                   (p.p2 - data[i].p2) * (p.p2 - data[i].p2);
        }
        return acc;
    };

    std::vector<double> grid{0.0};
    for (double x = 0.01; x <= 2000.0; x *= 1.05) grid.push_back(x);
    std::size_t best = 0;
    double best_rss = rss(0.0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double r = rss(grid[k]);
        if (r < best_rss) {
            best_rss = r;
            best = k;
        }
    }
    const double a = grid[best == 0 ? 0 : best - 1];
    const double b = grid[std::min(best + 1, grid.size() - 1)];
    const double nbar = best == 0 && rss(grid[1]) >= best_rss ? detail::golden_section(rss, 0.0, grid[1], 1e-14)
                                                              : detail::golden_section(rss, a, b, 1e-14);
    const double r_min = rss(nbar);

    // Sensitivity of the model to nbar at the optimum.
    const double h = std::max(1e-4, 1e-4 * nbar);
    double jj = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const ThermalPopulations up = populations_thermal(f[i], nbar + h);
        const ThermalPopulations dn = populations_thermal(f[i], std::max(nbar - h, 0.0));
        const double w = nbar + h - std::max(nbar - h, 0.0);
        const double d0 = (up.p0 - dn.p0) / w, d1 = (up.p1 - dn.p1) / w, d2 = (up.p2 - dn.p2) / w;
        jj += d0 * d0 + d1 * d1 + d2 * d2;
    }
    if (jj < 1e-14) throw FitError("fit_nbar: ill-conditioned, populations insensitive to nbar", std::sqrt(r_min));

    FitResult r;
    r.model = "nbar_populations";
    r.params["nbar"] = nbar;
    const std::size_t dof = 3 * data.size() - 1;
    r.std_error["nbar"] = std::sqrt(r_min / static_cast<double>(dof) / jj);
    r.rms_residual = std::sqrt(r_min / static_cast<double>(3 * data.size()));
    if (best + 1 >= grid.size()) r.warnings.push_back("fit_nbar: optimum at upper search bound");
    return r;
}

/// fit_nbar for a rectangular pulse.
inline FitResult fit_nbar(const std::vector<PopulationPoint> &data, const GateParams &p) {
    return fit_nbar(data, [&](double t) { return analytic_factors(p, t); });
}

/// fit_nbar for a shaped pulse.
inline FitResult fit_nbar(const std::vector<PopulationPoint> &data, const GateParams &p, const PulseEnvelope &env) {
    return fit_nbar(data, [&](double t) { return shaped_factors(p, env, t); });
}

}  // namespace msgate
