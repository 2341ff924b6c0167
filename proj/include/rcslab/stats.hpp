#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace rcslab {

struct Interval {
    double lo = 0.0, hi = 1.0;
    double width() const { return hi - lo; }
    bool contains(double x) const { return lo <= x && x <= hi; }
};

// Wilson score interval for a binomial proportion. n may be an effective
// (non-integer) sample size.
inline Interval wilson(double hits, double n, double z = 1.959963984540054) {
    if (n <= 0) return {0.0, 1.0};
    double ph = hits / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (ph + z2 / (2 * n)) / denom;
    double half = z / denom * std::sqrt(ph * (1 - ph) / n + z2 / (4 * n * n));
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / (double)v.size();
}

// Integrated autocorrelation time with Sokal's self-consistent window
// (window W grows until W >= c * tau(W)). Returns 0.5 for iid / constant
// series, so ESS = N there.
inline double integrated_autocorr_time(const std::vector<double>& v, double c = 6.0) {
    std::size_t n = v.size();
    if (n < 8) return 0.5;
    double mu = mean(v);
    double var = 0;
    for (double x : v) var += (x - mu) * (x - mu);
    var /= (double)n;
    if (var <= 0) return 0.5;
    std::size_t maxlag = std::min<std::size_t>(n / 4, 4000);
    double tau = 0.5;
    for (std::size_t t = 1; t <= maxlag; ++t) {
        double acc = 0;
        for (std::size_t i = 0; i + t < n; ++i) acc += (v[i] - mu) * (v[i + t] - mu);
        double rho = acc / ((double)(n - t) * var);
        tau += rho;
        if ((double)t >= c * tau) break;
        if (rho < 0 && t > 4) break;
    }
    return std::max(0.5, tau);
}

inline double effective_sample_size(double n, double tau) {
    if (n <= 0) return 0.0;
    return std::clamp(n / (2.0 * tau), 1.0, n);
}

inline double effective_sample_size(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return effective_sample_size((double)v.size(), integrated_autocorr_time(v));
}

struct LineFit {
    double intercept = 0, slope = 0, r2 = 0;
    std::size_t points = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    std::size_t n = std::min(x.size(), y.size());
    f.points = n;
    if (n < 2) return f;
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) { sx += x[i]; sy += y[i]; }
    double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (syy <= 0) {
        f.r2 = 1.0;
    } else {
        double ssres = syy - f.slope * sxy;
        f.r2 = 1.0 - ssres / syy;
    }
    return f;
}

} // namespace rcslab
