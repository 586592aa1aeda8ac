#include "rstrace/quadrature.hpp"

#include <numbers>

namespace rstrace {

GaussLegendre::GaussLegendre(int n) : nodes(n), weights(n) {
    if (n < 1) throw ValidationError("Gauss-Legendre order must be positive");
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = w;
    }
}

void EpsilonAccelerator::push(double s) {
    sums_.push_back(s);
    constexpr std::size_t window = 40;
    const std::size_t start = sums_.size() > window ? sums_.size() - window : 0;
    std::vector<double> prev(sums_.size() - start, 0.0);
    std::vector<double> cur(sums_.begin() + static_cast<std::ptrdiff_t>(start), sums_.end());
    double best = cur.back();
    for (int k = 0; cur.size() > 1; ++k) {
        std::vector<double> next(cur.size() - 1);
        bool stalled = false;
        for (std::size_t j = 0; j + 1 < cur.size(); ++j) {
            const double diff = cur[j + 1] - cur[j];
            if (diff == 0.0) {
                stalled = true;
                break;
            }
            next[j] = prev[j + 1] + 1.0 / diff;
        }
        if (stalled) break;
        if ((k + 1) % 2 == 0) {
            if (!std::isfinite(next.back())) break;
            best = next.back();
        }
        prev = cur;
        cur = std::move(next);
    }
    error_ = std::isnan(previous_) ? std::numeric_limits<double>::infinity() : std::abs(best - previous_);
    previous_ = best;
    estimate_ = best;
}

} // namespace rstrace
