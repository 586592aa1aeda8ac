#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "rstrace/density.hpp"
#include "rstrace/errors.hpp"
#include "rstrace/spectral.hpp"

using namespace rstrace;

namespace {

// Cyclic Jacobi rotations; slow but independent of Householder/QL.
Eigen::VectorXd jacobi_eigenvalues(Eigen::MatrixXd a) {
    const Eigen::Index n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30 * a.squaredNorm()) break;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    Eigen::VectorXd d = a.diagonal();
    std::sort(d.data(), d.data() + n);
    return d;
}

const KilledGenerator& disk_generator(double h) {
    static std::map<double, KilledGenerator> cache;
    auto it = cache.find(h);
    if (it == cache.end()) it = cache.emplace(h, assemble_killed_generator(ProcessParams(1, 0, 2), Domain::disk(1.0), h)).first;
    return it->second;
}

} // namespace

TEST_CASE("eigen solvers") {
    Eigen::MatrixXd one(1, 1);
    one << 3.5;
    CHECK(eigen_spectrum(one, 1).eigenvalues(0) == 3.5);

    Eigen::MatrixXd diag = Eigen::VectorXd::LinSpaced(7, 7.0, 1.0).asDiagonal();
    const auto ds = eigen_spectrum(diag, 7);
    for (int i = 0; i < 7; ++i) CHECK(ds.eigenvalues(i) == doctest::Approx(i + 1.0));

    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(50, 50);
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = g(rng);
    const auto s = dense_spectrum(a, 50);
    CHECK(std::abs(s.eigenvalues.sum() - a.trace()) < 1e-9);
    const Eigen::VectorXd ref = jacobi_eigenvalues(a);
    CHECK((s.eigenvalues - ref).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(s.residuals.maxCoeff() <= 1e-8);
    CHECK_THROWS_AS(eigen_spectrum(a, 51), DomainError);

    // Shift-invert Lanczos on an SPD matrix against the dense values.
    Eigen::MatrixXd spd = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(50, 50);
    const auto l = lanczos_spectrum(spd, 8);
    const auto d = dense_spectrum(spd, 8);
    CHECK((l.eigenvalues - d.eigenvalues).cwiseAbs().maxCoeff() < 1e-8 * d.eigenvalues(7));
    CHECK(l.residuals.maxCoeff() <= 1e-8);
    CHECK_FALSE(l.complete());
}

TEST_CASE("grid") {
    const auto g = make_grid(Domain::disk(1.0), 0.05);
    CHECK(std::abs(g.size() * 0.05 * 0.05 - M_PI) < 2 * M_PI * 0.05);
    for (const auto& x : g.points) CHECK(Domain::disk(1.0).distance_to_complement(x) > 0.0);
    const auto r = make_grid(Domain::rectangle(2, 1), 0.05);
    CHECK(r.size() == 40u * 20u);
    CHECK_THROWS_AS(make_grid(Domain::disk(1.0), 0.5), GeometryError);
    CHECK_THROWS_AS(make_grid(Domain::half_space(), 0.1), GeometryError);
}

TEST_CASE("stencil correction") {
    // Independent of the damping radius once the damping is smooth and wide.
    const ProcessParams p(1.0, 0.0, 2);
    const double c = stencil_correction(p, 0.05);
    CHECK(c > 0.0);
    CHECK(stencil_correction(p, 0.01) == doctest::Approx(c).epsilon(1e-12));  // m = 0: scale free
    CHECK(stencil_correction(ProcessParams(1.0, 1.0, 2), 0.05) == doctest::Approx(c).epsilon(1e-3));
    // The corrected lattice density is closer to the continuum one.
    for (double tau : {2.0, 6.0}) {
        const double h = 0.05, t = tau * h;
        const double exact = free_density(p, t, 0.0);
        const double raw = lattice_free_density(p, h, t, false, 256);
        const double cor = lattice_free_density(p, h, t, true, 256);
        CHECK(std::abs(cor / exact - 1) < std::abs(raw / exact - 1));
    }
    // Large tau probes only small frequencies, where the lattice symbol is the continuum one.
    CHECK(lattice_free_density(p, 0.01, 10.0, true, 256) == doctest::Approx(free_density(p, 10.0, 0.0)).epsilon(1e-3));
}

TEST_CASE("killed generator structure") {
    const ProcessParams p(1.2, 0.5, 2);
    const auto g = assemble_killed_generator(p, Domain::rectangle(1, 1), 0.1);
    const Eigen::MatrixXd& a = g.matrix;
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
    bool signs = true;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) signs = signs && (i == j ? a(i, j) > 0.0 : a(i, j) <= 0.0);
    CHECK(signs);
    CHECK(g.kappa.minCoeff() > 0.0);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(a).info() == Eigen::Success);
    CHECK_THROWS_AS(assemble_killed_generator(ProcessParams(1, 0, 3), Domain::disk(1.0), 0.1), ValidationError);
}

TEST_CASE("spectral properties on the disk") {
    const auto& coarse = disk_generator(0.1);
    const auto& fine = disk_generator(0.05);
    const auto sc = eigen_spectrum(coarse.matrix, coarse.grid.size(), 0.1);
    const auto sf = eigen_spectrum(fine.matrix, fine.grid.size(), 0.05);
    CHECK(sf.eigenvalues(0) > 0.0);
    CHECK(std::abs(sc.eigenvalues(0) / sf.eigenvalues(0) - 1.0) < 0.02);
    CHECK(sf.residuals.maxCoeff() <= 1e-8);

    const auto small = assemble_killed_generator(ProcessParams(1, 0, 2), Domain::disk(0.9), 0.05);
    CHECK(sf.eigenvalues(0) < eigen_spectrum(small.matrix, 1, 0.05).eigenvalues(0));

    const double m = 1.0;
    const auto massive = assemble_killed_generator(ProcessParams(1, m, 2), Domain::disk(1.0), 0.1);
    const double l1m = eigen_spectrum(massive.matrix, 1, 0.1).eigenvalues(0);
    CHECK(l1m >= sc.eigenvalues(0) - m);
    CHECK(l1m < sc.eigenvalues(0));

    const ProcessParams p(1, 0, 2);
    const double l1 = sf.eigenvalues(0);
    CHECK(weyl_counting(sf, 0.5 * l1) == 0u);
    CHECK(weyl_counting(sf, l1) == 1u);
    CHECK(trust_ceiling(sc, sf, 0.03) > 5u);
    CHECK(trust_ceiling(sf, sf) == sf.eigenvalues.size());

    const double z1 = trace_from_spectrum(sf, 1.0, p).value;
    CHECK(trace_from_spectrum(sf, 2.0, p).value < z1);
    CHECK(trace_from_spectrum(sf, 10.0, p).value / std::exp(-10.0 * l1) == doctest::Approx(1.0).epsilon(1e-2));

    // Truncated spectra carry a Weyl tail diagnostic.
    Spectrum part = sf;
    part.eigenvalues = sf.eigenvalues.head(200);
    CHECK(trace_from_spectrum(part, 1.0, p).tail_bound < 1e-4);
    CHECK_THROWS_AS(trace_from_spectrum(part, 0.05, p), TailTooHeavyError);
    try {
        trace_from_spectrum(part, 0.05, p);
    } catch (const TailTooHeavyError& e) {
        CHECK(e.tail_bound > 0.005 * e.partial_sum);
    }

    // Bias correction moves the interior term to the continuum value.
    const double t = 0.2;
    const double raw = trace_from_spectrum(sf, t, p).value;
    const double cor = bias_corrected_trace(sf, fine, p, t);
    CHECK(cor < raw);
}
