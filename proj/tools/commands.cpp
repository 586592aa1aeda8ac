#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rstrace/density.hpp"
#include "rstrace/errors.hpp"
#include "rstrace/levy.hpp"
#include "rstrace/spectral.hpp"

#include "artifacts.hpp"

namespace rstrace::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Units: L length, T time, d the dimension.
const char* kDensityUnit = "[L^-d]";

class Outputs {
public:
    Outputs(const RunParams& p, CommandResult& res) : dir_(p.out), digest_(params_digest(p.canonical)), res_(res) {
        fs::create_directories(dir_);
    }
    CsvWriter csv(std::vector<std::string> columns) const { return CsvWriter(std::move(columns), digest_); }
    void write(const std::string& name, const CsvWriter& w) { write(name, w.str()); }
    void write(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
    void write(const std::string& name, const std::string& content) {
        write_atomic(dir_ / name, content);
        res_.files.push_back(dir_ / name);
    }
    const std::string& digest() const { return digest_; }

private:
    fs::path dir_;
    std::string digest_;
    CommandResult& res_;
};

ProcessParams process(const RunParams& p) { return {p.alpha, p.mass, p.dim}; }

DensityOptions density_options(const RunParams& p) {
    DensityOptions o;
    o.abs_tol = p.tolerance;
    o.zero_tol = std::min(o.zero_tol, p.tolerance);
    return o;
}

std::optional<fs::path> cache_of(const RunParams& p) {
    if (p.cache_dir.empty()) return std::nullopt;
    return fs::path(p.cache_dir);
}

Domain bounded_domain(const RunParams& p, const char* what) {
    const Domain d = Domain::parse(p.domain);
    if (!d.bounded()) throw ValidationError(std::string(what) + " needs a bounded domain, got '" + p.domain + "'");
    return d;
}

void need_grid(const std::vector<double>& g, const char* name) {
    if (g.empty()) throw ValidationError(std::string(name) + " is empty");
}

std::string source_name(TraceSource s) { return s == TraceSource::MonteCarlo ? "mc" : "spectral"; }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

// density: p^m(t, r) on the t and r grids, with r = 0 first.
void cmd_density(const RunParams& p, Outputs& out, CommandResult& res) {
    need_grid(p.t_grid, "t-grid");
    need_grid(p.r_grid, "r-grid");
    const auto proc = process(p);
    const auto opt = density_options(p);
    auto w = out.csv({"t[T]", "r[L]", std::string("p") + kDensityUnit});
    for (double t : p.t_grid) {
        w.row(std::vector<double>{t, 0.0, density_at_zero(proc, t, opt)});
        for (double r : p.r_grid) w.row(std::vector<double>{t, r, free_density(proc, t, r, opt)});
    }
    out.write("density.csv", w);
    res.summary = {{"rows", p.t_grid.size() * (p.r_grid.size() + 1)}};
}

// levy: J^m, J^0, their ratio and psi on the r grid; kappa along a ray.
void cmd_levy(const RunParams& p, Outputs& out, CommandResult& res) {
    need_grid(p.r_grid, "r-grid");
    const auto proc = process(p);
    const auto prof = PsiProfile::for_params(proc);
    auto w = out.csv({"r[L]", "Jm[L^-d T^-1]", "J0[L^-d T^-1]", "ratio[1]", "psi[1]"});
    for (double r : p.r_grid) {
        const double jm = levy_density(proc, r), j0 = levy_density(proc.with_mass(0.0), r);
        w.row(std::vector<double>{r, jm, j0, jm / j0, psi(prof, proc.mass_scale() * r)});
    }
    out.write("levy.csv", w);
    res.summary = {{"sigma_mass", sigma_mass(proc)}};

    const Domain dom = Domain::parse(p.domain);
    if (proc.dim() != 2 || dom.kind() == DomainKind::Plane) return;
    const KillingRate kappa(proc);
    auto k = out.csv({"x1[L]", "x2[L]", "delta[L]", "kappa[T^-1]"});
    const int n = 32;
    if (dom.bounded()) {
        const auto [lo, hi] = dom.bounding_box();
        const Point c = 0.5 * (lo + hi), e(1.0, 0.0);
        if (!dom.contains(c)) throw GeometryError("bounding-box centre lies outside the domain");
        const double reach = dom.ray_exit(c, e);
        for (int i = 0; i < n; ++i) {
            const Point x = c + reach * (1.0 - std::pow(10.0, -3.0 + 3.0 * i / n)) * e;
            k.row(std::vector<double>{x.x(), x.y(), dom.distance_to_complement(x), kappa(dom, x)});
        }
    } else {
        for (int i = 0; i < n; ++i) {
            const Point x(std::pow(10.0, -3.0 + 4.0 * i / (n - 1)), 0.0);
            k.row(std::vector<double>{x.x(), x.y(), dom.distance_to_complement(x), kappa(dom, x)});
        }
    }
    out.write("kappa.csv", k);
}

// fh: f_H^m(t, r) sweep at t = params.t.
void cmd_fh(const RunParams& p, Outputs& out, CommandResult& res) {
    need_grid(p.r_grid, "r-grid");
    const auto proc = process(p);
    const auto cfg = path_config(p);
    const DensityTableSet tables(proc, p.t, density_options(p), cache_of(p));
    auto w = out.csv({"r[L]", std::string("value") + kDensityUnit, std::string("stderr") + kDensityUnit, "n_paths[1]", "step[T]",
                      "seed[1]"});
    json rows = json::array();
    for (std::size_t i = 0; i < p.r_grid.size(); ++i) {
        const auto e = estimate_f_H(proc, p.t, p.r_grid[i], cfg, tables, i);
        w.row(std::vector<std::string>{format_real(p.r_grid[i]), format_real(e.value), format_real(e.error),
                                       std::to_string(e.n_effective), format_real(cfg.base_step), std::to_string(cfg.seed)});
        rows.push_back(e.value);
    }
    out.write("fh.csv", w);
    res.summary = {{"t", p.t}, {"values", rows}, {"step_rule", cfg.step_rule()}};
}

// c2: f_H^0(1, r) profiles for both steps, then the extrapolated integral.
void cmd_c2(const RunParams& p, Outputs& out, CommandResult& res) {
    const auto cfg = path_config(p);
    const auto c = compute_C2(p.alpha, p.dim, cfg, p.r_grid);
    auto w = out.csv({"r[L]", "step[T]", std::string("value") + kDensityUnit, std::string("stderr") + kDensityUnit, "n_paths[1]",
                      "seed[1]"});
    for (std::size_t s = 0; s < c.steps.size(); ++s)
        for (std::size_t i = 0; i < c.r_grid.size(); ++i) {
            const auto& e = c.profiles[s][i];
            w.row(std::vector<std::string>{format_real(c.r_grid[i]), format_real(c.steps[s]), format_real(e.value),
                                           format_real(e.error), std::to_string(e.n_effective), std::to_string(cfg.seed)});
        }
    out.write("c2.csv", w);
    json per = json::array();
    std::uint64_t total = 0;
    for (std::size_t s = 0; s < c.steps.size(); ++s) {
        per.push_back({{"step", c.steps[s]}, {"value", c.per_step[s].value}, {"stderr", c.per_step[s].error}});
        total += c.per_step[s].n_effective;
    }
    json j = {{"params", out.digest()},
              {"alpha", p.alpha},
              {"dim", p.dim},
              {"c2", c.value.value},
              {"stderr", c.value.error},
              {"per_step", per},
              {"total_paths", total},
              {"sliver", c.sliver},
              {"sliver_bound", c.sliver_bound},
              {"tail", c.tail},
              {"tail_slope", c.tail_slope},
              {"step_rule", cfg.step_rule()}};
    out.write("c2.json", j);
    res.summary = {{"c2", c.value.value}, {"stderr", c.value.error}, {"total_paths", total}};
}

void write_curve(Outputs& out, const std::string& name, const TraceCurve& c) {
    auto w = out.csv({"t[T]", std::string("Z") + kDensityUnit, std::string("stderr") + kDensityUnit, "source"});
    for (const auto& s : c.samples)
        w.row(std::vector<std::string>{format_real(s.t), format_real(s.value), format_real(s.error), source_name(s.source)});
    out.write(name, w);
}

// trace-mc: Z(t) = |D| p^m(t, 0) - int_D r_D^m(t, x, x) dx.
void cmd_trace_mc(const RunParams& p, Outputs& out, CommandResult& res) {
    need_grid(p.t_grid, "t-grid");
    const auto proc = process(p);
    const Domain dom = bounded_domain(p, "trace-mc");
    const auto cfg = path_config(p);
    const auto opt = density_options(p);
    const DensityTableSet tables(proc, p.t_grid.back(), opt, cache_of(p));
    auto w = out.csv({"t[T]", "free[1]", "remainder[1]", "stderr[1]", "n_paths[1]", "step[T]", "seed[1]"});
    TraceCurve curve;
    for (std::size_t i = 0; i < p.t_grid.size(); ++i) {
        const double t = p.t_grid[i];
        const double free = dom.area() * density_at_zero(proc, t, opt);
        const auto r = estimate_trace_remainder(proc, dom, t, cfg, tables, i);
        w.row(std::vector<std::string>{format_real(t), format_real(free), format_real(r.value), format_real(r.error),
                                       std::to_string(r.n_effective), format_real(cfg.base_step), std::to_string(cfg.seed)});
        curve.samples.push_back({t, free - r.value, r.error, TraceSource::MonteCarlo});
    }
    out.write("trace_mc.csv", w);
    write_curve(out, "curve_mc.csv", curve);
    res.summary = {{"samples", curve.samples.size()}, {"step_rule", cfg.step_rule()}};
}

Spectrum spectrum_for(const KilledGenerator& g, std::size_t eigs, double tol) {
    EigenOptions eo;
    eo.tol = tol;
    const std::size_t n = g.grid.size();
    return eigen_spectrum(g.matrix, eigs == 0 ? n : std::min(eigs, n), g.grid.h, eo);
}

// trace-spectral: eigenvalues of the killed generator, raw and bias-corrected traces.
void cmd_trace_spectral(const RunParams& p, Outputs& out, CommandResult& res) {
    need_grid(p.t_grid, "t-grid");
    const auto proc = process(p);
    const Domain dom = bounded_domain(p, "trace-spectral");
    AssemblyOptions ao;
    ao.threads = p.threads;
    const auto g = assemble_killed_generator(proc, dom, p.grid_h, ao);
    const auto s = spectrum_for(g, p.eigs, p.tolerance);

    auto sw = out.csv({"index[1]", "eigenvalue[T^-1]", "h[L]", "residual[1]"});
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
        sw.row(std::vector<std::string>{std::to_string(i + 1), format_real(s.eigenvalues(i)), format_real(s.h),
                                        format_real(s.residuals(i))});
    out.write("spectrum.csv", sw);

    const double da = proc.dim() / proc.alpha();
    auto tw = out.csv({"t[T]", std::string("Z_raw") + kDensityUnit, std::string("tail_bound") + kDensityUnit,
                       std::string("Z_corrected") + kDensityUnit, "scaled_raw[1]", "scaled_corrected[1]"});
    TraceCurve curve;
    for (double t : p.t_grid) {
        const auto raw = trace_from_spectrum(s, t, proc);
        const double cor = bias_corrected_trace(s, g, proc, t);
        const double sc = std::pow(t, da);
        tw.row(std::vector<double>{t, raw.value, raw.tail_bound, cor, sc * raw.value, sc * cor});
        curve.samples.push_back({t, cor, 0.0, TraceSource::Spectral});
    }
    out.write("trace_spectral.csv", tw);
    write_curve(out, "curve_spectral.csv", curve);
    res.summary = {{"grid_points", g.grid.size()}, {"eigenvalues", s.eigenvalues.size()}, {"complete", s.complete()}};
}

// weyl: N(lambda) / lambda^{d/alpha} at the last trusted index for h and h / sqrt 2.
void cmd_weyl(const RunParams& p, Outputs& out, CommandResult& res) {
    const auto proc = process(p);
    const Domain dom = bounded_domain(p, "weyl");
    AssemblyOptions ao;
    ao.threads = p.threads;
    const std::size_t k = p.eigs == 0 ? 150 : p.eigs;
    const auto gc = assemble_killed_generator(proc, dom, p.grid_h, ao);
    const auto gf = assemble_killed_generator(proc, dom, p.grid_h / std::numbers::sqrt2, ao);
    const auto sc = spectrum_for(gc, k, p.tolerance), sf = spectrum_for(gf, k, p.tolerance);
    const std::size_t ceiling = trust_ceiling(sc, sf);
    const std::size_t n = std::min<std::size_t>(100, ceiling);
    if (n < 10) throw NumericalError("only " + std::to_string(ceiling) + " eigenvalues agree between h and h/sqrt(2)");
    const double da = proc.dim() / proc.alpha();
    const double reference = volume_constant(proc.alpha(), proc.dim()) * dom.area() / std::tgamma(1.0 + da);
    auto ratio = [&](const Spectrum& s, std::size_t i) {
        const double lam = s.eigenvalues(static_cast<Eigen::Index>(i) - 1);
        return static_cast<double>(weyl_counting(s, lam)) / std::pow(lam, da);
    };
    const std::size_t rows = std::min<std::size_t>(sc.eigenvalues.size(), sf.eigenvalues.size());
    auto w = out.csv({"index[1]", "eigenvalue_h[T^-1]", "eigenvalue_h2[T^-1]", "ratio_h[1]", "ratio_h2[1]"});
    for (std::size_t i = 1; i <= rows; ++i)
        w.row(std::vector<std::string>{std::to_string(i), format_real(sc.eigenvalues(i - 1)), format_real(sf.eigenvalues(i - 1)),
                                       format_real(ratio(sc, i)), format_real(ratio(sf, i))});
    out.write("weyl.csv", w);
    const double rc = ratio(sc, n), rf = ratio(sf, n);
    json j = {{"params", out.digest()},
              {"h", gc.grid.h},
              {"h2", gf.grid.h},
              {"trust_ceiling", ceiling},
              {"index", n},
              {"ratio_h", rc},
              {"ratio_h2", rf},
              {"reference", reference},
              {"relative_error_h2", rf / reference - 1.0},
              {"drift", std::abs(rf - rc) / rc}};
    out.write("weyl.json", j);
    res.summary = j;
}

// fit: weighted least squares of a trace curve against the predicted expansion.
void cmd_fit(const RunParams& p, Outputs& out, CommandResult& res) {
    if (p.curve.empty()) throw ValidationError("fit needs a curve file (--curve)");
    TraceCurve curve = read_curve_csv(p.curve);
    if (!p.t_grid.empty()) {
        const double lo = p.t_grid.front(), hi = p.t_grid.back();
        std::erase_if(curve.samples, [&](const TraceSample& s) { return s.t < lo * (1 - 1e-12) || s.t > hi * (1 + 1e-12); });
    }
    ExpansionPrediction pred;
    json pj;
    if (!p.prediction.empty()) {
        std::ifstream is(p.prediction);
        if (!is) throw ValidationError("cannot read prediction file " + p.prediction);
        try {
            pj = json::parse(is);
        } catch (const json::exception& e) {
            throw ValidationError(p.prediction + ": " + e.what());
        }
        pred = prediction_from_json(pj);
    } else {
        const Domain dom = bounded_domain(p, "fit");
        pred = predict_expansion(process(p), dom, p.c2);
        pj = prediction_to_json(pred, dom.spec(), p.mass, p.c2);
    }
    FitOptions opt;
    opt.fixed = split_list(p.fixed);
    const auto rep = fit_coefficients(curve, pred, opt);
    const auto ro = residual_order(curve, pred);

    json terms = json::array();
    for (const auto& f : rep.terms)
        terms.push_back({{"labels", f.labels},
                         {"shifted_exponent", f.shifted_exponent},
                         {"merged", f.merged},
                         {"nuisance", f.nuisance},
                         {"fitted", f.fitted},
                         {"sigma", f.sigma},
                         {"predicted", f.predicted},
                         {"relative_discrepancy", f.nuisance ? json(nullptr) : json(f.relative_discrepancy())}});
    json j = {{"params", out.digest()},
              {"curve", p.curve},
              {"samples", rep.samples},
              {"fixed", opt.fixed},
              {"prediction", pj},
              {"terms", terms},
              {"residual_rms", rep.residual_rms},
              {"residual_order",
               {{"slope", ro.slope}, {"inconclusive", ro.inconclusive}, {"ratio_decreasing", ro.ratio_decreasing}, {"note", ro.note}}}};
    out.write("fit_report.json", j);
    out.write("prediction.json", pj);
    res.summary = {{"terms", terms}};
}

void cmd_verify(const RunParams& p, Outputs& out, CommandResult& res) {
    VerifySettings vs;
    vs.quick = p.quick;
    vs.seed = p.seed;
    vs.threads = p.threads;
    const auto checks = verify_suite(vs);
    json list = json::array();
    int failed = 0;
    for (const auto& c : checks) {
        list.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}, {"seconds", c.seconds}});
        failed += !c.passed;
    }
    json j = {{"params", out.digest()}, {"quick", p.quick}, {"checks", list}, {"failed", failed}};
    out.write("verify.json", j);
    res.summary = {{"checks", list}, {"failed", failed}};
    res.ok = failed == 0;
}

} // namespace

PathConfig path_config(const RunParams& p) {
    PathConfig c;
    c.n_paths = p.paths;
    c.base_step = p.step;
    c.boundary_refine = p.refine;
    c.seed = p.seed;
    c.antithetic = p.antithetic;
    c.threads = p.threads;
    c.validate();
    return c;
}

TraceCurve read_curve_csv(const fs::path& file) {
    std::ifstream is(file);
    if (!is) throw ValidationError("cannot read curve file " + file.string());
    TraceCurve c;
    std::string line;
    bool header = false;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) cols.push_back(f);
        if (cols.size() != 4) throw ValidationError(file.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
        TraceSample s;
        s.t = parse_real("t", cols[0]);
        s.value = parse_real("Z", cols[1]);
        s.error = parse_real("stderr", cols[2]);
        if (cols[3] == "mc")
            s.source = TraceSource::MonteCarlo;
        else if (cols[3] == "spectral")
            s.source = TraceSource::Spectral;
        else
            throw ValidationError(file.string() + ":" + std::to_string(line_no) + ": unknown source '" + cols[3] + "'");
        c.samples.push_back(s);
    }
    return c;
}

json prediction_to_json(const ExpansionPrediction& pred, const std::string& domain, double mass, double c2) {
    json terms = json::array();
    for (const auto& t : pred.terms) terms.push_back({{"label", t.label}, {"t_exponent", t.t_exponent}, {"coefficient", t.coefficient}});
    return {{"alpha", pred.alpha},
            {"dim", pred.dim},
            {"mass", mass},
            {"domain", domain},
            {"c2", c2},
            {"class", pred.domain_class == DomainClass::C11 ? "C11" : "Lipschitz"},
            {"error_exponent", pred.error_exponent},
            {"terms", terms}};
}

ExpansionPrediction prediction_from_json(const json& j) {
    try {
        ExpansionPrediction p;
        p.alpha = j.at("alpha").get<double>();
        p.dim = j.at("dim").get<int>();
        p.error_exponent = j.at("error_exponent").get<double>();
        const auto cls = j.at("class").get<std::string>();
        if (cls != "C11" && cls != "Lipschitz") throw ValidationError("prediction class must be C11 or Lipschitz");
        p.domain_class = cls == "C11" ? DomainClass::C11 : DomainClass::Lipschitz;
        for (const auto& t : j.at("terms"))
            p.terms.push_back({t.at("t_exponent").get<double>(), t.at("coefficient").get<double>(), t.at("label").get<std::string>()});
        if (p.terms.empty()) throw ValidationError("prediction has no terms");
        return p;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed prediction: ") + e.what());
    }
}

CommandResult run_command(const RunParams& p) {
    CommandResult res;
    Outputs out(p, res);
    const auto& s = p.subcommand;
    if (s == "density") cmd_density(p, out, res);
    else if (s == "levy") cmd_levy(p, out, res);
    else if (s == "fh") cmd_fh(p, out, res);
    else if (s == "c2") cmd_c2(p, out, res);
    else if (s == "trace-mc") cmd_trace_mc(p, out, res);
    else if (s == "trace-spectral") cmd_trace_spectral(p, out, res);
    else if (s == "weyl") cmd_weyl(p, out, res);
    else if (s == "fit") cmd_fit(p, out, res);
    else if (s == "verify") cmd_verify(p, out, res);
    else throw ValidationError("unknown subcommand '" + s + "'");
    return res;
}

} // namespace rstrace::cli
