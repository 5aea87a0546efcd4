#include "phonon/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "phonon/errors.hpp"
#include "phonon/interface_scattering.hpp"
#include "phonon/lattice_dispersion.hpp"
#include "phonon/memory_kernel.hpp"
#include "phonon/microdynamics.hpp"
#include "phonon/wigner_kinetics.hpp"

namespace phonon::harness {
namespace {

constexpr std::uint64_t noise_stream = 0;
constexpr std::uint64_t gibbs_stream = 1;
constexpr std::uint64_t phase_stream = 2;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------- config schema

const std::map<std::string, std::set<std::string>>& nested_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"packet", {"x_center", "k_center", "envelope", "width", "amplitude", "phase_random", "eps"}},
        {"limit_packet", {"x_center", "sx", "k_center", "sk", "amplitude"}},
        {"spot", {"lambda", "eta", "k"}},
        {"energy", {"N", "M", "temperature", "dt", "t_micro", "record_every", "packet"}},
    };
    return keys;
}

const std::set<std::string>& top_keys() {
    static const std::set<std::string> keys{
        "preset", "kernel", "gamma", "temperature", "N", "N_list", "dt", "dt_list", "t_macro", "t_micro",
        "record_every", "packet", "M", "seed", "delta_excl", "n_k", "cross_check", "kernel_horizon", "dt_kernel",
        "bins", "n_bins", "threads", "initial", "limit_packet", "spot", "checks", "energy", "window_halfwidth",
        "fraction_tol", "out"};
    return keys;
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown config key '" + where + key + "'");
        if (auto it = nested_keys().find(key); it != nested_keys().end() && value.is_object())
            check_keys(value, it->second, where + key + ".");
    }
}

const json& need(const json& c, const std::string& key) {
    if (!c.contains(key)) throw ConfigError("config key '" + key + "' is required");
    return c.at(key);
}

double get_num(const json& c, const std::string& key) {
    const auto& v = need(c, key);
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
}

std::size_t get_size(const json& c, const std::string& key) {
    const auto& v = need(c, key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("config key '" + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

bool get_bool(const json& c, const std::string& key) {
    const auto& v = need(c, key);
    if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
    return v.get<bool>();
}

std::string get_str(const json& c, const std::string& key) {
    const auto& v = need(c, key);
    if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
    return v.get<std::string>();
}

std::vector<double> get_num_list(const json& c, const std::string& key) {
    const auto& v = need(c, key);
    if (!v.is_array() || v.empty()) throw ConfigError("config key '" + key + "' must be a non-empty list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError("config key '" + key + "' must be a list of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<std::size_t> get_size_list(const json& c, const std::string& key) {
    const auto& v = need(c, key);
    if (!v.is_array() || v.empty()) throw ConfigError("config key '" + key + "' must be a non-empty list of integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
        if (!e.is_number_integer() || e.get<long long>() <= 0)
            throw ConfigError("config key '" + key + "' must list positive integers");
        out.push_back(e.get<std::size_t>());
    }
    return out;
}

DispersionRelation make_dispersion(const json& c) {
    const auto& k = need(c, "kernel");
    if (k.is_string()) return DispersionRelation(CouplingKernel::from_preset(k.get<std::string>()));
    if (!k.is_array()) throw ConfigError("config key 'kernel' must be a preset name or a list of [y, alpha_y] pairs");
    std::vector<std::pair<int, double>> pairs;
    for (const auto& p : k) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number())
            throw ConfigError("config key 'kernel': each entry must be [y, alpha_y] with integer y");
        pairs.emplace_back(p[0].get<int>(), p[1].get<double>());
    }
    return DispersionRelation(CouplingKernel::from_pairs(pairs));
}

WavePacketSpec make_packet(const json& c, double delta_excl) {
    const auto& p = need(c, "packet");
    WavePacketSpec s;
    s.x_center = get_num(p, "x_center");
    s.k_center = get_num(p, "k_center");
    s.width = get_num(p, "width");
    if (p.contains("envelope")) s.envelope = envelope_from_string(get_str(p, "envelope"));
    if (p.contains("amplitude")) s.amplitude = get_num(p, "amplitude");
    if (p.contains("phase_random")) s.phase_random = get_bool(p, "phase_random");
    if (p.contains("eps")) s.eps = get_num(p, "eps");
    s.delta_excl = delta_excl;
    return s;
}

std::vector<std::pair<double, double>> make_bins(const json& c) {
    const auto& v = need(c, "bins");
    if (!v.is_array() || v.empty()) throw ConfigError("config key 'bins' must be a non-empty list of [k_lo, k_hi]");
    std::vector<std::pair<double, double>> out;
    for (const auto& b : v) {
        if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number() ||
            !(b[0].get<double>() < b[1].get<double>()))
            throw ConfigError("config key 'bins': each bin must be [k_lo, k_hi] with k_lo < k_hi");
        out.emplace_back(b[0].get<double>(), b[1].get<double>());
    }
    return out;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

// ---------------------------------------------------------------- output helpers

std::string csv_line(std::initializer_list<double> values) {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (double v : values) {
        if (!first) os << ',';
        os << v;
        first = false;
    }
    os << '\n';
    return os.str();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

Check make_check(std::string name, double measured, double target, double tol, bool pass, std::string note = {}) {
    Check c;
    c.name = std::move(name);
    c.measured = measured;
    c.target = target;
    c.tolerance = tol;
    c.pass = pass;
    c.note = std::move(note);
    return c;
}

Check upper_bound_check(std::string name, double measured, double bound) {
    return make_check(std::move(name), measured, 0.0, bound, std::isfinite(measured) && measured < bound);
}

struct Context {
    json cfg;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    bool computing = false;  // errors before this point are config rejections
    RunReport* report = nullptr;
};

double mean_of(const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

double sem_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - mean) * (v[i] - mean);
    return std::sqrt(pairwise_sum(d) / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// ---------------------------------------------------------------- coefficients

void cmd_coefficients(Context& ctx) {
    const auto& c = ctx.cfg;
    auto& rep = *ctx.report;
    const auto disp = make_dispersion(c);
    const double gamma = get_num(c, "gamma");
    const auto n_k = get_size(c, "n_k");
    const double delta = get_num(c, "delta_excl");
    const bool cross = get_bool(c, "cross_check");
    const double horizon = get_num(c, "kernel_horizon");
    const double dtk = get_num(c, "dt_kernel");
    require(gamma >= 0.0 && std::isfinite(gamma), "gamma must be >= 0");
    require(n_k >= 64, "n_k must be >= 64");
    require(delta > 0.0 && delta < 0.25, "delta_excl must lie in (0, 1/4), got " + fmt(delta));
    require(horizon > 0.0 && dtk > 0.0 && dtk < horizon, "need 0 < dt_kernel < kernel_horizon");
    ctx.computing = true;

    ScatteringTable table;
    try {
        table = build_table(disp, gamma, n_k, delta, ctx.threads);
    } catch (const InvariantError& e) {
        rep.add(make_check("scattering table invariants", std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, false,
                           e.what()));
        return;
    }
    double g_violation = 0.0;
    for (const auto& r : table.rows) g_violation = std::max({g_violation, -r.absorb, r.absorb - 1.0});
    rep.add(upper_bound_check("max |p+ + p- + g - 1|", table.max_identity_residual, 1e-8));
    rep.add(make_check("g within [0, 1]", std::max(g_violation, 0.0), 0.0, 1e-12, g_violation <= 1e-12));
    rep.add(upper_bound_check("max |Re nu - (1 + pi gamma/|omega'|) |nu|^2|", table.max_re_nu_residual, 1e-6));
    rep.data["rows"] = table.size();
    rep.data["kernel"] = disp.kernel().label();
    if (cross) {
        const MemoryKernel mk(disp, gamma, horizon, dtk);
        const auto cc = cross_check_laplace(table, mk, ctx.threads);
        auto chk = upper_bound_check("max |nu_pv - nu_laplace|", cc.max_abs_diff, 1e-3);
        chk.note = "worst k = " + fmt(cc.worst_k);
        rep.add(chk);
    }
    std::ostringstream os;
    table.write_csv(os);
    rep.files.push_back({"scattering_table.csv", os.str()});
    rep.files.push_back({"coefficients.gp",
                         "set datafile separator ','\n"
                         "set key autotitle columnhead\n"
                         "set xlabel 'k'\n"
                         "plot 'scattering_table.csv' using 1:5 with lines, '' using 1:6 with lines, "
                         "'' using 1:4 with lines\n"});
}

// ---------------------------------------------------------------- scattering

void cmd_scattering(Context& ctx) {
    const auto& c = ctx.cfg;
    auto& rep = *ctx.report;
    const auto disp = make_dispersion(c);
    const double gamma = get_num(c, "gamma");
    const double T = get_num(c, "temperature");
    const auto Ns = get_size_list(c, "N_list");
    const double dt = get_num(c, "dt");
    const double delta = get_num(c, "delta_excl");
    const double window = get_num(c, "window_halfwidth");
    const double ftol = get_num(c, "fraction_tol");
    const auto spec = make_packet(c, delta);
    require(T == 0.0, "scattering runs need temperature = 0");
    require(spec.x_center < 0.0, "packet.x_center must be negative");
    const double v = disp.group_velocity(spec.k_center);
    require(v > 0.0, "packet.k_center must have positive group velocity");
    require(window > 0.0, "window_halfwidth must be positive");
    const double t_macro = c.contains("t_macro") && !c.at("t_macro").is_null()
                               ? get_num(c, "t_macro")
                               : 2.0 * std::abs(spec.x_center) / v;
    require(t_macro > 0.0, "t_macro must be positive");
    for (std::size_t N : Ns) {
        DirectSolver(disp, N, {gamma, T}, dt);
        (void)sample_initial(spec, N, disp, ctx.seed, phase_stream);
    }
    const auto pred = scattering_at(disp, gamma, spec.k_center);
    ctx.computing = true;

    struct Row {
        ScatteringFractions f;
        double eps = 0.0;
        std::string invalid;
    };
    std::vector<Row> rows(Ns.size());
    parallel_for(Ns.size(), ctx.threads, [&](std::size_t i) {
        const std::size_t N = Ns[i];
        const double eps = packet_eps(spec, N);
        rows[i].eps = eps;
        auto st = sample_initial(spec, N, disp, ctx.seed, phase_stream);
        const auto psi0 = wave_field(st, disp);
        double e0 = 0.0;
        for (const auto& z : psi0) e0 += std::norm(z);
        e0 *= eps;
        const DirectSolver solver(disp, N, {gamma, 0.0}, dt);
        NoisePath noise(ctx.seed, dt, noise_stream);
        const auto steps = static_cast<std::size_t>(std::llround(t_macro / (eps * dt)));
        const std::size_t chunks = 16;
        for (std::size_t k = 0; k < chunks; ++k) {
            const std::size_t n = steps * (k + 1) / chunks - steps * k / chunks;
            solver.advance(st, noise, n);
            const double seam = seam_energy_fraction(wave_field(st, disp));
            if (seam > 1e-6) {
                rows[i].invalid = "N = " + std::to_string(N) + ": energy fraction " + fmt(seam) +
                                  " reached the lattice seam at t_macro = " +
                                  fmt(eps * dt * static_cast<double>(steps * (k + 1) / chunks));
                return;
            }
        }
        try {
            rows[i].f = scattering_fractions(wave_field(st, disp), spec, e0, window);
        } catch (const InvalidRunError& e) {
            rows[i].invalid = "N = " + std::to_string(N) + ": " + e.what();
        }
    });
    for (const auto& r : rows)
        if (!r.invalid.empty()) throw InvalidRunError(r.invalid);

    std::string csv = "N,eps,t_macro,transmitted,reflected,absorbed,err_transmitted,err_reflected,err_absorbed,"
                      "interface_residual,seam_fraction\n";
    std::vector<double> errs;
    json per_n = json::array();
    for (std::size_t i = 0; i < Ns.size(); ++i) {
        const auto& f = rows[i].f;
        const double et = std::abs(f.transmitted - pred.p_plus), er = std::abs(f.reflected - pred.p_minus),
                     ea = std::abs(f.absorbed - pred.absorb);
        errs.push_back(std::max({et, er, ea}));
        csv += csv_line({static_cast<double>(Ns[i]), rows[i].eps, t_macro, f.transmitted, f.reflected, f.absorbed,
                         et, er, ea, f.interface_residual, f.seam_fraction});
        per_n.push_back({{"N", Ns[i]},
                         {"transmitted", f.transmitted},
                         {"reflected", f.reflected},
                         {"absorbed", f.absorbed},
                         {"max_error", errs.back()}});
    }
    rep.data["runs"] = per_n;
    rep.data["predicted"] = {{"p_plus", pred.p_plus}, {"p_minus", pred.p_minus}, {"g", pred.absorb}};
    rep.data["t_macro"] = t_macro;

    const std::size_t last = Ns.size() - 1;
    const auto& f = rows[last].f;
    const std::string at = " at N = " + std::to_string(Ns[last]);
    rep.add(make_check("transmitted vs p+" + at, f.transmitted, pred.p_plus, ftol,
                       std::abs(f.transmitted - pred.p_plus) < ftol));
    rep.add(make_check("reflected vs p-" + at, f.reflected, pred.p_minus, ftol,
                       std::abs(f.reflected - pred.p_minus) < ftol));
    rep.add(make_check("absorbed vs g" + at, f.absorbed, pred.absorb, ftol, std::abs(f.absorbed - pred.absorb) < ftol));
    if (Ns.size() > 1) {
        // errors at roundoff level carry no trend
        const double floor = 1e-6;
        double worst = 0.0;
        for (std::size_t i = 1; i < errs.size(); ++i)
            if (errs[i] > floor) worst = std::max(worst, errs[i] / std::max(errs[i - 1], floor));
        rep.add(make_check("error growth between successive N (max ratio)", worst, 1.0, 0.2, worst <= 1.2));
    }
    rep.files.push_back({"scattering.csv", csv});
    rep.files.push_back({"scattering.gp",
                         "set datafile separator ','\n"
                         "set key autotitle columnhead\n"
                         "set logscale x 2\n"
                         "set xlabel 'N'\n"
                         "plot 'scattering.csv' using 1:7 with linespoints, '' using 1:8 with linespoints, "
                         "'' using 1:9 with linespoints\n"});
}

// ---------------------------------------------------------------- production

void cmd_production(Context& ctx) {
    const auto& c = ctx.cfg;
    auto& rep = *ctx.report;
    const auto disp = make_dispersion(c);
    const double gamma = get_num(c, "gamma");
    const double T = get_num(c, "temperature");
    const auto N = get_size(c, "N");
    const auto M = get_size(c, "M");
    const double dt = get_num(c, "dt");
    const double t_macro = get_num(c, "t_macro");
    const double delta = get_num(c, "delta_excl");
    const auto bins = make_bins(c);
    require(M >= 2, "M must be >= 2");
    require(t_macro > 0.0, "t_macro must be positive");
    const DirectSolver solver(disp, N, {gamma, T}, dt);
    for (const auto& [lo, hi] : bins)
        for (double k : {lo, hi, 0.5 * (lo + hi)})
            require(disp.distance_to_singular_set(k) >= delta,
                    "bin edge or centre k = " + fmt(k) + " lies in the exclusion zone");
    ProductionSpec ps;
    ps.eps = 1.0 / static_cast<double>(N);
    ps.t_macro = t_macro;
    ps.temperature = T;
    ps.gamma = gamma;
    ps.bins = bins;
    {
        // dry run of the window geometry
        std::vector<std::vector<cplx>> probe(2, std::vector<cplx>(N));
        (void)production_profile(probe, disp, ps);
    }
    if (M < 1000) rep.data["warning"] = "M = " + std::to_string(M) + " < 1000: plateau standard errors may exceed the tolerance";
    ctx.computing = true;

    const auto steps = static_cast<std::size_t>(std::llround(t_macro * static_cast<double>(N) / dt));
    std::vector<std::vector<cplx>> fields(M);
    parallel_for(M, ctx.threads, [&](std::size_t p) {
        auto st = ChainState::zero(N);
        NoisePath noise(ctx.seed + p, dt, noise_stream);
        solver.advance(st, noise, steps);
        fields[p] = wave_field(st, disp);
    });
    const auto prof = production_profile(fields, disp, ps);
    const auto half = production_profile(std::span<const std::vector<cplx>>(fields.data(), M / 2), disp, ps);

    std::string csv = "k_lo,k_hi,points,plateau,standard_error,predicted,ratio,outside\n";
    double max_plateau = 0.0;
    for (const auto& b : prof) max_plateau = std::max(max_plateau, std::abs(b.plateau));
    json jb = json::array();
    for (std::size_t i = 0; i < prof.size(); ++i) {
        const auto& b = prof[i];
        const std::string name = "bin [" + fmt(b.k_lo) + ", " + fmt(b.k_hi) + "]";
        csv += csv_line({b.k_lo, b.k_hi, static_cast<double>(b.points), b.plateau, b.standard_error, b.predicted,
                         b.ratio, b.outside});
        jb.push_back({{"k_lo", b.k_lo},
                      {"k_hi", b.k_hi},
                      {"plateau", b.plateau},
                      {"standard_error", b.standard_error},
                      {"predicted", b.predicted},
                      {"ratio", b.ratio},
                      {"outside", std::isfinite(b.outside) ? json(b.outside) : json(nullptr)}});
        if (T == 0.0) {
            rep.add(make_check("plateau " + name + " (T = 0)", b.plateau, 0.0, 0.0, b.plateau == 0.0));
            continue;
        }
        rep.add(make_check("plateau / (g T) " + name, b.ratio, 1.0, 0.1, std::abs(b.ratio - 1.0) <= 0.1));
        if (std::isfinite(b.outside))
            rep.add(make_check("density beyond the wedge front " + name, b.outside, 0.0, 0.05 * max_plateau,
                               std::abs(b.outside) < 0.05 * max_plateau));
        if (half[i].standard_error > 0.0 && b.standard_error > 0.0) {
            auto chk = make_check("stderr(M/2) / stderr(M) " + name, half[i].standard_error / b.standard_error,
                                  std::sqrt(2.0), 0.2 * std::sqrt(2.0),
                                  std::abs(half[i].standard_error / b.standard_error - std::sqrt(2.0)) <=
                                      0.2 * std::sqrt(2.0));
            chk.informational = true;
            rep.add(chk);
        }
    }
    rep.data["bins"] = jb;
    rep.files.push_back({"production.csv", csv});
    rep.files.push_back({"production.gp",
                         "set datafile separator ','\n"
                         "set key autotitle columnhead\n"
                         "set xlabel 'k'\n"
                         "plot 'production.csv' using (($1+$2)/2):4:5 with yerrorbars, "
                         "'' using (($1+$2)/2):6 with linespoints\n"});
}

// ---------------------------------------------------------------- transport check

void cmd_transport_check(Context& ctx) {
    const auto& c = ctx.cfg;
    auto& rep = *ctx.report;
    const auto disp = make_dispersion(c);
    const double gamma = get_num(c, "gamma");
    const double T = get_num(c, "temperature");
    const double delta = get_num(c, "delta_excl");
    const auto initial = get_str(c, "initial");
    const auto& lp = need(c, "limit_packet");
    const auto& spot = need(c, "spot");
    const double lam = get_num(spot, "lambda"), eta = get_num(spot, "eta"), ks = get_num(spot, "k");
    require(gamma >= 0.0 && T >= 0.0, "gamma and temperature must be >= 0");
    require(lam > 0.0, "spot.lambda must be positive");
    InitialWigner W0;
    if (initial == "packet") {
        const double amp = lp.contains("amplitude") ? get_num(lp, "amplitude") : 1.0;
        W0 = InitialWigner::gaussian_packet(get_num(lp, "x_center"), get_num(lp, "sx"), get_num(lp, "k_center"),
                                            get_num(lp, "sk"), amp);
    } else if (initial == "equilibrium") {
        W0 = InitialWigner::equilibrium(T);
    } else if (initial == "zero") {
        W0 = InitialWigner::zero();
    } else {
        throw ConfigError("config key 'initial' must be packet, equilibrium or zero");
    }
    const LimitSolution sol(W0, disp, gamma, T, delta);
    require(disp.distance_to_singular_set(ks) >= delta, "spot.k lies in the exclusion zone");
    ctx.computing = true;

    std::vector<double> ks_grid;
    for (double k : {0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4})
        if (disp.distance_to_singular_set(k) >= delta) ks_grid.push_back(k);
    const std::vector<double> ts{0.5, 1.0, 2.0};

    double bmax = 0.0;
    for (double k : ks_grid)
        for (double t : ts) {
            const auto r = boundary_residual(sol, t, k);
            bmax = std::max({bmax, r.incoming_side, r.mirrored});
        }
    rep.add(upper_bound_check("max boundary residual", bmax, 1e-12));

    double scale = T;
    for (double k : ks_grid)
        for (double x = -1.0; x <= 1.0; x += 0.01) scale = std::max(scale, std::abs(W0.W(x, k)));
    const double h = 1e-5;
    double tmax = 0.0;
    for (double k : ks_grid)
        for (double x : {-0.1, 0.1}) {
            const double vt = disp.group_velocity(k) * 1.0;
            if (std::abs(x - vt) < 100.0 * h) continue;
            tmax = std::max(tmax, transport_residual(sol, 1.0, x, k, h));
        }
    rep.add(upper_bound_check("transport residual / scale at x = +-0.1", scale > 0.0 ? tmax / scale : tmax, 1e-6));

    // equilibrium data stays at equilibrium, whatever the configured initial state
    const double Teq = T > 0.0 ? T : 1.0;
    const LimitSolution eq(InitialWigner::equilibrium(Teq), disp, gamma, Teq, delta);
    double eqmax = 0.0, wmin = std::numeric_limits<double>::infinity();
    for (double k : ks_grid)
        for (double kk : {k, -k})
            for (double t : {0.0, 0.5, 1.0, 2.0, 5.0})
                for (double x = -2.0; x <= 2.0; x += 0.05) {
                    eqmax = std::max(eqmax, std::abs(eq.W(t, x, kk) - Teq));
                    wmin = std::min(wmin, sol.W(t, x, kk));
                }
    rep.add(upper_bound_check("equilibrium invariance max |W - T|", eqmax, 1e-12));
    rep.add(make_check("min W over the sample grid", wmin, 0.0, 0.0, wmin >= 0.0));

    if (W0.W_hat && std::isfinite(W0.support_halfwidth)) {
        const cplx a = laplace_fourier_limit(sol, lam, eta, ks);
        const cplx b = laplace_fourier_numeric(sol, lam, eta, ks);
        rep.add(upper_bound_check("Laplace-Fourier closed form vs quadrature", std::abs(a - b), 1e-3));
        rep.data["transform"] = {{"closed_re", a.real()}, {"closed_im", a.imag()},
                                 {"numeric_re", b.real()}, {"numeric_im", b.imag()}};
    }

    std::string csv = "x,W_k,W_minus_k\n";
    for (int i = 0; i <= 400; ++i) {
        const double x = -1.0 + 0.005 * i;
        csv += csv_line({x, sol.W(1.0, x, ks), sol.W(1.0, x, -ks)});
    }
    rep.files.push_back({"limit_profile.csv", csv});
    rep.files.push_back({"transport.gp",
                         "set datafile separator ','\n"
                         "set key autotitle columnhead\n"
                         "set xlabel 'x'\n"
                         "plot 'limit_profile.csv' using 1:2 with lines, '' using 1:3 with lines\n"});
}

// ---------------------------------------------------------------- equilibrium

void cmd_equilibrium(Context& ctx) {
    const auto& c = ctx.cfg;
    auto& rep = *ctx.report;
    const auto disp = make_dispersion(c);
    const double gamma = get_num(c, "gamma");
    const double T = get_num(c, "temperature");
    const auto N = get_size(c, "N");
    const auto M = get_size(c, "M");
    const double dt = get_num(c, "dt");
    const double t_micro = get_num(c, "t_micro");
    const double every = get_num(c, "record_every");
    const auto n_bins = get_size(c, "n_bins");
    require(T > 0.0, "equilibrium runs need temperature > 0");
    require(M >= 2, "M must be >= 2");
    require(t_micro >= 0.0 && every > 0.0, "need t_micro >= 0 and record_every > 0");
    require(n_bins >= 1 && n_bins <= N / 2, "n_bins must lie in [1, N/2]");
    const DirectSolver solver(disp, N, {gamma, T}, dt);
    const double r = every / dt;
    require(std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, r), "record_every must be a multiple of dt");
    const auto stride = static_cast<std::size_t>(std::llround(r));
    const auto total = static_cast<std::size_t>(std::llround(t_micro / dt));
    ctx.computing = true;

    std::vector<std::size_t> record_steps;
    for (std::size_t n = 0; n <= total; n += stride) record_steps.push_back(n);
    // grid points of each bin; modes with omega = 0 carry only kinetic energy and are left out
    std::vector<std::vector<std::size_t>> pts(n_bins);
    const double nd = static_cast<double>(N);
    for (std::size_t j = 0; j < N; ++j) {
        const double k = wrap_torus(static_cast<double>(j) / nd);
        if (disp.omega(k) == 0.0) continue;
        const auto b = std::min(n_bins - 1, static_cast<std::size_t>((k + 0.5) * static_cast<double>(n_bins)));
        pts[b].push_back(j);
    }
    const double eps = 1.0 / nd;
    // values[path][time][bin]
    std::vector<std::vector<std::vector<double>>> values(M);
    parallel_for(M, ctx.threads, [&](std::size_t p) {
        auto st = sample_gibbs(N, disp, T, ctx.seed + p, gibbs_stream);
        NoisePath noise(ctx.seed + p, dt, noise_stream);
        std::size_t done = 0;
        for (std::size_t n : record_steps) {
            solver.advance(st, noise, n - done);
            done = n;
            const auto spec = wave_spectrum(st, disp);
            std::vector<double> row(n_bins, 0.0);
            for (std::size_t b = 0; b < n_bins; ++b) {
                for (std::size_t j : pts[b]) row[b] += 0.5 * eps * std::norm(spec[j]);
                if (!pts[b].empty()) row[b] /= static_cast<double>(pts[b].size());
            }
            values[p].push_back(std::move(row));
        }
    });

    std::string csv = "t_micro,k_lo,k_hi,mean,standard_error,z\n";
    json jt = json::array();
    for (std::size_t ti = 0; ti < record_steps.size(); ++ti) {
        const double t = dt * static_cast<double>(record_steps[ti]);
        double zmax = 0.0;
        for (std::size_t b = 0; b < n_bins; ++b) {
            if (pts[b].empty()) continue;
            std::vector<double> v(M);
            for (std::size_t p = 0; p < M; ++p) v[p] = values[p][ti][b];
            const double m = mean_of(v), se = sem_of(v, m);
            const double z = se > 0.0 ? std::abs(m - T) / se : std::numeric_limits<double>::infinity();
            zmax = std::max(zmax, z);
            const double lo = -0.5 + static_cast<double>(b) / static_cast<double>(n_bins);
            csv += csv_line({t, lo, lo + 1.0 / static_cast<double>(n_bins), m, se, z});
        }
        jt.push_back({{"t_micro", t}, {"max_z", zmax}});
        rep.add(make_check("max |W(0,k) - T| / stderr over bins at t_micro = " + fmt(t), zmax, 0.0, 3.0, zmax <= 3.0));
    }
    rep.data["times"] = jt;
    rep.files.push_back({"equilibrium.csv", csv});
    rep.files.push_back({"equilibrium.gp",
                         "set datafile separator ','\n"
                         "set key autotitle columnhead\n"
                         "set xlabel 'k'\n"
                         "plot 'equilibrium.csv' using (($2+$3)/2):4:5 with yerrorbars\n"});
}

// ---------------------------------------------------------------- convergence

void cross_solver(Context& ctx, const DispersionRelation& disp, double gamma, double delta) {
    const auto& c = ctx.cfg;
    auto& rep = *ctx.report;
    const auto N = get_size(c, "N");
    const auto dts = get_num_list(c, "dt_list");
    const double t_micro = get_num(c, "t_micro");
    const double dtk = get_num(c, "dt_kernel");
    auto spec = make_packet(c, delta);
    require(t_micro > 0.0, "t_micro must be positive");
    for (double dt : dts) {
        DirectSolver(disp, N, {gamma, 0.0}, dt);
        const double r = t_micro / dt;
        require(std::abs(r - std::round(r)) < 1e-9 * r, "t_micro must be a multiple of every dt in dt_list");
    }
    for (std::size_t i = 1; i < dts.size(); ++i)
        require(std::abs(dts[i] - 0.5 * dts[i - 1]) < 1e-12 * dts[i - 1], "dt_list must halve from entry to entry");
    const auto st0 = sample_initial(spec, N, disp, ctx.seed, phase_stream);
    ctx.computing = true;

    const MemoryKernel mk(disp, gamma, t_micro, dtk);
    const auto spectrum0 = wave_spectrum(st0, disp);
    const auto mild = wave_field_from_spectrum(psi_spectral_mild(spectrum0, mk, t_micro, 0.0, ctx.threads));
    double norm = 0.0;
    for (const auto& z : mild) norm += std::norm(z);
    norm = std::sqrt(norm);

    std::vector<double> errs(dts.size());
    parallel_for(dts.size(), ctx.threads, [&](std::size_t i) {
        auto st = st0;
        const DirectSolver solver(disp, N, {gamma, 0.0}, dts[i]);
        NoisePath noise(ctx.seed, dts[i], noise_stream);
        solver.advance(st, noise, static_cast<std::size_t>(std::llround(t_micro / dts[i])));
        const auto psi = wave_field(st, disp);
        double d = 0.0;
        for (std::size_t y = 0; y < N; ++y) d += std::norm(psi[y] - mild[y]);
        errs[i] = std::sqrt(d) / norm;
    });
    std::string csv = "dt,relative_l2\n";
    json jr = json::array();
    for (std::size_t i = 0; i < dts.size(); ++i) {
        csv += csv_line({dts[i], errs[i]});
        jr.push_back({{"dt", dts[i]}, {"relative_l2", errs[i]}});
        rep.add(upper_bound_check("relative L2 mild vs direct at dt = " + fmt(dts[i]), errs[i], 10.0 * dts[i]));
    }
    for (std::size_t i = 1; i < dts.size(); ++i) {
        const double ratio = errs[i - 1] / errs[i];
        rep.add(make_check("contraction when dt halves to " + fmt(dts[i]), ratio, 1.8, 0.0, ratio >= 1.8));
    }
    rep.data["cross_solver"] = jr;
    rep.files.push_back({"cross_solver.csv", csv});
    rep.files.push_back({"cross_solver.gp",
                         "set datafile separator ','\n"
                         "set key autotitle columnhead\n"
                         "set logscale xy\n"
                         "set xlabel 'dt'\n"
                         "plot 'cross_solver.csv' using 1:2 with linespoints\n"});
}

void energy_checks(Context& ctx, const DispersionRelation& disp, double gamma, double delta) {
    auto& rep = *ctx.report;
    const auto& e = need(ctx.cfg, "energy");
    const auto N = get_size(e, "N");
    const auto M = get_size(e, "M");
    const double T = get_num(e, "temperature");
    const double dt = get_num(e, "dt");
    const double t_micro = get_num(e, "t_micro");
    const double every = get_num(e, "record_every");
    require(M >= 2, "energy.M must be >= 2");
    require(T > 0.0, "energy.temperature must be positive");
    require(t_micro > 0.0 && every > 0.0, "energy.t_micro and energy.record_every must be positive");
    const double r = every / dt;
    require(std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, r), "energy.record_every must be a multiple of dt");
    const auto spec = make_packet(e.contains("packet") ? e : ctx.cfg, delta);
    const DirectSolver hot(disp, N, {gamma, T}, dt);
    const DirectSolver cold(disp, N, {gamma, 0.0}, dt);
    const auto st0 = sample_initial(spec, N, disp, ctx.seed, phase_stream);
    ctx.computing = true;

    const auto stride = static_cast<std::size_t>(std::llround(r));
    const auto total = static_cast<std::size_t>(std::llround(t_micro / dt));
    const double E0 = hot.shadow_energy(st0);
    std::vector<std::size_t> rec;
    for (std::size_t n = stride; n <= total; n += stride) rec.push_back(n);
    std::vector<std::vector<double>> energies(M);
    std::vector<double> balance(M);
    parallel_for(M, ctx.threads, [&](std::size_t p) {
        auto st = st0;
        NoisePath noise(ctx.seed + p, dt, noise_stream);
        std::size_t done = 0;
        Trajectory traj;
        for (std::size_t n : rec) {
            Trajectory piece;
            hot.advance(st, noise, n - done, &piece);
            if (done == 0) traj.energy_start = piece.energy_start;
            traj.steps.insert(traj.steps.end(), piece.steps.begin(), piece.steps.end());
            traj.energy_end = piece.energy_end;
            traj.dt = dt;
            done = n;
            energies[p].push_back(piece.energy_end);
        }
        balance[p] = energy_balance_residual(traj, {gamma, T});
    });
    std::string csv = "t_micro,mean_energy,standard_error,bound\n";
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rec.size(); ++i) {
        std::vector<double> v(M);
        for (std::size_t p = 0; p < M; ++p) v[p] = energies[p][i];
        const double m = mean_of(v), se = sem_of(v, m);
        const double t = dt * static_cast<double>(rec[i]);
        const double bound = E0 + 2.0 * gamma * T * t + 3.0 * se;
        worst = std::max(worst, (m - bound) / E0);
        csv += csv_line({t, m, se, bound});
    }
    rep.add(make_check("max (mean energy - (E0 + 2 gamma T t + 3 sigma)) / E0", worst, 0.0, 0.0, worst <= 0.0));
    std::vector<double> bal(balance);
    auto chk = make_check("mean pathwise energy-balance residual", mean_of(bal), 0.0, 0.0, true,
                          "discretisation diagnostic");
    chk.informational = true;
    rep.add(chk);

    // T = 0: the shadow energy may only decrease
    auto st = st0;
    NoisePath silent(ctx.seed, dt, noise_stream);
    double prev = cold.shadow_energy(st), worst_step = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < total; ++n) {
        cold.step(st, silent);
        const double cur = cold.shadow_energy(st);
        worst_step = std::max(worst_step, (cur - prev) / E0);
        prev = cur;
    }
    rep.add(make_check("T = 0 max per-step energy increase / E0", worst_step, 0.0, 1e-12, worst_step <= 1e-12));
    rep.data["energy"] = {{"E0", E0}, {"worst_margin", worst}, {"worst_step_increase", worst_step}};
    rep.files.push_back({"energy.csv", csv});
    rep.files.push_back({"energy.gp",
                         "set datafile separator ','\n"
                         "set key autotitle columnhead\n"
                         "set xlabel 't'\n"
                         "plot 'energy.csv' using 1:2:3 with yerrorbars, '' using 1:4 with lines\n"});
}

void cmd_convergence(Context& ctx) {
    const auto& c = ctx.cfg;
    const auto disp = make_dispersion(c);
    const double gamma = get_num(c, "gamma");
    const double delta = get_num(c, "delta_excl");
    require(gamma >= 0.0, "gamma must be >= 0");
    const auto& checks = need(c, "checks");
    require(checks.is_array() && !checks.empty(), "config key 'checks' must be a non-empty list");
    std::vector<std::string> which;
    for (const auto& v : checks) {
        require(v.is_string() && (v == "cross_solver" || v == "energy"),
                "config key 'checks' accepts cross_solver and energy");
        which.push_back(v.get<std::string>());
    }
    for (const auto& w : which) {
        ctx.computing = false;
        if (w == "cross_solver") cross_solver(ctx, disp, gamma, delta);
        if (w == "energy") energy_checks(ctx, disp, gamma, delta);
    }
}

using Command = void (*)(Context&);

const std::map<std::string, Command>& command_table() {
    static const std::map<std::string, Command> table{
        {"coefficients", cmd_coefficients}, {"scattering", cmd_scattering},   {"production", cmd_production},
        {"transport_check", cmd_transport_check}, {"equilibrium", cmd_equilibrium}, {"convergence", cmd_convergence},
    };
    return table;
}

const std::map<std::string, json>& preset_table() {
    static const std::map<std::string, json> table{
        {"coefficients",
         {{"kernel", "nn_unpinned"}, {"gamma", 1.0}, {"n_k", 512}, {"delta_excl", 0.02}, {"cross_check", true},
          {"kernel_horizon", 20.0}, {"dt_kernel", 1e-3}, {"seed", 1}}},
        {"scattering",
         {{"kernel", "nn_unpinned"}, {"gamma", 1.0}, {"temperature", 0.0}, {"N_list", {1024, 2048, 4096}},
          {"dt", 0.05}, {"delta_excl", 0.02}, {"window_halfwidth", 0.1}, {"fraction_tol", 0.05}, {"seed", 1},
          {"packet", {{"x_center", -0.2}, {"k_center", 0.25}, {"envelope", "cosine_bump"}, {"width", 0.1},
                      {"amplitude", 1.0}, {"phase_random", true}}}}},
        {"production",
         {{"kernel", "nn_unpinned"}, {"gamma", 1.0}, {"temperature", 1.0}, {"N", 512}, {"M", 1000}, {"dt", 0.05},
          {"t_macro", 0.4}, {"delta_excl", 0.02}, {"seed", 1000},
          {"bins", {{0.15, 0.2}, {0.2, 0.25}, {0.25, 0.3}, {0.3, 0.35}}}}},
        {"transport_check",
         {{"kernel", "nn_unpinned"}, {"gamma", 1.0}, {"temperature", 1.0}, {"delta_excl", 0.02},
          {"initial", "packet"},
          {"limit_packet", {{"x_center", -0.5}, {"sx", 0.05}, {"k_center", 0.25}, {"sk", 0.03}, {"amplitude", 1.0}}},
          {"spot", {{"lambda", 1.0}, {"eta", 2.0}, {"k", 0.25}}}}},
        {"equilibrium",
         {{"kernel", "nn_unpinned"}, {"gamma", 1.0}, {"temperature", 1.0}, {"N", 256}, {"M", 200}, {"dt", 0.05},
          {"t_micro", 1000.0}, {"record_every", 250.0}, {"n_bins", 8}, {"seed", 2000}}},
        {"convergence",
         {{"kernel", "nn_unpinned"}, {"gamma", 1.0}, {"N", 256}, {"dt_list", {0.05, 0.025}}, {"t_micro", 25.0},
          {"dt_kernel", 1e-3}, {"delta_excl", 0.02}, {"seed", 3000}, {"checks", {"cross_solver", "energy"}},
          {"packet", {{"x_center", -0.05}, {"k_center", 0.25}, {"envelope", "cosine_bump"}, {"width", 0.04},
                      {"amplitude", 1.0}, {"phase_random", true}}},
          {"energy", {{"N", 512}, {"M", 200}, {"temperature", 1.0}, {"dt", 0.05}, {"t_micro", 100.0},
                      {"record_every", 5.0},
                      {"packet", {{"x_center", -0.2}, {"k_center", 0.25}, {"width", 0.1}}}}}}},
        {"nn_unpinned", {{"kernel", "nn_unpinned"}}},
        {"nn_pinned", {{"kernel", "nn_pinned(1)"}}},
        {"free", {{"gamma", 0.0}}},
    };
    return table;
}

}  // namespace

// ---------------------------------------------------------------- report

bool RunReport::passed() const {
    if (status != "pass") return false;
    for (const auto& c : checks)
        if (!c.informational && !c.pass) return false;
    return true;
}

int RunReport::exit_code() const {
    if (status == "config_error") return exit_config;
    if (status == "invalid") return exit_invalid_run;
    return passed() ? exit_ok : exit_failed;
}

void RunReport::add(Check c) {
    if (!c.informational && !c.pass && status == "pass") status = "fail";
    checks.push_back(std::move(c));
}

json RunReport::to_json() const {
    auto number = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json jc = json::array();
    for (const auto& c : checks) {
        json j{{"name", c.name},
               {"measured", number(c.measured)},
               {"target", number(c.target)},
               {"tolerance", number(c.tolerance)},
               {"pass", c.pass}};
        if (c.informational) j["informational"] = true;
        if (!c.note.empty()) j["note"] = c.note;
        jc.push_back(j);
    }
    return {{"command", command},
            {"status", status},
            {"exit_code", exit_code()},
            {"message", message},
            {"checks", jc},
            {"data", data},
            {"config", config},
            {"wall_seconds", wall_seconds},
            {"threads", threads},
            {"rng",
             {{"generator", "SplitMix64 counter hash"},
              {"seed", seed},
              {"path_seed", "seed + path index"},
              {"streams", {{"noise", noise_stream}, {"gibbs", gibbs_stream}, {"phase", phase_stream}}}}}};
}

// ---------------------------------------------------------------- config

const std::vector<std::string>& commands() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [k, f] : command_table()) v.push_back(k);
        return v;
    }();
    return names;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> v;
    for (const auto& [k, j] : preset_table()) v.push_back(k);
    return v;
}

json preset(const std::string& name) {
    const auto& t = preset_table();
    auto it = t.find(name);
    if (it == t.end()) throw ConfigError("unknown preset '" + name + "'");
    return it->second;
}

json merge(json base, const json& patch) {
    if (!patch.is_object() || !base.is_object()) return patch;
    for (const auto& [k, v] : patch.items()) {
        if (base.contains(k) && base[k].is_object() && v.is_object())
            base[k] = merge(base[k], v);
        else
            base[k] = v;
    }
    return base;
}

json resolve_config(const std::string& command, const json& user) {
    if (!command_table().count(command)) throw ConfigError("unknown command '" + command + "'");
    if (!user.is_object()) throw ConfigError("config must be a JSON object");
    check_keys(user, top_keys(), "");
    json cfg = preset(command);
    if (user.contains("preset")) {
        const auto& p = user.at("preset");
        std::vector<std::string> names;
        if (p.is_string()) {
            names.push_back(p.get<std::string>());
        } else if (p.is_array()) {
            for (const auto& e : p) {
                if (!e.is_string()) throw ConfigError("config key 'preset' must name presets");
                names.push_back(e.get<std::string>());
            }
        } else {
            throw ConfigError("config key 'preset' must be a name or a list of names");
        }
        for (const auto& n : names) cfg = merge(cfg, preset(n));
    }
    json own = user;
    own.erase("preset");
    cfg = merge(cfg, own);
    check_keys(cfg, top_keys(), "");
    return cfg;
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

RunReport run(const std::string& command, const json& user_config, const RunOptions& options) {
    RunReport rep;
    rep.command = command;
    const auto start = std::chrono::steady_clock::now();
    Context ctx;
    ctx.report = &rep;
    try {
        ctx.cfg = resolve_config(command, user_config);
        if (options.seed) ctx.cfg["seed"] = *options.seed;
        ctx.seed = ctx.cfg.contains("seed") ? static_cast<std::uint64_t>(get_size(ctx.cfg, "seed")) : 1;
        unsigned requested = options.threads;
        if (requested == 0 && !std::getenv("PHONON_SCATTER_THREADS") && ctx.cfg.contains("threads"))
            requested = static_cast<unsigned>(get_size(ctx.cfg, "threads"));
        ctx.threads = resolve_threads(requested);
        rep.config = ctx.cfg;
        rep.seed = ctx.seed;
        rep.threads = ctx.threads;
        command_table().at(command)(ctx);
    } catch (const InvalidRunError& e) {
        rep.status = "invalid";
        rep.message = e.what();
    } catch (const ConfigError& e) {
        rep.status = "config_error";
        rep.message = e.what();
    } catch (const Error& e) {
        rep.status = ctx.computing ? "error" : "config_error";
        rep.message = e.what();
    } catch (const json::exception& e) {
        rep.status = "config_error";
        rep.message = std::string("config: ") + e.what();
    } catch (const std::exception& e) {
        rep.status = "error";
        rep.message = e.what();
    }
    if (rep.config.is_null()) rep.config = user_config;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.out_dir) write_outputs(rep, *options.out_dir);
    return rep;
}

void write_outputs(const RunReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    std::vector<OutputFile> files = report.files;
    files.push_back({"report.json", report.to_json().dump(2) + "\n"});
    json manifest{{"command", report.command},
                  {"status", report.status},
                  {"exit_code", report.exit_code()},
                  {"seed", report.seed},
                  {"files", json::array()}};
    for (const auto& f : files) {
        std::ofstream out(fs::path(dir) / f.name, std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + (fs::path(dir) / f.name).string() + "'");
        out << f.content;
        manifest["files"].push_back({{"name", f.name}, {"bytes", f.content.size()}, {"fnv1a64", hex64(fnv1a(f.content))}});
    }
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
}

}  // namespace phonon::harness
