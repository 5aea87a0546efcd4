// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>

#include "phonon/harness.hpp"
#include "phonon/interface_scattering.hpp"
#include "phonon/memory_kernel.hpp"
#include "phonon/wigner_kinetics.hpp"

using namespace phonon;
using harness::json;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

// Worst failing (or else last) check of a report, for the summary line.
void absorb(Outcome& o, const harness::RunReport& r, const std::string& label) {
    if (r.exit_code() != harness::exit_ok) {
        o.pass = false;
        o.detail += label + ": status " + r.status + (r.message.empty() ? "" : " (" + r.message + ")") + "; ";
    }
    for (const auto& c : r.checks) {
        if (c.informational) continue;
        if (!c.pass) o.detail += label + ": FAILED " + c.name + " = " + fmt(c.measured) + "; ";
    }
}

double worst_measured(const harness::RunReport& r, const std::string& prefix) {
    double w = 0.0;
    for (const auto& c : r.checks)
        if (c.name.rfind(prefix, 0) == 0) w = std::max(w, std::abs(c.measured));
    return w;
}

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) {
        o.pass = false;
        o.detail += "runtime over budget; ";
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %2d  %-34s | %s| %.1f s (budget %.0f s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(),
                o.detail.c_str(), secs, budget_s);
    std::fflush(stdout);
}

const std::vector<std::string> kernels{"nn_unpinned", "nn_pinned(1)"};
const std::vector<double> gammas{0.5, 1.0, 2.0};

}  // namespace

int main() {
    criterion(1, "coefficient identities", 10, [] {
        Outcome o;
        double id = 0.0, re = 0.0;
        for (const auto& k : kernels)
            for (double g : gammas) {
                const auto r = harness::run("coefficients", json{{"kernel", k}, {"gamma", g}, {"cross_check", false}});
                absorb(o, r, k + " gamma " + fmt(g));
                id = std::max(id, worst_measured(r, "max |p+"));
                re = std::max(re, worst_measured(r, "max |Re nu"));
            }
        o.pass = o.pass && o.detail.empty();
        o.detail = "max identity " + fmt(id, 2) + " (< 1e-8), max Re nu " + fmt(re, 2) + " (< 1e-6) " + o.detail;
        return o;
    });

    criterion(2, "nu cross-oracle", 30, [] {
        Outcome o;
        double worst = 0.0;
        for (const auto& k : kernels)
            for (double g : gammas) {
                const auto r = harness::run("coefficients", json{{"kernel", k}, {"gamma", g}, {"cross_check", true}});
                absorb(o, r, k + " gamma " + fmt(g));
                worst = std::max(worst, worst_measured(r, "max |nu_pv"));
            }
        o.pass = o.pass && o.detail.empty();
        o.detail = "max |nu_pv - nu_laplace| " + fmt(worst, 2) + " (< 1e-3) " + o.detail;
        return o;
    });

    criterion(3, "kernel oracles", 10, [] {
        const DispersionRelation nn(CouplingKernel::nn_unpinned());
        const double dt = 0.01;
        const auto J = sample_J(nn, 5001, dt);
        double bessel = 0.0;
        for (std::size_t n = 0; n < J.size(); ++n)
            bessel = std::max(bessel, std::abs(J[n] - boost::math::cyl_bessel_j(0, 2.0 * dt * static_cast<double>(n))));
        const MemoryKernel mk(nn, 1.0, 5.0, 1e-3);
        const double lap = std::abs(mk.J_laplace(1.0) - 1.0 / std::sqrt(5.0));
        const auto series = mk.g_star_series_samples(5.0, 60);
        double sv = 0.0;
        for (std::size_t n = 0; n < series.size(); ++n) sv = std::max(sv, std::abs(series[n] - mk.gstar_samples()[n]));
        Outcome o;
        o.pass = bessel < 1e-8 && lap < 1e-10 && sv < 1e-6;
        o.detail = "|J - J0(2t)| " + fmt(bessel, 2) + " (< 1e-8), |J~(1) - 1/sqrt5| " + fmt(lap, 2) +
                   " (< 1e-10), series vs Volterra " + fmt(sv, 2) + " (< 1e-6) ";
        return o;
    });

    criterion(4, "cross-solver dynamics", 60, [] {
        Outcome o;
        const auto r = harness::run("convergence", json{{"checks", {"cross_solver"}}});
        absorb(o, r, "convergence");
        o.pass = o.detail.empty();
        std::string d;
        for (const auto& c : r.checks) d += c.name + " " + fmt(c.measured) + "; ";
        o.detail = d + o.detail;
        return o;
    });

    criterion(5, "energy balance", 300, [] {
        Outcome o;
        const auto r = harness::run("convergence", json{{"checks", {"energy"}}});
        absorb(o, r, "convergence");
        o.pass = o.detail.empty();
        std::string d;
        for (const auto& c : r.checks) d += c.name + " " + fmt(c.measured, 3) + (c.informational ? " [info]" : "") + "; ";
        o.detail = d + o.detail;
        return o;
    });

    criterion(6, "scattering fractions", 600, [] {
        Outcome o;
        const auto r = harness::run("scattering", json::object(), {std::nullopt, std::nullopt, 1});
        absorb(o, r, "scattering");
        o.pass = o.detail.empty();
        std::string d;
        if (r.data.contains("runs"))
            for (const auto& run : r.data["runs"])
                d += "N " + std::to_string(run["N"].get<std::size_t>()) + " err " +
                     fmt(run["max_error"].get<double>(), 3) + "; ";
        if (r.data.contains("runs") && !r.data["runs"].empty()) {
            const auto& last = r.data["runs"].back();
            const auto& p = r.data["predicted"];
            d += "(T, R, A) = (" + fmt(last["transmitted"].get<double>()) + ", " + fmt(last["reflected"].get<double>()) +
                 ", " + fmt(last["absorbed"].get<double>()) + ") vs (" + fmt(p["p_plus"].get<double>()) + ", " +
                 fmt(p["p_minus"].get<double>()) + ", " + fmt(p["g"].get<double>()) + "); ";
        }
        o.detail = d + o.detail;
        return o;
    });

    criterion(7, "phonon production", 1200, [] {
        Outcome o;
        const auto r = harness::run("production", json::object());
        absorb(o, r, "production");
        o.pass = o.detail.empty();
        std::string d = "ratios";
        if (r.data.contains("bins"))
            for (const auto& b : r.data["bins"]) d += " " + fmt(b["ratio"].get<double>());
        o.detail = d + " (within 1 +- 0.1); " + o.detail;
        return o;
    });

    criterion(8, "thermal Laplace formula", 600, [] {
        const DispersionRelation nn(CouplingKernel::nn_unpinned());
        const double gamma = 1.0, T = 1.0, lambda = 1.0, k = 0.25;
        const std::vector<int> ms{0, 16, 32};
        const auto s = thermal_wigner_series(nn, {gamma, T}, 2048, 1.0 / 128, 0.05, 11.0, k, ms, 4);
        const double wp = nn.omega_prime(k);
        const double nu2 = std::norm(nu_pv(nn, gamma, k));
        Outcome o;
        o.detail = "relative error at eta";
        for (std::size_t i = 0; i < ms.size(); ++i) {
            const cplx got = laplace_trapezoid(s.times, s.values[i], lambda);
            const cplx want = gamma * T * nu2 / (lambda * (lambda + cplx{0.0, wp * s.eta[i]}));
            const double rel = std::abs(got - want) / std::abs(want);
            o.pass = o.pass && rel < 0.1;
            o.detail += " " + fmt(s.eta[i], 2) + ": " + fmt(rel, 3);
        }
        o.detail += " (< 0.1) ";
        return o;
    });

    criterion(9, "transport closed form", 10, [] {
        Outcome o;
        const auto r = harness::run("transport_check", json::object());
        absorb(o, r, "transport_check");
        o.pass = o.detail.empty();
        std::string d;
        for (const auto& c : r.checks) d += c.name + " " + fmt(c.measured, 2) + "; ";
        o.detail = d + o.detail;
        return o;
    });

    criterion(10, "equilibrium stationarity", 600, [] {
        Outcome o;
        const auto r = harness::run("equilibrium", json::object());
        absorb(o, r, "equilibrium");
        o.pass = o.detail.empty();
        o.detail = "max z over bins and times " + fmt(worst_measured(r, "max |W(0,k)"), 3) + " (<= 3) " + o.detail;
        return o;
    });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
