#include "ppide/experiment.hpp"

#include "ppide/bsde.hpp"
#include "ppide/errors.hpp"
#include "ppide/operators.hpp"
#include "ppide/path.hpp"
#include "ppide/pathfrozen.hpp"
#include "ppide/simulate.hpp"
#include "ppide/skorohod.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace ppide {

namespace {

using nlohmann::json;

const json& jreq(const json& j, const std::string& key) {
    if (!j.contains(key))
        throw InputError("config: missing required field \"" + key + "\"");
    return j.at(key);
}

Eigen::VectorXd parseVec(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

Eigen::MatrixXd parseMat(const json& j) {
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

Characteristics parseChi(const json& j, double horizon) {
    const json& c = jreq(j, "characteristics");
    JumpMeasure jumps;
    if (c.contains("jumps"))
        for (const auto& a : c["jumps"])
            jumps.atoms.push_back({parseVec(jreq(a, "z")), jreq(a, "weight").get<double>()});
    Characteristics chi = Characteristics::constant(
        horizon, parseVec(jreq(c, "drift")), parseMat(jreq(c, "sigma")), std::move(jumps),
        c.value("bound", 1.0), c.value("min_jump_size", 0.0));
    chi.validate();
    return chi;
}

CadlagPath parsePath(const json& j, double horizon, int dim) {
    if (j.is_null()) return CadlagPath::zero(horizon, dim);
    if (j.is_object() && j.contains("csv")) {
        std::ifstream in(j["csv"].get<std::string>());
        if (!in) throw InputError("config: cannot open path CSV " + j["csv"].get<std::string>());
        std::stringstream ss;
        ss << in.rdbuf();
        return CadlagPath::fromCsv(ss.str(), horizon);
    }
    return CadlagPath::fromJson(j.dump());
}

Driver parseDriver(const json& j) {
    Driver d;
    const json spec = j.contains("driver") ? j["driver"] : json::object();
    const std::string type = spec.value("type", "zero");
    const double kappa = spec.value("kappa", 0.0);
    const double alpha = spec.value("alpha", 0.0);
    const double beta = spec.value("beta", 0.0);
    if (type == "zero") {
        d.f = [](double, const CadlagPath&, double, const Eigen::VectorXd&, double) {
            return 0.0;
        };
    } else if (type == "affine") {
        d.f = [kappa, alpha, beta](double, const CadlagPath&, double y,
                                   const Eigen::VectorXd&, double p) {
            return kappa + alpha * y + beta * p;
        };
        d.monotoneInP = beta >= 0;
    } else {
        throw InputError("config: unknown driver type \"" + type + "\"");
    }
    d.lipschitz = std::max(std::abs(alpha), std::abs(beta));
    d.eta = [](double, const CadlagPath&, const Eigen::VectorXd& z) {
        return std::min(1.0, z.norm());
    };
    if (spec.contains("eta0")) {
        const double eta0 = spec["eta0"].get<double>();
        d.eta = [eta0](double, const CadlagPath&, const Eigen::VectorXd&) { return eta0; };
    }
    return d;
}

// Exact integral of the scalar path over [0, horizon].
double pathIntegral(const CadlagPath& w) {
    double acc = 0.0;
    const auto& knots = w.knots();
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double dt = knots[k + 1].t - knots[k].t;
        if (w.segments()[k] == CadlagPath::Interp::Constant)
            acc += knots[k].v(0) * dt;
        else
            acc += 0.5 * (knots[k].v(0) + knots[k + 1].pre(0)) * dt;
    }
    acc += knots.back().v(0) * (w.horizon() - knots.back().t);
    return acc;
}

double pathRunningMax(const CadlagPath& w) {
    double m = 0.0;
    for (const auto& k : w.knots()) m = std::max({m, k.v.norm(), k.pre.norm()});
    return m;
}

std::function<double(const CadlagPath&)> parseXi(const json& j) {
    const json spec = j.contains("xi") ? j["xi"] : json::object();
    const std::string type = spec.value("type", "constant");
    const double scale = spec.value("scale", 1.0);
    if (type == "constant") {
        const double c = spec.value("c", 0.0);
        return [c](const CadlagPath&) { return c; };
    }
    if (type == "terminal") {
        const std::string g = spec.value("g", "identity");
        if (g == "identity")
            return [scale](const CadlagPath& w) { return scale * w.value(w.horizon())(0); };
        if (g == "exp") {
            const double lambda = spec.value("lambda", 1.0);
            return [scale, lambda](const CadlagPath& w) {
                return scale * std::exp(lambda * w.value(w.horizon())(0));
            };
        }
        if (g == "call") {
            const double strike = spec.value("strike", 0.0);
            return [scale, strike](const CadlagPath& w) {
                return scale * std::max(w.value(w.horizon())(0) - strike, 0.0);
            };
        }
        throw InputError("config: unknown terminal payoff \"" + g + "\"");
    }
    if (type == "running_max")
        return [scale](const CadlagPath& w) { return scale * pathRunningMax(w); };
    if (type == "average")
        return [scale](const CadlagPath& w) { return scale * pathIntegral(w); };
    throw InputError("config: unknown xi type \"" + type + "\"");
}

RegressionBasis parseBasis(const json& j) {
    RegressionBasis b;
    if (j.contains("basis")) {
        b.degree = j["basis"].value("degree", 2);
        b.useRunningMax = j["basis"].value("running_max", false);
        b.useLastJump = j["basis"].value("last_jump", false);
    }
    return b;
}

struct McParams {
    int n_paths = 10000;
    double h = 0.0;
};

McParams parseMc(const json& j, double horizon) {
    McParams mc;
    mc.h = horizon / 256.0;
    if (j.contains("mc")) {
        mc.n_paths = j["mc"].value("n_paths", 10000);
        if (j["mc"].contains("h")) mc.h = j["mc"]["h"].get<double>();
    }
    return mc;
}

std::string fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

} // namespace

ExperimentConfig ExperimentConfig::fromText(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw InputError(std::string("config: JSON parse error: ") + e.what());
    }
    ExperimentConfig cfg;
    cfg.kind = j.value("kind", "");
    cfg.seed = j.value("seed", 1ULL);
    cfg.raw = text;
    return cfg;
}

ExperimentConfig ExperimentConfig::fromFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return fromText(ss.str());
}

RunResult run(const ExperimentConfig& cfg, const std::string& outDir) {
    const json j = json::parse(cfg.raw);
    const double horizon = j.value("horizon", 1.0);
    const std::uint64_t seed = cfg.seed;
    const std::string kind = cfg.kind;

    json report;
    report["kind"] = kind;
    report["seed"] = seed;
    report["config_hash"] = fnv1a(json::parse(cfg.raw).dump());

    std::vector<std::pair<std::string, std::string>> files; // name -> contents

    if (kind == "simulate") {
        const Characteristics chi = parseChi(j, horizon);
        const McParams mc = parseMc(j, horizon);
        const json start = j.contains("start") ? j["start"] : json::object();
        const double t0 = start.value("t", 0.0);
        const CadlagPath prefix =
            parsePath(start.contains("path") ? start["path"] : json(), horizon, chi.dim);
        const Ensemble ens = simulate(chi, t0, prefix, mc.n_paths, mc.h, seed);

        Eigen::VectorXd mean = Eigen::VectorXd::Zero(chi.dim);
        Eigen::VectorXd sq = Eigen::VectorXd::Zero(chi.dim);
        double jumpsPerPath = 0.0;
        for (int p = 0; p < ens.size(); ++p) {
            const Eigen::VectorXd xT = ens.paths[p].value(horizon);
            mean += xT;
            sq += xT.cwiseProduct(xT);
            jumpsPerPath += static_cast<double>(ens.jumps[p].size());
        }
        mean /= ens.size();
        sq /= ens.size();
        report["n_paths"] = ens.size();
        report["steps"] = ens.steps();
        report["terminal_mean"] = std::vector<double>(mean.data(), mean.data() + chi.dim);
        json var = json::array();
        for (int i = 0; i < chi.dim; ++i) var.push_back(sq(i) - mean(i) * mean(i));
        report["terminal_var"] = var;
        report["mean_jumps_per_path"] = jumpsPerPath / ens.size();

        const int nfiles = std::min(ens.size(), j.value("max_path_files", 8));
        for (int p = 0; p < nfiles; ++p)
            files.emplace_back("sample_path_" + std::to_string(p) + ".csv",
                               ens.paths[p].toCsv());
    } else if (kind == "u0" || kind == "solve-bsde") {
        const Characteristics chi = parseChi(j, horizon);
        const McParams mc = parseMc(j, horizon);
        const Driver driver = parseDriver(j);
        const auto xi = parseXi(j);
        const json start = j.contains("start") ? j["start"] : json::object();
        const double t0 = start.value("t", 0.0);
        const CadlagPath prefix =
            parsePath(start.contains("path") ? start["path"] : json(), horizon, chi.dim);
        const Ensemble ens = simulate(chi, t0, prefix.stopped(t0), mc.n_paths, mc.h, seed);
        const BsdeSolution sol = solve_bsde(ens, chi, xi, driver, parseBasis(j));
        report["value"] = sol.rootValue;
        report["se"] = sol.rootSe;
        report["basis_size"] = sol.basisSize;
    } else if (kind == "gexpect") {
        const Characteristics chi = parseChi(j, horizon);
        const McParams mc = parseMc(j, horizon);
        const auto xi = parseXi(j);
        const double L = j.value("penalty", 1.0);
        const json start = j.contains("start") ? j["start"] : json::object();
        const double t0 = start.value("t", 0.0);
        const CadlagPath prefix =
            parsePath(start.contains("path") ? start["path"] : json(), horizon, chi.dim);
        const Driver d = parseDriver(j); // only eta is used here
        const ValueEstimate up = nonlinear_expectation(chi, L, t0, prefix, {}, xi, true,
                                                       mc.n_paths, mc.h, seed, parseBasis(j),
                                                       d.eta);
        const ValueEstimate lo = nonlinear_expectation(chi, L, t0, prefix, {}, xi, false,
                                                       mc.n_paths, mc.h, seed, parseBasis(j),
                                                       d.eta);
        report["upper"] = {{"value", up.value}, {"se", up.se}};
        report["lower"] = {{"value", lo.value}, {"se", lo.se}};
    } else if (kind == "snell") {
        const Characteristics chi = parseChi(j, horizon);
        const McParams mc = parseMc(j, horizon);
        const double L = j.value("penalty", 0.0);
        const json bspec = jreq(j, "barrier");
        const std::string btype = bspec.value("type", "put");
        const double strike = bspec.value("strike", 1.0);
        std::function<double(double, const CadlagPath&)> barrier;
        if (btype == "put")
            barrier = [strike](double t, const CadlagPath& w) {
                return std::max(strike - w.value(t)(0), 0.0);
            };
        else if (btype == "call")
            barrier = [strike](double t, const CadlagPath& w) {
                return std::max(w.value(t)(0) - strike, 0.0);
            };
        else
            throw InputError("config: unknown barrier type \"" + btype + "\"");
        const json start = j.contains("start") ? j["start"] : json::object();
        const double t0 = start.value("t", 0.0);
        const CadlagPath prefix =
            parsePath(start.contains("path") ? start["path"] : json(), horizon, chi.dim);
        const Ensemble ens = simulate(chi, t0, prefix.stopped(t0), mc.n_paths, mc.h, seed);
        const Driver d = parseDriver(j);
        const RbsdeSolution sol =
            solve_rbsde(ens, chi, barrier, L, parseBasis(j), d.eta);
        report["value"] = sol.rootValue;
        report["se"] = sol.rootSe;
        double tmean = 0.0, kmean = 0.0;
        for (int p = 0; p < ens.size(); ++p) {
            tmean += sol.tauStar[p];
            kmean += sol.kbar(sol.kbar.rows() - 1, p);
        }
        report["mean_stop_time"] = tmean / ens.size();
        report["mean_reflection"] = kmean / ens.size();
    } else if (kind == "ibp-check") {
        const Characteristics chi = parseChi(j, horizon);
        const McParams mc = parseMc(j, horizon);
        auto parseSemi = [&](const json& s) {
            SemimartingaleSpec out;
            out.s0 = s.value("s0", 0.0);
            const double beta = s.value("beta", 0.0);
            out.beta = [beta](double, const CadlagPath&) { return beta; };
            const Eigen::VectorXd H = s.contains("H") ? parseVec(s["H"])
                                                      : Eigen::VectorXd::Zero(chi.dim);
            out.H = [H](double, const CadlagPath&) { return H; };
            const double w0 = s.value("w0", 0.0), w1 = s.value("w1", 0.0);
            out.W = [w0, w1](double, const CadlagPath&, const Eigen::VectorXd& z) {
                return w0 + w1 * z(0);
            };
            return out;
        };
        const SemimartingaleSpec s1 = parseSemi(jreq(j, "s1"));
        const SemimartingaleSpec s2 = parseSemi(jreq(j, "s2"));
        const json start = j.contains("start") ? j["start"] : json::object();
        const double t0 = start.value("t", 0.0);
        const CadlagPath prefix =
            parsePath(start.contains("path") ? start["path"] : json(), horizon, chi.dim);
        const IbpReport rep = ibp_check(chi, s1, s2, t0, prefix, mc.n_paths, mc.h, seed);
        report["lhs"] = rep.lhs;
        report["rhs"] = rep.rhs;
        report["diff"] = rep.lhs - rep.rhs;
        report["se"] = rep.se;
    } else if (kind == "metric") {
        const json& m = jreq(j, "metric");
        const std::string mk = m.value("kind", "u");
        const int n_params = m.value("n_params", 64);
        const CadlagPath a = parsePath(jreq(m, "path_a"), horizon, 1);
        const CadlagPath b = parsePath(jreq(m, "path_b"), horizon, a.dim());
        double value = 0.0;
        if (mk == "u") value = d_u(a, b);
        else if (mk == "j1") value = d_j1(a, b);
        else if (mk == "m1") value = d_m1(a, b, n_params);
        else if (mk == "m2") value = d_m2(a, b, n_params);
        else if (mk == "p") value = d_p(a, b, n_params);
        else throw InputError("config: unknown metric kind \"" + mk + "\"");
        report["metric_kind"] = mk;
        report["value"] = value;
    } else if (kind == "residual") {
        const Characteristics chi = parseChi(j, horizon);
        const Driver driver = parseDriver(j);
        const json jj = jreq(j, "jet");
        const double a = jj.value("a", 0.0), bcoef = jj.value("b", 0.0),
                     ccoef = jj.value("c", 0.0);
        // Quadratic state functional u(t, w) = a t + b w_t + c w_t^2.
        FunctionalJet jet;
        jet.u = [a, bcoef, ccoef](double t, const CadlagPath& w) {
            const double x = w.value(t)(0);
            return a * t + bcoef * x + ccoef * x * x;
        };
        jet.dt = [a](double, const CadlagPath&) { return a; };
        jet.dw = [bcoef, ccoef](double t, const CadlagPath& w) {
            return Eigen::VectorXd::Constant(1, bcoef + 2.0 * ccoef * w.value(t)(0));
        };
        jet.dww = [ccoef](double, const CadlagPath&) {
            return Eigen::MatrixXd::Constant(1, 1, 2.0 * ccoef);
        };
        const json start = j.contains("start") ? j["start"] : json::object();
        const double t0 = start.value("t", 0.0);
        const CadlagPath prefix =
            parsePath(start.contains("path") ? start["path"] : json(), horizon, chi.dim);
        report["classical_residual"] = classical_residual(jet, chi, driver, t0, prefix);
        if (j.contains("ito")) {
            const McParams mc = parseMc(j, horizon);
            const double radius = j["ito"].value("radius", 1.0);
            const ItoReport ir =
                ito_residual(jet, chi, t0, prefix, radius, mc.n_paths, mc.h, seed);
            report["ito_residual"] = ir.residual;
            report["ito_se"] = ir.se;
        }
    } else if (kind == "path-frozen") {
        const Characteristics chi = parseChi(j, horizon);
        const Driver driver = parseDriver(j);
        const auto xi = parseXi(j);
        const json start = j.contains("start") ? j["start"] : json::object();
        const double t0 = start.value("t", 0.0);
        const CadlagPath prefix =
            parsePath(start.contains("path") ? start["path"] : json(), horizon, chi.dim);
        const json pf = j.contains("pathfrozen") ? j["pathfrozen"] : json::object();
        PsiParams params;
        params.eps = pf.value("eps", 0.25);
        params.depth = pf.value("depth", 3);
        params.degT = pf.value("deg_t", 2);
        params.degX = pf.value("deg_x", 3);
        params.nx = pf.value("nx", 48);
        params.nt = pf.value("nt", 48);
        params.mc.n_paths = pf.value("n_paths", 4000);
        params.mc.h = pf.value("h", horizon / 128.0);
        params.mc.seed = seed;
        Psi psi = build_psi(chi, driver, xi, t0, prefix, params);
        const Psi::Audit audit = psi.audit();
        // Independent estimate of the skeleton value for the sandwich check.
        FrozenSkeleton root;
        root.anchorTime = t0;
        root.anchorPath = prefix;
        root.pairs = {{t0, prefix.value(t0)}};
        ThetaParams indep = params.mc;
        indep.eps = params.eps;
        indep.seed = seed + 7919;
        const ValueEstimate th = theta(chi, driver, xi, root, t0, prefix.value(t0), indep);
        report["theta1"] = th.value;
        report["theta1_se"] = th.se;
        report["psi_anchor"] = audit.psiAnchor;
        report["eps"] = audit.eps;
        report["lower_margin"] = audit.psiAnchor - th.value;
        report["upper_margin"] = th.value + audit.eps - audit.psiAnchor;
        if (j.contains("probes")) {
            const McParams mc = parseMc(j, horizon);
            std::vector<TimePoint> pts;
            for (const auto& pr : j["probes"])
                pts.push_back({pr.value("t", t0), prefix});
            const auto rows = partial_comparison_check(chi, driver, xi, psi, pts,
                                                       mc.n_paths, mc.h, seed + 104729,
                                                       j.value("slack", 0.05));
            json jr = json::array();
            bool all = true;
            for (const auto& r : rows) {
                jr.push_back({{"t", r.t}, {"u0", r.u0}, {"u0_se", r.u0se},
                              {"psi", r.psi}, {"ok", r.ok}});
                all = all && r.ok;
            }
            report["comparison"] = jr;
            report["comparison_ok"] = all;
        }
    } else if (kind == "stability") {
        const Characteristics chi = parseChi(j, horizon);
        const Driver driver = parseDriver(j);
        const auto xi = parseXi(j);
        const McParams mc = parseMc(j, horizon);
        std::vector<double> scales = {0.1, 0.05, 0.025};
        if (j.contains("scales")) {
            scales.clear();
            for (const auto& s : j["scales"]) scales.push_back(s.get<double>());
        }
        std::vector<TimePoint> probes;
        if (j.contains("probes"))
            for (const auto& pr : j["probes"]) {
                TimePoint tp;
                tp.t = pr.value("t", 0.0);
                tp.path = pr.contains("path") ? parsePath(pr["path"], horizon, chi.dim)
                                              : CadlagPath::zero(horizon, chi.dim);
                probes.push_back(tp);
            }
        if (probes.empty()) probes.push_back({0.0, CadlagPath::zero(horizon, chi.dim)});

        std::vector<double> base;
        for (std::size_t i = 0; i < probes.size(); ++i)
            base.push_back(u0(chi, driver, xi, probes[i].t, probes[i].path, mc.n_paths,
                              mc.h, seed + i, parseBasis(j)).value);
        json sweeps = json::array();
        double prev = -1.0;
        bool monotone = true;
        for (auto it = scales.begin(); it != scales.end(); ++it) {
            const double s = *it;
            Characteristics chip = chi;
            const auto bfn = chi.drift;
            const auto sfn = chi.dispersion;
            chip.drift = [bfn, s](double t, const CadlagPath& w) {
                return (bfn(t, w).array() + s).matrix().eval();
            };
            chip.dispersion = [sfn, s](double t, const CadlagPath& w) {
                return (sfn(t, w) * (1.0 + s)).eval();
            };
            chip.bound = chi.bound + s + 1.0;
            double worst = 0.0;
            for (std::size_t i = 0; i < probes.size(); ++i)
                worst = std::max(worst,
                                 std::abs(u0(chip, driver, xi, probes[i].t, probes[i].path,
                                             mc.n_paths, mc.h, seed + i, parseBasis(j)).value -
                                          base[i]));
            sweeps.push_back({{"scale", s}, {"sup_diff", worst}});
            if (prev >= 0 && worst > prev) monotone = false;
            prev = worst;
        }
        report["sweeps"] = sweeps;
        report["monotone"] = monotone;
    } else {
        throw InputError("config: unknown experiment kind \"" + kind + "\"");
    }

    RunResult result;
    result.configHash = report["config_hash"].get<std::string>();
    result.reportJson = report.dump(2) + "\n";

    if (!outDir.empty()) {
        std::filesystem::create_directories(outDir);
        std::ofstream(std::filesystem::path(outDir) / "report.json") << result.reportJson;
        for (const auto& [name, contents] : files)
            std::ofstream(std::filesystem::path(outDir) / name) << contents;
    }
    return result;
}

} // namespace ppide
