#include "ppide/skorohod.hpp"

#include "ppide/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ppide {

namespace {

void requireScalar(const CadlagPath& w, const char* where) {
    if (w.dim() != 1) throw InputError(std::string(where) + ": path must be scalar");
}

// Sorted sample times: the uniform mesh plus every knot time of the path and
// of its comparison partner (shared stamps let the diagonal coupling realize
// the uniform distance, so the metric ordering holds without slack).
std::vector<double> sampleTimes(const CadlagPath& w, double mesh,
                                const CadlagPath* partner = nullptr) {
    std::vector<double> times;
    const double T = w.horizon();
    for (double t = 0.0; t < T; t += mesh) times.push_back(t);
    times.push_back(T);
    for (const auto& k : w.knots()) times.push_back(k.t);
    if (partner)
        for (const auto& k : partner->knots())
            if (k.t <= T) times.push_back(k.t);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(),
                            [](double a, double b) { return std::abs(a - b) <= kTimeTol; }),
                times.end());
    return times;
}

// Min-max dynamic program over monotone couplings of two traversals (the
// discrete Frechet distance under the cost max(|dt|, |dx|)).  Any monotone
// coupling extends to a pair of continuous parametric representations with the
// same sup cost, so the value is a certified upper bound of the metric it
// discretizes.
double frechetMinMax(const std::vector<double>& t1, const std::vector<double>& x1,
                     const std::vector<double>& t2, const std::vector<double>& x2) {
    const std::size_t n = t1.size(), m = t2.size();
    auto cost = [&](std::size_t i, std::size_t j) {
        return std::max(std::abs(t1[i] - t2[j]), std::abs(x1[i] - x2[j]));
    };
    std::vector<double> prev(m), cur(m);
    prev[0] = cost(0, 0);
    for (std::size_t j = 1; j < m; ++j) prev[j] = std::max(prev[j - 1], cost(0, j));
    for (std::size_t i = 1; i < n; ++i) {
        cur[0] = std::max(prev[0], cost(i, 0));
        for (std::size_t j = 1; j < m; ++j) {
            const double reach = std::min({prev[j], cur[j - 1], prev[j - 1]});
            cur[j] = std::max(reach, cost(i, j));
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

double defaultMesh(const CadlagPath& a) { return a.horizon() / 1024.0; }

// One element of the J1 traversal: a jump is kept atomic (both one-sided
// values travel together), because an admissible time change maps a jump of
// one path either onto a jump of the other or onto a point where the other is
// continuous -- in both cases the sup cost sees both one-sided values at one
// matched time.  Splitting the jump into two independently matchable points
// would silently relax J1 towards M1.
struct J1Event {
    double t;
    double a; // left value
    double b; // right value
};

std::vector<J1Event> j1Events(const CadlagPath& w, double mesh,
                              const CadlagPath* partner = nullptr) {
    std::vector<J1Event> out;
    for (double t : sampleTimes(w, mesh, partner)) {
        const double pre = w.leftLimit(t)(0);
        const double v = w.value(t)(0);
        out.push_back({t, pre, v});
    }
    return out;
}

double frechetJ1(const std::vector<J1Event>& p, const std::vector<J1Event>& q) {
    const std::size_t n = p.size(), m = q.size();
    auto cost = [&](std::size_t i, std::size_t j) {
        return std::max(std::abs(p[i].t - q[j].t),
                        std::max(std::abs(p[i].a - q[j].a), std::abs(p[i].b - q[j].b)));
    };
    std::vector<double> prev(m), cur(m);
    prev[0] = cost(0, 0);
    for (std::size_t j = 1; j < m; ++j) prev[j] = std::max(prev[j - 1], cost(0, j));
    for (std::size_t i = 1; i < n; ++i) {
        cur[0] = std::max(prev[0], cost(i, 0));
        for (std::size_t j = 1; j < m; ++j) {
            const double reach = std::min({prev[j], cur[j - 1], prev[j - 1]});
            cur[j] = std::max(reach, cost(i, j));
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

} // namespace

ParametricRepresentation j1Representation(const CadlagPath& w, double mesh) {
    requireScalar(w, "j1Representation");
    ParametricRepresentation rep;
    for (double t : sampleTimes(w, mesh)) {
        const double pre = w.leftLimit(t)(0);
        const double v = w.value(t)(0);
        if (std::abs(v - pre) > 0) {
            rep.r.push_back(t);
            rep.z.push_back(pre);
        }
        rep.r.push_back(t);
        rep.z.push_back(v);
    }
    return rep;
}

CompletedGraph completedGraphMerged(const CadlagPath& w, double mesh, int n_params,
                                    const CadlagPath* partner) {
    requireScalar(w, "completedGraph");
    if (n_params < 1) throw InputError("completedGraph: n_params must be >= 1");
    CompletedGraph g;
    for (double t : sampleTimes(w, mesh, partner)) {
        const double pre = w.leftLimit(t)(0);
        const double v = w.value(t)(0);
        if (std::abs(v - pre) > 0) {
            for (int k = 0; k <= n_params; ++k) {
                g.t.push_back(t);
                g.x.push_back(pre + (v - pre) * static_cast<double>(k) / n_params);
            }
        } else {
            g.t.push_back(t);
            g.x.push_back(v);
        }
    }
    return g;
}

CompletedGraph completedGraph(const CadlagPath& w, double mesh, int n_params) {
    return completedGraphMerged(w, mesh, n_params, nullptr);
}

double d_u(const CadlagPath& a, const CadlagPath& b) {
    return CadlagPath::supDistance(a, b);
}

double d_j1(const CadlagPath& a, const CadlagPath& b, double mesh) {
    requireScalar(a, "d_j1");
    requireScalar(b, "d_j1");
    if (mesh <= 0) mesh = defaultMesh(a);
    // Coarse-to-fine: each level is a certified upper bound, so the running
    // minimum is one too.  The dyadic chain is anchored at a fixed coarsest
    // level, so a finer request evaluates a superset of levels and the
    // returned value can only decrease under refinement.
    double best = std::numeric_limits<double>::infinity();
    const double coarsest = a.horizon() / 8.0;
    for (double m = mesh; m <= coarsest + kTimeTol; m *= 2.0)
        best = std::min(best, frechetJ1(j1Events(a, m, &b), j1Events(b, m, &a)));
    return best;
}

double d_m1(const CadlagPath& a, const CadlagPath& b, int n_params) {
    requireScalar(a, "d_m1");
    requireScalar(b, "d_m1");
    if (n_params < 1) throw InputError("d_m1: n_params must be >= 1");
    const double mesh = defaultMesh(a);
    double best = d_j1(a, b); // valid M1 bound: d_M1 <= d_J1
    std::vector<int> levels;
    for (int n = n_params; n >= 1; n /= 2) levels.push_back(n);
    for (int n : levels) {
        const CompletedGraph ga = completedGraphMerged(a, mesh, n, &b);
        const CompletedGraph gb = completedGraphMerged(b, mesh, n, &a);
        best = std::min(best, frechetMinMax(ga.t, ga.x, gb.t, gb.x));
    }
    return best;
}

namespace {

// Distance from a point to a segment under max(|dt|, |dx|); both coordinates
// are affine in the segment parameter, so the max is convex piecewise linear
// and the minimum is attained at one of a handful of breakpoints.
double pointSegment(double pt, double px, double t0, double x0, double t1, double x1) {
    const double a1 = t0 - pt, b1 = t1 - t0;
    const double a2 = x0 - px, b2 = x1 - x0;
    auto eval = [&](double u) {
        u = std::clamp(u, 0.0, 1.0);
        return std::max(std::abs(a1 + b1 * u), std::abs(a2 + b2 * u));
    };
    double best = std::min(eval(0.0), eval(1.0));
    if (b1 != 0) best = std::min(best, eval(-a1 / b1));
    if (b2 != 0) best = std::min(best, eval(-a2 / b2));
    if (b1 != b2) best = std::min(best, eval(-(a1 - a2) / (b1 - b2)));
    if (b1 != -b2) best = std::min(best, eval(-(a1 + a2) / (b1 + b2)));
    return best;
}

// One-sided Hausdorff distance from graph A to graph B, sampling each segment
// of A with n_params points and minimizing over the segments of B exactly.
double directedHausdorff(const CompletedGraph& A, const CompletedGraph& B, int n_params) {
    double worst = 0.0;
    for (std::size_t s = 0; s + 1 <= A.t.size(); ++s) {
        const bool last = (s + 1 == A.t.size());
        for (int k = 0; k <= (last ? 0 : n_params); ++k) {
            const double u = last ? 0.0 : static_cast<double>(k) / n_params;
            const double pt = A.t[s] + (last ? 0.0 : u * (A.t[s + 1] - A.t[s]));
            const double px = A.x[s] + (last ? 0.0 : u * (A.x[s + 1] - A.x[s]));
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q + 1 < B.t.size(); ++q)
                best = std::min(best, pointSegment(pt, px, B.t[q], B.x[q], B.t[q + 1], B.x[q + 1]));
            best = std::min(best, std::max(std::abs(pt - B.t.back()), std::abs(px - B.x.back())));
            worst = std::max(worst, best);
            if (last) break;
        }
    }
    return worst;
}

} // namespace

double d_m2(const CadlagPath& a, const CadlagPath& b, int n_params) {
    requireScalar(a, "d_m2");
    requireScalar(b, "d_m2");
    // Knot-based graphs: no mesh refinement is needed because the graphs are
    // exact polylines; n_params only controls the sampling of the sup side.
    const double coarse = std::max(a.horizon(), b.horizon()); // one sample per segment endpoints
    const CompletedGraph ga = completedGraph(a, coarse, 1);
    const CompletedGraph gb = completedGraph(b, coarse, 1);
    return std::max(directedHausdorff(ga, gb, n_params),
                    directedHausdorff(gb, ga, n_params));
}

double d_p(const CadlagPath& a, const CadlagPath& b, int n_params) {
    if (a.dim() != b.dim()) throw InputError("d_p: dimension mismatch");
    double worst = 0.0;
    for (int i = 0; i < a.dim(); ++i)
        worst = std::max(worst, d_m1(a.component(i), b.component(i), n_params));
    return worst;
}

} // namespace ppide
