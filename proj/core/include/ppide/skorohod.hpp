#pragma once

#include "ppide/path.hpp"

#include <vector>

namespace ppide {

// A monotone traversal of a (completed graph of a) scalar path: time stamps
// r[i] paired with spatial samples z[i].  For the J1-style sequences a jump
// contributes its two one-sided values; for the M1-style sequences the whole
// vertical segment between them is discretized.
struct ParametricRepresentation {
    std::vector<double> r;
    std::vector<double> z;
};

// Vertices of the completed graph of a scalar path: the usual graph plus the
// vertical segments that bridge each jump, in graph order.
struct CompletedGraph {
    std::vector<double> t;
    std::vector<double> x;
};

// Traversal with one sample per mesh time plus both one-sided values at each
// jump (the J1 view of the path).
ParametricRepresentation j1Representation(const CadlagPath& w, double mesh);

// Traversal that additionally discretizes every jump segment with n_params
// interior samples (the M1 view / completed graph).
CompletedGraph completedGraph(const CadlagPath& w, double mesh, int n_params);

// Uniform distance sup_t |w(t) - w'(t)| (exact on the merged knot grid).
double d_u(const CadlagPath& a, const CadlagPath& b);

// Skorohod J1 distance, approximated from above by a min-max dynamic program
// over monotone couplings of the two J1 traversals; `mesh` controls the time
// discretization (default horizon/1024).  Refining the mesh never increases
// the returned value.
double d_j1(const CadlagPath& a, const CadlagPath& b, double mesh = -1.0);

// Skorohod (weak) M1 distance, approximated from above by the same dynamic
// program over completed-graph traversals with n_params samples per jump.
// The result is clamped by the J1 bound so that d_m1 <= d_j1 <= d_u holds for
// the computed values exactly as it does for the true metrics.  Refining
// n_params never increases the returned value.
double d_m1(const CadlagPath& a, const CadlagPath& b, int n_params = 64);

// M2 distance: the Hausdorff distance between the two completed graphs under
// the metric max(|dt|, |dx|), computed by segment-to-segment enumeration.
double d_m2(const CadlagPath& a, const CadlagPath& b, int n_params = 64);

// Product distance for d-dimensional paths: the largest coordinatewise M1
// distance.
double d_p(const CadlagPath& a, const CadlagPath& b, int n_params = 64);

} // namespace ppide
