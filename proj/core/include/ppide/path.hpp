#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ppide {

// Tolerance used whenever two time stamps are compared or two grids merged.
inline constexpr double kTimeTol = 1e-12;

// A cadlag path on [0, horizon] with values in R^d, stored as a finite knot
// sequence.  Each knot carries the right-continuous value `v` and the left
// limit `pre` at its time (pre == v means the path is continuous there).
// The segment between knot k and knot k+1 is either
//   - Constant: value v_k on [t_k, t_{k+1}), so pre_{k+1} == v_k, or
//   - Linear:   value interpolates v_k -> pre_{k+1} on [t_k, t_{k+1}).
// Past the last knot the path is extended by a constant, so a path is usable
// while it is still being grown by the simulator.  A jump exactly at the
// horizon is represented by a final knot with pre != v.
class CadlagPath {
public:
    enum class Interp { Constant, Linear };

    struct Knot {
        double t;
        Eigen::VectorXd v;   // value at t (right limit)
        Eigen::VectorXd pre; // left limit at t
    };

    CadlagPath() : horizon_(0), dim_(0) {}

    // Constant path equal to `v` on [0, horizon].
    CadlagPath(double horizon, Eigen::VectorXd v);

    // Zero path of the given dimension.
    static CadlagPath zero(double horizon, int dim);

    // Piecewise-constant path: value values[k] on [times[k], times[k+1]) and
    // values.back() from times.back() to the horizon.  Requires times[0] == 0
    // and strictly increasing times.
    static CadlagPath step(double horizon, const std::vector<double>& times,
                           const std::vector<Eigen::VectorXd>& values);

    // Scalar convenience overload of step().
    static CadlagPath step(double horizon, const std::vector<double>& times,
                           const std::vector<double>& values);

    // Scalar indicator z * 1_{[a, horizon]}.
    static CadlagPath indicator(double horizon, double a, double z = 1.0);

    double horizon() const { return horizon_; }
    int dim() const { return dim_; }
    const std::vector<Knot>& knots() const { return knots_; }
    const std::vector<Interp>& segments() const { return segments_; }
    double lastTime() const { return knots_.back().t; }

    // Right-continuous evaluation; t is clamped to [0, horizon].
    Eigen::VectorXd value(double t) const;
    // Left limit at t (equals value(0) at t == 0).
    Eigen::VectorXd leftLimit(double t) const;
    // Scalar accessors for d == 1.
    double valueScalar(double t) const;

    // The stopped path s -> value(min(s, t)).
    CadlagPath stopped(double t) const;

    // The bumped path s -> value(s) + z * 1_{s >= t} (a flat bump from t on).
    CadlagPath bumped(double t, const Eigen::VectorXd& z) const;

    // Coordinate path (scalar) of component i.
    CadlagPath component(int i) const;

    // Times at which the path actually jumps (value != left limit), in order.
    std::vector<double> jumpTimes() const;

    // Largest pointwise distance sup_{s} |a(s) - b(s)| in the Euclidean norm,
    // computed exactly from the merged knot grids (both paths are piecewise
    // linear/constant, so the sup is attained at a knot or a left limit).
    static double supDistance(const CadlagPath& a, const CadlagPath& b);

    // --- builder operations used by the simulator ---------------------------

    // Extend with a linear segment ending at (t, v); t must exceed lastTime().
    void extendLinear(double t, const Eigen::VectorXd& v);
    // Extend with a constant segment up to time t.
    void extendConstantTo(double t);
    // Add a jump of size z at the current end knot (pre keeps the old value).
    void applyJumpAtEnd(const Eigen::VectorXd& z);

    // --- serialization -------------------------------------------------------

    // JSON object {"horizon":.., "dim":.., "knots":[{"t":..,"v":[..],
    // "interp":"constant"|"linear", "pre":[..]?}, ...]}; "interp" tags the
    // segment that starts at the knot and "pre" is emitted only at jumps.
    std::string toJson() const;
    static CadlagPath fromJson(const std::string& text);

    // CSV rows "t,x_1,...,x_d,jump_flag".  A jump knot is written as two rows
    // with the same time stamp: first the left limit (flag 0), then the
    // post-jump value (flag 1).
    std::string toCsv() const;
    static CadlagPath fromCsv(const std::string& text, double horizon);

private:
    // Index of the segment/knot governing time t (last knot with t_k <= t).
    int locate(double t) const;
    // Materialize a knot exactly at time t (splitting a segment if needed)
    // and return its index.
    int insertKnot(double t);
    void checkDim(const Eigen::VectorXd& v) const;

    double horizon_;
    int dim_;
    std::vector<Knot> knots_;
    std::vector<Interp> segments_; // size knots_.size() - 1
};

// A point (t, omega) of the time-path domain.
struct TimePoint {
    double t = 0.0;
    CadlagPath path;
};

// Pseudometric |t - t'| + sup-norm distance between the two stopped paths.
// It ignores everything either path does after its own time stamp.
double d_inf(const TimePoint& a, const TimePoint& b);

// Piecewise-constant concatenation used by the path-freezing construction:
// `prefix` strictly before time s, then level levels[j].second on
// [levels[j].first, levels[j+1].first), and `tail` at the horizon itself.
// Level times must be nondecreasing and >= s; empty intervals are dropped.
CadlagPath concat(const CadlagPath& prefix, double s,
                  const std::vector<std::pair<double, Eigen::VectorXd>>& levels,
                  const Eigen::VectorXd& tail);

} // namespace ppide
