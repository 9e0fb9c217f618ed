#include "ppide/path.hpp"

#include "ppide/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ppide {

namespace {

bool sameTime(double a, double b) { return std::abs(a - b) <= kTimeTol; }

std::vector<double> mergeTimes(const CadlagPath& a, const CadlagPath& b) {
    std::vector<double> out;
    out.reserve(a.knots().size() + b.knots().size());
    for (const auto& k : a.knots()) out.push_back(k.t);
    for (const auto& k : b.knots()) out.push_back(k.t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [](double x, double y) { return sameTime(x, y); }),
              out.end());
    return out;
}

} // namespace

CadlagPath::CadlagPath(double horizon, Eigen::VectorXd v)
    : horizon_(horizon), dim_(static_cast<int>(v.size())) {
    if (horizon <= 0) throw InputError("CadlagPath: horizon must be positive");
    if (dim_ < 1) throw InputError("CadlagPath: dimension must be >= 1");
    knots_.push_back({0.0, v, v});
}

CadlagPath CadlagPath::zero(double horizon, int dim) {
    return CadlagPath(horizon, Eigen::VectorXd::Zero(dim));
}

CadlagPath CadlagPath::step(double horizon, const std::vector<double>& times,
                            const std::vector<Eigen::VectorXd>& values) {
    if (times.empty() || times.size() != values.size())
        throw InputError("CadlagPath::step: times/values size mismatch");
    if (!sameTime(times.front(), 0.0))
        throw InputError("CadlagPath::step: first knot must be at time 0");
    CadlagPath p(horizon, values.front());
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (times[k] <= times[k - 1] + kTimeTol)
            throw InputError("CadlagPath::step: times must be strictly increasing");
        if (times[k] > horizon + kTimeTol)
            throw InputError("CadlagPath::step: knot beyond horizon");
        p.extendConstantTo(std::min(times[k], horizon));
        p.applyJumpAtEnd(values[k] - values[k - 1]);
    }
    return p;
}

CadlagPath CadlagPath::step(double horizon, const std::vector<double>& times,
                            const std::vector<double>& values) {
    std::vector<Eigen::VectorXd> vv;
    vv.reserve(values.size());
    for (double x : values) vv.push_back(Eigen::VectorXd::Constant(1, x));
    return step(horizon, times, vv);
}

CadlagPath CadlagPath::indicator(double horizon, double a, double z) {
    if (a <= kTimeTol) return CadlagPath(horizon, Eigen::VectorXd::Constant(1, z));
    return step(horizon, std::vector<double>{0.0, a}, std::vector<double>{0.0, z});
}

int CadlagPath::locate(double t) const {
    // Last knot with t_k <= t (up to tolerance).
    int lo = 0, hi = static_cast<int>(knots_.size()) - 1;
    while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        if (knots_[mid].t <= t + kTimeTol) lo = mid;
        else hi = mid - 1;
    }
    return lo;
}

Eigen::VectorXd CadlagPath::value(double t) const {
    t = std::clamp(t, 0.0, horizon_);
    const int k = locate(t);
    const Knot& a = knots_[k];
    if (k + 1 >= static_cast<int>(knots_.size()) || sameTime(t, a.t)) return a.v;
    const Knot& b = knots_[k + 1];
    if (segments_[k] == Interp::Constant) return a.v;
    const double w = (t - a.t) / (b.t - a.t);
    return a.v + w * (b.pre - a.v);
}

Eigen::VectorXd CadlagPath::leftLimit(double t) const {
    t = std::clamp(t, 0.0, horizon_);
    if (t <= kTimeTol) return knots_.front().pre;
    const int k = locate(t);
    if (sameTime(t, knots_[k].t)) return knots_[k].pre;
    return value(t); // interior of a segment: the path is continuous there
}

double CadlagPath::valueScalar(double t) const {
    if (dim_ != 1) throw InputError("CadlagPath::valueScalar: path is not scalar");
    return value(t)(0);
}

int CadlagPath::insertKnot(double t) {
    t = std::clamp(t, 0.0, horizon_);
    if (t > lastTime() + kTimeTol) {
        extendConstantTo(t);
        return static_cast<int>(knots_.size()) - 1;
    }
    const int k = locate(t);
    if (sameTime(t, knots_[k].t)) return k;
    // Split segment k at t; the path is continuous at the new knot.
    const Eigen::VectorXd v = value(t);
    knots_.insert(knots_.begin() + k + 1, Knot{t, v, v});
    segments_.insert(segments_.begin() + k + 1, segments_[k]);
    return k + 1;
}

CadlagPath CadlagPath::stopped(double t) const {
    t = std::clamp(t, 0.0, horizon_);
    CadlagPath out = *this;
    const int k = out.insertKnot(t);
    out.knots_.erase(out.knots_.begin() + k + 1, out.knots_.end());
    out.segments_.erase(out.segments_.begin() + std::min<std::size_t>(k, out.segments_.size()),
                        out.segments_.end());
    return out;
}

CadlagPath CadlagPath::bumped(double t, const Eigen::VectorXd& z) const {
    checkDim(z);
    CadlagPath out = *this;
    t = std::clamp(t, 0.0, horizon_);
    const int k = out.insertKnot(t);
    for (int i = k; i < static_cast<int>(out.knots_.size()); ++i) {
        out.knots_[i].v += z;
        if (i > k) out.knots_[i].pre += z;
    }
    if (t <= kTimeTol) out.knots_[0].pre += z; // a bump from 0 shifts the whole path
    return out;
}

CadlagPath CadlagPath::component(int i) const {
    if (i < 0 || i >= dim_) throw InputError("CadlagPath::component: index out of range");
    CadlagPath out;
    out.horizon_ = horizon_;
    out.dim_ = 1;
    for (const auto& k : knots_)
        out.knots_.push_back({k.t, Eigen::VectorXd::Constant(1, k.v(i)),
                              Eigen::VectorXd::Constant(1, k.pre(i))});
    out.segments_ = segments_;
    return out;
}

std::vector<double> CadlagPath::jumpTimes() const {
    std::vector<double> out;
    for (const auto& k : knots_)
        if ((k.v - k.pre).norm() > 0) out.push_back(k.t);
    return out;
}

double CadlagPath::supDistance(const CadlagPath& a, const CadlagPath& b) {
    if (a.dim() != b.dim()) throw InputError("supDistance: dimension mismatch");
    const std::vector<double> times = mergeTimes(a, b);
    double best = 0.0;
    for (double t : times) {
        best = std::max(best, (a.value(t) - b.value(t)).norm());
        best = std::max(best, (a.leftLimit(t) - b.leftLimit(t)).norm());
    }
    return best;
}

void CadlagPath::extendLinear(double t, const Eigen::VectorXd& v) {
    checkDim(v);
    if (t <= lastTime() + kTimeTol)
        throw InputError("CadlagPath::extendLinear: time must advance");
    knots_.push_back({t, v, v});
    segments_.push_back(Interp::Linear);
}

void CadlagPath::extendConstantTo(double t) {
    if (t <= lastTime() + kTimeTol) return;
    const Eigen::VectorXd v = knots_.back().v;
    knots_.push_back({t, v, v});
    segments_.push_back(Interp::Constant);
}

void CadlagPath::applyJumpAtEnd(const Eigen::VectorXd& z) {
    checkDim(z);
    knots_.back().v += z;
}

void CadlagPath::checkDim(const Eigen::VectorXd& v) const {
    if (static_cast<int>(v.size()) != dim_)
        throw InputError("CadlagPath: vector dimension mismatch");
}

// --- serialization -----------------------------------------------------------

std::string CadlagPath::toJson() const {
    nlohmann::json j;
    j["horizon"] = horizon_;
    j["dim"] = dim_;
    auto& knots = j["knots"] = nlohmann::json::array();
    for (std::size_t k = 0; k < knots_.size(); ++k) {
        nlohmann::json jk;
        jk["t"] = knots_[k].t;
        jk["v"] = std::vector<double>(knots_[k].v.data(), knots_[k].v.data() + dim_);
        if ((knots_[k].v - knots_[k].pre).norm() > 0)
            jk["pre"] = std::vector<double>(knots_[k].pre.data(), knots_[k].pre.data() + dim_);
        if (k < segments_.size())
            jk["interp"] = segments_[k] == Interp::Constant ? "constant" : "linear";
        knots.push_back(jk);
    }
    return j.dump(2);
}

CadlagPath CadlagPath::fromJson(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw InputError(std::string("CadlagPath::fromJson: parse error: ") + e.what());
    }
    if (!j.contains("horizon") || !j.contains("dim") || !j.contains("knots"))
        throw InputError("CadlagPath::fromJson: missing horizon/dim/knots");
    const double horizon = j["horizon"].get<double>();
    const int dim = j["dim"].get<int>();
    const auto& knots = j["knots"];
    if (knots.empty()) throw InputError("CadlagPath::fromJson: empty knot list");

    auto readVec = [dim](const nlohmann::json& arr) {
        if (static_cast<int>(arr.size()) != dim)
            throw InputError("CadlagPath::fromJson: value dimension mismatch");
        Eigen::VectorXd v(dim);
        for (int i = 0; i < dim; ++i) v(i) = arr[i].get<double>();
        return v;
    };

    CadlagPath p(horizon, readVec(knots[0]["v"]));
    Interp lastInterp = Interp::Constant;
    if (knots[0].contains("interp"))
        lastInterp = knots[0]["interp"] == "linear" ? Interp::Linear : Interp::Constant;
    for (std::size_t k = 1; k < knots.size(); ++k) {
        const double t = knots[k]["t"].get<double>();
        const Eigen::VectorXd v = readVec(knots[k]["v"]);
        Eigen::VectorXd pre = knots[k].contains("pre") ? readVec(knots[k]["pre"]) : v;
        if (!knots[k].contains("pre") && lastInterp == Interp::Constant)
            pre = p.knots_.back().v;
        if (t <= p.lastTime() + kTimeTol)
            throw InputError("CadlagPath::fromJson: knot times must increase");
        if (lastInterp == Interp::Linear) p.extendLinear(t, pre);
        else p.extendConstantTo(t);
        p.applyJumpAtEnd(v - pre);
        if (knots[k].contains("interp"))
            lastInterp = knots[k]["interp"] == "linear" ? Interp::Linear : Interp::Constant;
        else
            lastInterp = Interp::Constant;
    }
    return p;
}

std::string CadlagPath::toCsv() const {
    std::ostringstream os;
    os.precision(17);
    os << "t";
    for (int i = 1; i <= dim_; ++i) os << ",x_" << i;
    os << ",jump_flag\n";
    auto row = [&](double t, const Eigen::VectorXd& v, int flag) {
        os << t;
        for (int i = 0; i < dim_; ++i) os << "," << v(i);
        os << "," << flag << "\n";
    };
    for (std::size_t k = 0; k < knots_.size(); ++k) {
        const bool jump = (knots_[k].v - knots_[k].pre).norm() > 0;
        if (jump && k > 0) row(knots_[k].t, knots_[k].pre, 0);
        row(knots_[k].t, knots_[k].v, jump ? 1 : 0);
    }
    return os.str();
}

CadlagPath CadlagPath::fromCsv(const std::string& text, double horizon) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw InputError("CadlagPath::fromCsv: empty input");
    // header: t,x_1,...,x_d,jump_flag
    int cols = 1;
    for (char c : line) cols += (c == ',');
    const int dim = cols - 2;
    if (dim < 1) throw InputError("CadlagPath::fromCsv: need at least one value column");

    CadlagPath p;
    bool first = true;
    double prevT = 0.0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
        if (static_cast<int>(vals.size()) != cols)
            throw InputError("CadlagPath::fromCsv: ragged row");
        const double t = vals[0];
        Eigen::VectorXd v(dim);
        for (int i = 0; i < dim; ++i) v(i) = vals[1 + i];
        if (first) {
            if (!sameTime(t, 0.0))
                throw InputError("CadlagPath::fromCsv: first row must be at time 0");
            p = CadlagPath(horizon, v);
            first = false;
        } else if (sameTime(t, prevT)) {
            // second row at the same stamp: the post-jump value
            p.applyJumpAtEnd(v - p.knots_.back().v);
        } else {
            if (t < prevT) throw InputError("CadlagPath::fromCsv: times must be nondecreasing");
            p.extendLinear(std::min(t, horizon), v);
        }
        prevT = t;
    }
    if (first) throw InputError("CadlagPath::fromCsv: no data rows");
    return p;
}

// --- free functions ----------------------------------------------------------

double d_inf(const TimePoint& a, const TimePoint& b) {
    return std::abs(a.t - b.t) +
           CadlagPath::supDistance(a.path.stopped(a.t), b.path.stopped(b.t));
}

CadlagPath concat(const CadlagPath& prefix, double s,
                  const std::vector<std::pair<double, Eigen::VectorXd>>& levels,
                  const Eigen::VectorXd& tail) {
    const double T = prefix.horizon();
    if (s >= T - kTimeTol) {
        CadlagPath out = prefix.stopped(T);
        out.applyJumpAtEnd(tail - out.value(T));
        return out;
    }
    // Drop levels whose interval [t_j, t_{j+1}) is empty; a later level at the
    // same stamp supersedes an earlier one.
    std::vector<std::pair<double, Eigen::VectorXd>> eff;
    for (const auto& lv : levels) {
        double t = std::clamp(lv.first, s, T);
        if (t >= T - kTimeTol) continue; // the terminal value is `tail`
        if (!eff.empty() && t <= eff.back().first + kTimeTol) eff.back().second = lv.second;
        else eff.emplace_back(t, lv.second);
    }
    CadlagPath out = prefix.stopped(s);
    for (std::size_t j = 0; j < eff.size(); ++j) {
        if (j == 0 && eff[0].first <= s + kTimeTol) {
            // The first level replaces the prefix value at s itself.
            out.applyJumpAtEnd(eff[0].second - out.value(s));
        } else {
            out.extendConstantTo(eff[j].first);
            out.applyJumpAtEnd(eff[j].second - out.value(eff[j].first));
        }
    }
    out.extendConstantTo(T);
    out.applyJumpAtEnd(tail - out.value(T));
    return out;
}

} // namespace ppide
