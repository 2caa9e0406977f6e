#include "forward_yield/stochastic_core.hpp"

#include "forward_yield/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace forward_yield {

TimeGrid::TimeGrid(double horizon, std::size_t n_steps)
    : horizon_(horizon), n_steps_(n_steps), dt_(0.0) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw DomainError("time grid horizon must be positive and finite");
    }
    if (n_steps == 0) {
        throw DomainError("time grid needs at least one step");
    }
    dt_ = horizon / static_cast<double>(n_steps);
}

double TimeGrid::time(std::size_t k) const {
    if (k > n_steps_) {
        throw DomainError("grid index out of range");
    }
    // The last point is pinned to the horizon so t_N == horizon exactly.
    return k == n_steps_ ? horizon_ : static_cast<double>(k) * dt_;
}

bool TimeGrid::contains(double t) const {
    if (t < -1e-12 || t > horizon_ * (1.0 + 1e-12)) {
        return false;
    }
    const double k = std::round(t / dt_);
    return std::abs(k * dt_ - t) <= 1e-9 * dt_;
}

std::size_t TimeGrid::index_of(double t) const {
    if (!contains(t)) {
        std::ostringstream msg;
        msg << "time " << t << " is not a point of the grid (dt = " << dt_ << ", horizon = "
            << horizon_ << ")";
        throw DomainError(msg.str());
    }
    return static_cast<std::size_t>(std::llround(t / dt_));
}

TimeGrid make_grid(double horizon, std::size_t n_steps) { return TimeGrid(horizon, n_steps); }

std::vector<double> PathMatrix::column(std::size_t k) const {
    std::vector<double> out(n_paths_);
    for (std::size_t p = 0; p < n_paths_; ++p) {
        out[p] = (*this)(p, k);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path, StreamTag tag,
                         std::uint64_t extra) {
    const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    const auto t = static_cast<std::uint64_t>(tag);
    std::seed_seq seq{lo(seed), hi(seed), lo(path), hi(path), lo(t), lo(extra), hi(extra)};
    return std::mt19937_64(seq);
}

BrownianBatch::BrownianBatch(std::uint64_t seed, std::size_t n_paths, std::size_t n_steps,
                             std::size_t dim, double dt, std::vector<double> increments)
    : seed_(seed),
      n_paths_(n_paths),
      n_steps_(n_steps),
      dim_(dim),
      dt_(dt),
      increments_(std::move(increments)) {
    if (increments_.size() != n_paths * n_steps * dim) {
        throw DomainError("brownian increment array has the wrong size");
    }
}

BrownianBatch sample_brownian(std::uint64_t seed, const TimeGrid& grid, std::size_t dim,
                              std::size_t n_paths) {
    if (dim == 0) {
        throw DomainError("brownian dimension must be at least 1");
    }
    if (n_paths == 0) {
        throw DomainError("need at least one path");
    }
    const std::size_t per_path = grid.n_steps() * dim;
    const double sd = std::sqrt(grid.dt());
    std::vector<double> inc(n_paths * per_path);
    parallel_for(n_paths, [&](std::size_t p) {
        auto rng = path_rng(seed, p, StreamTag::brownian);
        std::normal_distribution<double> normal(0.0, 1.0);
        double* out = inc.data() + p * per_path;
        for (std::size_t i = 0; i < per_path; ++i) {
            out[i] = sd * normal(rng);
        }
    });
    return BrownianBatch(seed, n_paths, grid.n_steps(), dim, grid.dt(), std::move(inc));
}

// ---------------------------------------------------------------------------

DeterministicFn DeterministicFn::constant(Vec value) {
    const auto dim = static_cast<std::size_t>(value.size());
    if (dim == 0) {
        throw DomainError("deterministic function needs a non-empty value");
    }
    return DeterministicFn("constant", dim, [value = std::move(value)](double) { return value; });
}

DeterministicFn DeterministicFn::constant_scalar(double value) {
    return constant(Vec::Constant(1, value));
}

DeterministicFn DeterministicFn::closed_form(std::string tag, std::size_t dim,
                                             std::function<Vec(double)> f) {
    if (!f) {
        throw DomainError("closed-form deterministic function is empty");
    }
    return DeterministicFn(std::move(tag), dim, std::move(f));
}

DeterministicFn DeterministicFn::piecewise(const TimeGrid& grid, std::vector<Vec> values) {
    if (values.size() != grid.n_steps() && values.size() != grid.n_points()) {
        throw DomainError("piecewise table must cover every grid step");
    }
    const auto dim = static_cast<std::size_t>(values.front().size());
    for (const auto& v : values) {
        if (static_cast<std::size_t>(v.size()) != dim) {
            throw DomainError("piecewise table entries have inconsistent dimension");
        }
    }
    if (values.size() == grid.n_steps()) {
        values.push_back(values.back());
    }
    return DeterministicFn(dim, Table{grid.dt(), grid.horizon(), std::move(values)});
}

Vec DeterministicFn::operator()(double t) const {
    if (const auto* f = std::get_if<std::function<Vec(double)>>(&rep_)) {
        return (*f)(t);
    }
    const auto& table = std::get<Table>(rep_);
    if (t < -1e-12 || t > table.horizon * (1.0 + 1e-12)) {
        throw DomainError("piecewise function evaluated outside [0, horizon]");
    }
    // Left-endpoint convention: t in [t_k, t_{k+1}) maps to k. A tiny slack
    // keeps grid points from rounding into the previous step.
    auto k = static_cast<std::size_t>(std::floor(t / table.dt + 1e-9));
    k = std::min(k, table.values.size() - 1);
    return table.values[k];
}

double DeterministicFn::scalar(double t) const {
    if (dim_ != 1) {
        throw DomainError("scalar() called on a vector-valued function");
    }
    return (*this)(t)(0);
}

std::vector<Vec> DeterministicFn::on_grid(const TimeGrid& grid) const {
    std::vector<Vec> out;
    out.reserve(grid.n_points());
    for (std::size_t k = 0; k < grid.n_points(); ++k) {
        out.push_back((*this)(grid.time(k)));
    }
    return out;
}

// ---------------------------------------------------------------------------

SubspaceR::SubspaceR(std::size_t dim, std::vector<Vec> orthonormal_basis)
    : dim_(dim), basis_(std::move(orthonormal_basis)) {
    if (dim == 0) {
        throw DomainError("subspace ambient dimension must be positive");
    }
    if (basis_.size() > dim) {
        throw DomainError("more basis vectors than the ambient dimension");
    }
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        if (static_cast<std::size_t>(basis_[i].size()) != dim) {
            throw DomainError("basis vector has the wrong dimension");
        }
        for (std::size_t j = i; j < basis_.size(); ++j) {
            const double expected = i == j ? 1.0 : 0.0;
            if (std::abs(basis_[i].dot(basis_[j]) - expected) > 1e-12) {
                throw DomainError("subspace basis is not orthonormal to 1e-12");
            }
        }
    }
}

SubspaceR SubspaceR::span_of(std::size_t dim, const std::vector<Vec>& vectors) {
    std::vector<Vec> basis;
    for (const auto& v : vectors) {
        if (static_cast<std::size_t>(v.size()) != dim) {
            throw DomainError("spanning vector has the wrong dimension");
        }
        Vec w = v;
        // Two passes of modified Gram-Schmidt keep orthogonality at 1e-15.
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) {
                w -= b.dot(w) * b;
            }
        }
        const double n = w.norm();
        if (n > 1e-10 * std::max(1.0, v.norm())) {
            basis.push_back(w / n);
        }
    }
    return SubspaceR(dim, std::move(basis));
}

SubspaceR SubspaceR::full(std::size_t dim) {
    std::vector<Vec> basis;
    for (std::size_t i = 0; i < dim; ++i) {
        basis.push_back(Vec::Unit(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(i)));
    }
    return SubspaceR(dim, std::move(basis));
}

SubspaceR SubspaceR::empty(std::size_t dim) { return SubspaceR(dim, {}); }

Vec SubspaceR::proj_R(const Vec& v) const {
    if (static_cast<std::size_t>(v.size()) != dim_) {
        throw DomainError("projected vector has the wrong dimension");
    }
    Vec out = Vec::Zero(static_cast<Eigen::Index>(dim_));
    for (const auto& b : basis_) {
        out += b.dot(v) * b;
    }
    return out;
}

Vec SubspaceR::proj_perp(const Vec& v) const { return v - proj_R(v); }

Projection SubspaceR::project(const Vec& v) const {
    Vec in = proj_R(v);
    Vec perp = v - in;
    return {std::move(in), std::move(perp)};
}

bool SubspaceR::contains(const Vec& v, double tol) const {
    return proj_perp(v).norm() <= tol * std::max(1.0, v.norm());
}

bool SubspaceR::orthogonal_to(const Vec& v, double tol) const {
    return proj_R(v).norm() <= tol * std::max(1.0, v.norm());
}

Projection project(const SubspaceR& s, const Vec& v) { return s.project(v); }

// ---------------------------------------------------------------------------

namespace {

// Neumaier-compensated sum in index order, so that estimators that are linear
// in the samples stay linear to rounding of the result.
template <class F>
double compensated_sum(std::span<const double> xs, F term) {
    double sum = 0.0;
    double comp = 0.0;
    for (double x : xs) {
        const double v = term(x);
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    return sum + comp;
}

}  // namespace

Estimate mean_stderr(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n == 0) {
        throw EstimationError("no samples");
    }
    const double mean = compensated_sum(samples, [](double x) { return x; }) / static_cast<double>(n);
    if (n == 1) {
        return {mean, 0.0};
    }
    const double ss =
        compensated_sum(samples, [mean](double x) { return (x - mean) * (x - mean); });
    const double var = ss / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

namespace {

IntervalDrift interval_from(std::span<const double> increments, double t0, double t1,
                            double band) {
    const Estimate e = mean_stderr(increments);
    IntervalDrift d{t0, t1, e.mean, e.std_error, 0.0, false};
    if (e.std_error > 0.0) {
        d.t_stat = e.mean / e.std_error;
        d.flagged = std::abs(d.t_stat) > band;
    } else {
        // Zero sample variance: any nonzero mean is an exact drift.
        d.t_stat = e.mean == 0.0 ? 0.0 : std::copysign(INFINITY, e.mean);
        d.flagged = std::abs(e.mean) > 0.0;
    }
    return d;
}

}  // namespace

DriftReport drift_report(const PathMatrix& process, const TimeGrid& grid, double band) {
    if (process.n_cols() != grid.n_points()) {
        throw DomainError("process does not match the grid");
    }
    DriftReport report;
    report.band = band;
    const std::size_t n = process.n_paths();
    std::vector<double> inc(n);
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        for (std::size_t p = 0; p < n; ++p) {
            inc[p] = process(p, k + 1) - process(p, k);
        }
        auto d = interval_from(inc, grid.time(k), grid.time(k + 1), band);
        report.any_flagged = report.any_flagged || d.flagged;
        report.max_abs_t_stat = std::max(report.max_abs_t_stat, std::abs(d.t_stat));
        report.intervals.push_back(d);
    }
    for (std::size_t p = 0; p < n; ++p) {
        inc[p] = process(p, grid.n_steps()) - process(p, 0);
    }
    report.total = interval_from(inc, 0.0, grid.horizon(), band);
    report.any_flagged = report.any_flagged || report.total.flagged;
    return report;
}

// ---------------------------------------------------------------------------

std::size_t worker_count() {
    if (const char* env = std::getenv("FORWARD_YIELD_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) {
            return static_cast<std::size_t>(v);
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) {
            break;
        }
        threads.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) {
                    body(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

double dot(const Vec& a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        s += a(static_cast<Eigen::Index>(i)) * b[i];
    }
    return s;
}

}  // namespace forward_yield
