#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace forward_yield {

using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Time grid

/// Uniform grid t_k = k * dt on [0, horizon].
class TimeGrid {
   public:
    TimeGrid(double horizon, std::size_t n_steps);

    double horizon() const { return horizon_; }
    std::size_t n_steps() const { return n_steps_; }
    double dt() const { return dt_; }
    double time(std::size_t k) const;
    std::size_t n_points() const { return n_steps_ + 1; }

    /// Index of the grid point equal to t (within 1e-9 * dt). Throws if t is
    /// not on the grid.
    std::size_t index_of(double t) const;
    bool contains(double t) const;

   private:
    double horizon_;
    std::size_t n_steps_;
    double dt_;
};

TimeGrid make_grid(double horizon, std::size_t n_steps);

// ---------------------------------------------------------------------------
// Path storage

/// Row-major [n_paths x n_cols] array of doubles.
class PathMatrix {
   public:
    PathMatrix() = default;
    PathMatrix(std::size_t n_paths, std::size_t n_cols, double fill = 0.0)
        : n_paths_(n_paths), n_cols_(n_cols), data_(n_paths * n_cols, fill) {}

    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_cols() const { return n_cols_; }

    double& operator()(std::size_t p, std::size_t k) { return data_[p * n_cols_ + k]; }
    double operator()(std::size_t p, std::size_t k) const { return data_[p * n_cols_ + k]; }

    std::span<double> row(std::size_t p) { return {data_.data() + p * n_cols_, n_cols_}; }
    std::span<const double> row(std::size_t p) const {
        return {data_.data() + p * n_cols_, n_cols_};
    }

    /// Column k across all paths, in path order.
    std::vector<double> column(std::size_t k) const;

    const std::vector<double>& data() const { return data_; }

   private:
    std::size_t n_paths_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Randomness

/// Purpose tags keep independent random streams apart for the same
/// (seed, path) pair.
enum class StreamTag : std::uint64_t {
    brownian = 0,
    short_rate_bridge = 1,
    nested_inner = 2,
};

/// Deterministic generator for one (seed, path, purpose) triple. Results do
/// not depend on how paths are partitioned across threads.
std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path, StreamTag tag,
                         std::uint64_t extra = 0);

/// Brownian increments on a grid: [n_paths x n_steps x dim], each N(0, dt).
class BrownianBatch {
   public:
    BrownianBatch(std::uint64_t seed, std::size_t n_paths, std::size_t n_steps, std::size_t dim,
                  double dt, std::vector<double> increments);

    std::uint64_t seed() const { return seed_; }
    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_steps() const { return n_steps_; }
    std::size_t dim() const { return dim_; }
    double dt() const { return dt_; }

    /// dW over step k on path p (length dim).
    std::span<const double> increment(std::size_t p, std::size_t k) const {
        return {increments_.data() + (p * n_steps_ + k) * dim_, dim_};
    }
    const std::vector<double>& raw() const { return increments_; }

   private:
    std::uint64_t seed_;
    std::size_t n_paths_;
    std::size_t n_steps_;
    std::size_t dim_;
    double dt_;
    std::vector<double> increments_;
};

BrownianBatch sample_brownian(std::uint64_t seed, const TimeGrid& grid, std::size_t dim,
                              std::size_t n_paths);

// ---------------------------------------------------------------------------
// Deterministic functions of time

/// Scalar- or vector-valued deterministic function on [0, horizon]. Either a
/// closed form or a left-endpoint piecewise-constant table on a grid.
class DeterministicFn {
   public:
    static DeterministicFn constant(Vec value);
    static DeterministicFn constant_scalar(double value);
    static DeterministicFn closed_form(std::string tag, std::size_t dim,
                                       std::function<Vec(double)> f);
    /// values[k] holds the value on [t_k, t_{k+1}); values.size() must be
    /// n_steps or n_steps + 1 (the last entry then covers t = horizon).
    static DeterministicFn piecewise(const TimeGrid& grid, std::vector<Vec> values);

    std::size_t dim() const { return dim_; }
    const std::string& tag() const { return tag_; }

    Vec operator()(double t) const;
    double scalar(double t) const;

    /// Values at the grid points t_0 .. t_{n_steps}.
    std::vector<Vec> on_grid(const TimeGrid& grid) const;

   private:
    struct Table {
        double dt;
        double horizon;
        std::vector<Vec> values;
    };

    DeterministicFn(std::string tag, std::size_t dim, std::function<Vec(double)> f)
        : tag_(std::move(tag)), dim_(dim), rep_(std::move(f)) {}
    DeterministicFn(std::size_t dim, Table table)
        : tag_("piecewise"), dim_(dim), rep_(std::move(table)) {}

    std::string tag_;
    std::size_t dim_;
    std::variant<std::function<Vec(double)>, Table> rep_;
};

// ---------------------------------------------------------------------------
// Admissible subspace

struct Projection {
    Vec in_subspace;
    Vec orthogonal;
};

/// Constant subspace R of R^dim described by an orthonormal basis.
class SubspaceR {
   public:
    /// Throws DomainError unless the basis is orthonormal to 1e-12.
    SubspaceR(std::size_t dim, std::vector<Vec> orthonormal_basis);

    /// Orthonormalises an arbitrary spanning family (dependent vectors dropped).
    static SubspaceR span_of(std::size_t dim, const std::vector<Vec>& vectors);
    static SubspaceR full(std::size_t dim);
    static SubspaceR empty(std::size_t dim);

    std::size_t dim() const { return dim_; }
    const std::vector<Vec>& basis() const { return basis_; }
    std::size_t rank() const { return basis_.size(); }

    Projection project(const Vec& v) const;
    Vec proj_R(const Vec& v) const;
    Vec proj_perp(const Vec& v) const;

    bool contains(const Vec& v, double tol = 1e-12) const;
    bool orthogonal_to(const Vec& v, double tol = 1e-12) const;

   private:
    std::size_t dim_;
    std::vector<Vec> basis_;
};

Projection project(const SubspaceR& s, const Vec& v);

// ---------------------------------------------------------------------------
// Statistics shared by the Monte Carlo estimators

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Sample mean and standard error, summed in index order.
Estimate mean_stderr(std::span<const double> samples);

struct IntervalDrift {
    double t0;
    double t1;
    double mean;
    double std_error;
    double t_stat;
    bool flagged;
};

/// Per-interval sample drift of a path functional plus the total drift
/// G_T - G_0. An interval is flagged when |mean| > band * std_error.
struct DriftReport {
    std::vector<IntervalDrift> intervals;
    IntervalDrift total{};
    double band = 4.0;
    bool any_flagged = false;
    double max_abs_t_stat = 0.0;
};

DriftReport drift_report(const PathMatrix& process, const TimeGrid& grid, double band = 4.0);

// ---------------------------------------------------------------------------
// Parallelism

/// Worker count: FORWARD_YIELD_THREADS if set and positive, otherwise the
/// hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Each index must write only its own output
/// slot; the call returns once every index has run.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Small vector helpers over raw increments.
double dot(const Vec& a, std::span<const double> b);

}  // namespace forward_yield
