#include "thetaexp/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <utility>

#include "numeric.hpp"
#include "thetaexp/error.hpp"

namespace thetaexp {

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value();
}

double norm2(const Vec& a) {
    return std::sqrt(dot(a, a));
}

// Largest Ritz-value modulus of a linear map restricted to an invariant
// subspace, by orthogonal iteration with two vectors. `apply` maps into the
// subspace only after `project`, which removes the leading eigendirection.
template <class Apply, class Project>
SpectralGapEstimate subspace_modulus(std::size_t n, Apply&& apply, Project&& project, const IterationControl& control,
                                     const char* what) {
    const std::size_t p = n > 2 ? 2 : 1;
    std::vector<Vec> q(p, Vec(n));
    for (std::size_t k = 0; k < p; ++k)
        for (std::size_t i = 0; i < n; ++i) q[k][i] = detail::splitmix_unit(i * 7 + k * 1000003 + 11);

    auto orthonormalize = [&](std::vector<Vec>& vs) {
        for (std::size_t k = 0; k < vs.size(); ++k) {
            project(vs[k]);
            for (std::size_t l = 0; l < k; ++l) {
                const double c = dot(vs[k], vs[l]);
                for (std::size_t i = 0; i < n; ++i) vs[k][i] -= c * vs[l][i];
            }
            const double nk = norm2(vs[k]);
            if (!(nk > 1e-300)) return false;
            for (double& v : vs[k]) v /= nk;
        }
        return true;
    };
    if (!orthonormalize(q)) return {};

    SpectralGapEstimate est;
    double previous = -1.0;
    std::vector<Vec> z(p, Vec(n));
    for (std::size_t it = 1; it <= control.max_iterations; ++it) {
        for (std::size_t k = 0; k < p; ++k) {
            apply(q[k], z[k]);
            project(z[k]);
        }
        double modulus = 0.0;
        if (p == 1) {
            modulus = std::abs(dot(z[0], q[0]));
        } else {
            const double a = dot(z[0], q[0]), b = dot(z[0], q[1]);
            const double c = dot(z[1], q[0]), d = dot(z[1], q[1]);
            const std::complex<double> tr = a + d;
            const std::complex<double> disc = std::sqrt(tr * tr - 4.0 * (a * d - b * c));
            modulus = std::max(std::abs((tr + disc) * 0.5), std::abs((tr - disc) * 0.5));
        }
        est.modulus = modulus;
        est.iterations = it;
        est.last_change = std::abs(modulus - previous);
        if (est.last_change < control.tolerance) return est;
        previous = modulus;
        q = z;
        if (!orthonormalize(q)) {
            est.modulus = 0.0;
            return est;
        }
    }
    std::ostringstream msg;
    msg << what << ": no convergence after " << control.max_iterations << " iterations (last estimate "
        << est.modulus << ", change " << est.last_change << ")";
    throw numerical_error(msg.str());
}

void require_unit_point(double x, const MeasureContext& ctx) {
    if (!(x >= 0.0 && x <= ctx.theta())) throw domain_error("x=" + std::to_string(x) + " outside [0, theta]");
}

}  // namespace

// ---- pointwise operator ----------------------------------------------------------

Observable Observable::invariant_density(const MeasureContext& ctx) {
    const double c_theta = ctx.C * ctx.theta();
    const double theta = ctx.theta();
    return {[=](double x) { return c_theta / (1.0 + theta * x); }, c_theta, true};
}

Observable Observable::constant(double c) {
    return {[c](double) { return c; }, std::abs(c), false};
}

double branch_weight_tail(double x, Digit K, int p, const ThetaParams& params) {
    if (p < 2) throw domain_error("branch_weight_tail needs p >= 2");
    const double theta = params.theta;
    return std::pow(theta, -p) * detail::hurwitz_zeta(p, static_cast<double>(K) + 1.0 + x / theta);
}

TransferValue transfer_apply(const Observable& f, double x, Digit cutoff, const MeasureContext& ctx) {
    if (cutoff < ctx.m()) throw domain_error("transfer cutoff K must be >= m");
    require_unit_point(x, ctx);
    const double theta = ctx.theta();
    detail::CompensatedSum sum;
    for (Digit i = ctx.m(); i <= cutoff; ++i) {
        const double w = 1.0 / (x + static_cast<double>(i) * theta);
        sum.add(f.f(w) * w * w);
    }
    TransferValue out;
    out.partial = sum.value();
    if (f.is_invariant_density) {
        out.tail = ctx.C / (x + static_cast<double>(cutoff + 1) * theta);
        out.tail_exact = true;
    } else {
        const double weight = branch_weight_tail(x, cutoff, 2, ctx.params);
        out.tail = f.f(1.0 / (x + static_cast<double>(cutoff + 1) * theta)) * weight;
        out.tail_bound = f.sup_abs * weight;
    }
    out.value = out.partial + out.tail;
    return out;
}

// ---- Ulam ----------------------------------------------------------------------

double UlamOperator::row_sum(std::size_t i) const {
    detail::CompensatedSum s;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s.add(val[k]);
    return s.value();
}

double UlamOperator::entry(std::size_t i, std::size_t j) const {
    const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
    if (it == last || *it != j) return 0.0;
    return val[static_cast<std::size_t>(it - col.begin())];
}

void UlamOperator::left_multiply(const Vec& v, Vec& out) const {
    out.assign(cells, 0.0);
    for (std::size_t i = 0; i < cells; ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) out[col[k]] += vi * val[k];
    }
}

void UlamOperator::right_multiply(const Vec& v, Vec& out) const {
    out.assign(cells, 0.0);
    for (std::size_t i = 0; i < cells; ++i) {
        double s = 0.0;
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * v[col[k]];
        out[i] = s;
    }
}

namespace {

struct UlamGrid {
    std::size_t cells;
    double theta;
    double width;

    double edge(std::size_t j) const { return j == cells ? theta : static_cast<double>(j) * width; }
    std::size_t cell_of(double y) const {
        const auto j = static_cast<std::size_t>(std::max(0.0, y / width));
        return std::min(j, cells - 1);
    }
};

// Adds lambda(s in [s_lo, s_hi] with digit k and T s in cell j) to row[j].
// Images are formed in extended precision: 1/s - k theta cancels badly near 0.
void add_branch(const UlamGrid& grid, long double theta_l, Digit k, double s_lo, double s_hi, bool full, Vec& row) {
    const long double kt = static_cast<long double>(k) * theta_l;
    const long double top = grid.theta;
    long double y_lo = 0.0L, y_hi = top;
    if (!full) {
        y_lo = std::clamp(1.0L / s_hi - kt, 0.0L, top);
        y_hi = std::clamp(1.0L / s_lo - kt, 0.0L, top);
    }
    if (!(y_hi > y_lo)) return;
    const std::size_t j_lo = grid.cell_of(static_cast<double>(y_lo));
    const std::size_t j_hi = grid.cell_of(static_cast<double>(y_hi));
    for (std::size_t j = j_lo; j <= j_hi; ++j) {
        const long double c_lo = std::max<long double>(y_lo, grid.edge(j));
        const long double c_hi = std::min<long double>(y_hi, grid.edge(j + 1));
        if (!(c_hi > c_lo)) continue;
        row[j] += static_cast<double>((c_hi - c_lo) / ((c_lo + kt) * (c_hi + kt)));
    }
}

// Sum over k >= K of lambda(w_k(cell_j)) for every column j, by Euler-Maclaurin
// on g(t) = (1/theta) (1/(t + alpha) - 1/(t + beta)).
void add_branch_tail(const UlamGrid& grid, Digit K, Vec& row) {
    const double Kd = static_cast<double>(K);
    const double inv_theta = 1.0 / grid.theta;
    for (std::size_t j = 0; j < grid.cells; ++j) {
        const double alpha = grid.edge(j) * inv_theta;
        const double beta = grid.edge(j + 1) * inv_theta;
        const double ua = 1.0 / (Kd + alpha), ub = 1.0 / (Kd + beta);
        const double integral = std::log1p((beta - alpha) * ua);
        const double g = (beta - alpha) * ua * ub;
        const double g1 = -ua * ua + ub * ub;
        const double g3 = -6.0 * std::pow(ua, 4) + 6.0 * std::pow(ub, 4);
        row[j] += inv_theta * (integral + 0.5 * g - g1 / 12.0 + g3 / 720.0);
    }
}

}  // namespace

UlamOperator build_ulam(std::size_t cells, const MeasureContext& ctx, unsigned threads) {
    if (cells < 2) throw domain_error("build_ulam needs at least 2 cells");
    if (cells > std::numeric_limits<std::uint32_t>::max()) throw domain_error("too many cells");
    const double theta = ctx.theta();
    const Digit m = ctx.m();
    const UlamGrid grid{cells, theta, theta / static_cast<double>(cells)};
    const long double theta_l = 1.0L / std::sqrt(static_cast<long double>(m));
    auto digit_at = [&](double x) {
        return std::max<Digit>(m, static_cast<Digit>(std::floor(1.0 / (theta * x))));
    };
    // Branches beyond this lie entirely inside cell 0.
    const Digit first_inner = digit_at(grid.width) + 1;
    const Digit explicit_cutoff = std::max<Digit>(first_inner + 16, 1024);

    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(cells);
    std::vector<double> residuals(cells, 0.0);
    parallel_for(cells, threads, [&](std::size_t i) {
        Vec row(cells, 0.0);
        const double a = grid.edge(i), b = grid.edge(i + 1);
        const Digit k_lo = std::max(m, digit_at(b) - 1);
        const Digit k_hi = i == 0 ? explicit_cutoff : digit_at(a) + 1;
        for (Digit k = k_lo; k <= k_hi; ++k) {
            const double c_lo = 1.0 / (static_cast<double>(k + 1) * theta);
            const double c_hi = 1.0 / (static_cast<double>(k) * theta);
            const double s_lo = std::max(a, c_lo), s_hi = std::min(b, c_hi);
            if (!(s_hi > s_lo)) continue;
            const bool full = s_lo == c_lo && s_hi == c_hi;
            add_branch(grid, theta_l, k, s_lo, s_hi, full, row);
        }
        if (i == 0) add_branch_tail(grid, explicit_cutoff + 1, row);

        const double width = b - a;
        detail::CompensatedSum total;
        for (double& v : row) {
            v /= width;
            total.add(v);
        }
        // Mass not reached by the branch sums goes to the cell at 0; an
        // overshoot from rounding is removed by rescaling the row.
        const double residual = 1.0 - total.value();
        residuals[i] = std::abs(residual);
        if (residual >= 0.0)
            row[0] += residual;
        else
            for (double& v : row) v /= total.value();
        auto& out = rows[i];
        for (std::size_t j = 0; j < cells; ++j)
            if (row[j] > 0.0) out.emplace_back(static_cast<std::uint32_t>(j), row[j]);
    });

    UlamOperator P;
    P.m = m;
    P.cells = cells;
    P.cell_width = grid.width;
    P.branch_cutoff = explicit_cutoff;
    P.max_neglected_mass = *std::max_element(residuals.begin(), residuals.end());
    P.row_ptr.resize(cells + 1, 0);
    for (std::size_t i = 0; i < cells; ++i) P.row_ptr[i + 1] = P.row_ptr[i] + rows[i].size();
    P.col.reserve(P.row_ptr[cells]);
    P.val.reserve(P.row_ptr[cells]);
    for (auto& r : rows) {
        for (const auto& [j, v] : r) {
            P.col.push_back(j);
            P.val.push_back(v);
        }
        std::vector<std::pair<std::uint32_t, double>>().swap(r);
    }
    return P;
}

std::vector<double> StationaryDensity::cell_mass() const {
    Vec out(density.size());
    for (std::size_t i = 0; i < density.size(); ++i) out[i] = density[i] * cell_width;
    return out;
}

StationaryDensity stationary_density(const UlamOperator& P, const MeasureContext& ctx,
                                     const IterationControl& control) {
    (void)ctx;
    const std::size_t n = P.cells;
    Vec v(n, 1.0 / static_cast<double>(n)), w;
    StationaryDensity out;
    out.cell_width = P.cell_width;
    for (std::size_t it = 1; it <= control.max_iterations; ++it) {
        P.left_multiply(v, w);
        detail::CompensatedSum total;
        for (double x : w) total.add(x);
        const double t = total.value();
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] /= t;
            change += std::abs(w[i] - v[i]);
        }
        v.swap(w);
        out.iterations = it;
        out.final_change = change;
        if (change < control.tolerance) {
            out.density.resize(n);
            for (std::size_t i = 0; i < n; ++i) out.density[i] = v[i] / P.cell_width;
            return out;
        }
    }
    throw numerical_error("stationary_density: no convergence after " + std::to_string(control.max_iterations) +
                          " iterations (last L1 change " + std::to_string(out.final_change) + ")");
}

double l1_distance_to_invariant(const StationaryDensity& d, const MeasureContext& ctx) {
    const double theta = ctx.theta();
    const double c_theta = ctx.C * theta;
    // integral of h over [a, b]
    auto H = [&](double a, double b) { return ctx.C * std::log1p(theta * (b - a) / (1.0 + theta * a)); };
    detail::CompensatedSum sum;
    const std::size_t n = d.density.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double a = static_cast<double>(i) * d.cell_width;
        const double b = i + 1 == n ? theta : a + d.cell_width;
        const double v = d.density[i];
        const double ha = c_theta / (1.0 + theta * a), hb = c_theta / (1.0 + theta * b);
        if (v >= ha) {
            sum.add(v * (b - a) - H(a, b));
        } else if (v <= hb) {
            sum.add(H(a, b) - v * (b - a));
        } else {
            const double x = std::clamp((c_theta / v - 1.0) / theta, a, b);
            sum.add(H(a, x) - v * (x - a));
            sum.add(v * (b - x) - H(x, b));
        }
    }
    return sum.value();
}

SpectralGapEstimate spectral_gap(const UlamOperator& P, const StationaryDensity& pi, const IterationControl& control) {
    const Vec mass = pi.cell_mass();
    auto apply = [&](const Vec& v, Vec& out) { P.left_multiply(v, out); };
    auto project = [&](Vec& v) {
        detail::CompensatedSum s;
        for (double x : v) s.add(x);
        const double total = s.value();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= total * mass[i];
    };
    return subspace_modulus(P.cells, apply, project, control, "spectral_gap");
}

SpectralGapEstimate spectral_gap(const UlamOperator& P, const IterationControl& control) {
    const auto ctx = MeasureContext::make(P.m);
    return spectral_gap(P, stationary_density(P, ctx), control);
}

std::vector<double> cell_overlap_weights(const UlamOperator& P, double lo, double hi) {
    Vec w(P.cells, 0.0);
    if (!(hi > lo)) return w;
    const double theta = P.cell_width * static_cast<double>(P.cells);
    for (std::size_t i = 0; i < P.cells; ++i) {
        const double a = P.cell_lo(i);
        const double b = i + 1 == P.cells ? theta : a + P.cell_width;
        const double overlap = std::min(b, hi) - std::max(a, lo);
        if (overlap > 0.0) w[i] = overlap / (b - a);
    }
    return w;
}

std::vector<double> ulam_correlations(const UlamOperator& P, const StationaryDensity& pi, const Vec& a, const Vec& b,
                                      std::size_t max_lag) {
    const Vec mass = pi.cell_mass();
    Vec v(P.cells), w;
    for (std::size_t i = 0; i < P.cells; ++i) v[i] = mass[i] * a[i];
    const double pa = std::accumulate(v.begin(), v.end(), 0.0);
    const double pb = dot(mass, b);
    Vec out;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        P.left_multiply(v, w);
        v.swap(w);
        out.push_back(dot(v, b) - pa * pb);
    }
    return out;
}

// ---- Chebyshev collocation ------------------------------------------------------

SpectralTransfer::SpectralTransfer(const MeasureContext& ctx, std::size_t nodes, Digit explicit_branches)
    : ctx_(ctx) {
    if (nodes < 4) throw domain_error("spectral transfer needs at least 4 nodes");
    if (explicit_branches < ctx.m()) throw domain_error("explicit branch count must be >= m");
    const std::size_t N = nodes;
    const double theta = ctx.theta();
    nodes_.resize(N);
    bary_.resize(N);
    Vec t(N);
    for (std::size_t k = 0; k < N; ++k) {
        t[k] = std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(N - 1));
        nodes_[k] = 0.5 * theta * (1.0 - t[k]);
        bary_[k] = (k % 2 == 0 ? 1.0 : -1.0) * (k == 0 || k + 1 == N ? 0.5 : 1.0);
    }
    nodes_.front() = 0.0;
    nodes_.back() = theta;

    // Differentiation matrix in y; node 0 sits at y = 0.
    Vec D(N * N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        double diag = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) continue;
            const double ci = (i == 0 || i + 1 == N) ? 2.0 : 1.0;
            const double cj = (j == 0 || j + 1 == N) ? 2.0 : 1.0;
            const double sign = (i + j) % 2 == 0 ? 1.0 : -1.0;
            const double v = ci / cj * sign / (t[i] - t[j]) * (-2.0 / theta);
            D[i * N + j] = v;
            diag -= v;
        }
        D[i * N + i] = diag;
    }
    // Rows of d^p/dy^p at y = 0 for p = 0..3.
    std::vector<Vec> deriv_rows(4, Vec(N, 0.0));
    deriv_rows[0][0] = 1.0;
    for (std::size_t p = 1; p < 4; ++p)
        for (std::size_t j = 0; j < N; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < N; ++l) s += deriv_rows[p - 1][l] * D[l * N + j];
            deriv_rows[p][j] = s;
        }

    matrix_.assign(N * N, 0.0);
    parallel_for(N, default_thread_count(), [&](std::size_t a) {
        const double y = nodes_[a];
        Vec row(N, 0.0);
        for (Digit k = ctx.m(); k <= explicit_branches; ++k) {
            const double w = 1.0 / (y + static_cast<double>(k) * theta);
            const Vec r = interpolation_row(w);
            const double weight = w * w;
            for (std::size_t j = 0; j < N; ++j) row[j] += weight * r[j];
        }
        double factorial = 1.0;
        for (int p = 0; p < 4; ++p) {
            if (p > 0) factorial *= p;
            const double s = branch_weight_tail(y, explicit_branches, p + 2, ctx.params) / factorial;
            for (std::size_t j = 0; j < N; ++j) row[j] += s * deriv_rows[static_cast<std::size_t>(p)][j];
        }
        std::copy(row.begin(), row.end(), matrix_.begin() + static_cast<std::ptrdiff_t>(a * N));
    });
}

std::vector<double> SpectralTransfer::interpolation_row(double y) const {
    const std::size_t N = nodes_.size();
    Vec r(N, 0.0);
    double denom = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        const double diff = y - nodes_[j];
        if (diff == 0.0) {
            std::fill(r.begin(), r.end(), 0.0);
            r[j] = 1.0;
            return r;
        }
        r[j] = bary_[j] / diff;
        denom += r[j];
    }
    for (double& v : r) v /= denom;
    return r;
}

double SpectralTransfer::interpolate(const Vec& g, double y) const {
    return dot(interpolation_row(y), g);
}

std::vector<double> SpectralTransfer::first_image_of_digit(Digit i) const {
    if (i < ctx_.m()) throw domain_error("digit below m");
    const double theta = ctx_.theta();
    const double c_theta = ctx_.C * theta;
    Vec g(nodes_.size());
    for (std::size_t a = 0; a < nodes_.size(); ++a) {
        const double w = 1.0 / (nodes_[a] + static_cast<double>(i) * theta);
        g[a] = c_theta / (1.0 + theta * w) * w * w;
    }
    return g;
}

std::vector<double> SpectralTransfer::apply(const Vec& g) const {
    const std::size_t N = nodes_.size();
    Vec out(N);
    for (std::size_t a = 0; a < N; ++a) {
        detail::CompensatedSum s;
        for (std::size_t j = 0; j < N; ++j) s.add(matrix_[a * N + j] * g[j]);
        out[a] = s.value();
    }
    return out;
}

std::vector<double> SpectralTransfer::integration_row(double lo, double hi) const {
    static const detail::QuadratureRule rule = detail::gauss_legendre(40);
    const std::size_t N = nodes_.size();
    Vec q(N, 0.0);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const Vec r = interpolation_row(mid + half * rule.nodes[k]);
        for (std::size_t j = 0; j < N; ++j) q[j] += half * rule.weights[k] * r[j];
    }
    return q;
}

std::vector<double> SpectralTransfer::digit_integration_row(Digit j) const {
    if (j < ctx_.m()) throw domain_error("digit below m");
    const double theta = ctx_.theta();
    return integration_row(1.0 / (static_cast<double>(j + 1) * theta), 1.0 / (static_cast<double>(j) * theta));
}

double SpectralTransfer::integrate_digit(const Vec& g, Digit j) const {
    return dot(digit_integration_row(j), g);
}

SpectralGapEstimate SpectralTransfer::spectral_gap(const IterationControl& control) const {
    const std::size_t N = nodes_.size();
    const Vec total = integration_row(0.0, ctx_.theta());
    Vec h(N);
    for (std::size_t a = 0; a < N; ++a) h[a] = ctx_.C * ctx_.theta() / (1.0 + ctx_.theta() * nodes_[a]);
    const double h_total = dot(total, h);
    auto apply_fn = [&](const Vec& v, Vec& out) { out = apply(v); };
    auto project = [&](Vec& v) {
        const double c = dot(total, v) / h_total;
        for (std::size_t a = 0; a < N; ++a) v[a] -= c * h[a];
    };
    return subspace_modulus(N, apply_fn, project, control, "spectral_gap (collocation)");
}

// ---- joint digit masses and psi --------------------------------------------------

std::string to_string(JointMethod method) {
    switch (method) {
        case JointMethod::exact: return "exact";
        case JointMethod::ulam: return "ulam";
        case JointMethod::quadrature: return "quadrature";
    }
    return "unknown";
}

JointMethod parse_joint_method(const std::string& name) {
    if (name == "exact") return JointMethod::exact;
    if (name == "ulam") return JointMethod::ulam;
    if (name == "quadrature") return JointMethod::quadrature;
    throw parameter_error("unknown joint method '" + name + "' (exact, ulam, quadrature)");
}

double joint_digit_mass_lag1(Digit i, Digit j, const MeasureContext& ctx) {
    const Digit m = ctx.m();
    if (i < m || j < m) throw domain_error("digits must be >= m");
    // The rank-2 cylinder [i, j] has theta-scaled endpoints k/(m + i k) for
    // k = j, j + 1, so its mass is C log(B/(B - m)).
    const double di = static_cast<double>(i), dj = static_cast<double>(j), dm = static_cast<double>(m);
    const double B = (dm + di * dj) * (dm + (di + 1.0) * (dj + 1.0));
    return -std::log1p(-dm / B) * ctx.C;
}

namespace {

struct UlamCacheEntry {
    UlamOperator P;
    StationaryDensity pi;
};

const UlamCacheEntry& cached_ulam(std::int64_t m, std::size_t cells) {
    static std::mutex mutex;
    static std::map<std::pair<std::int64_t, std::size_t>, std::unique_ptr<UlamCacheEntry>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[{m, cells}];
    if (!slot) {
        const auto ctx = MeasureContext::make(m);
        auto entry = std::make_unique<UlamCacheEntry>();
        entry->P = build_ulam(cells, ctx);
        entry->pi = stationary_density(entry->P, ctx);
        slot = std::move(entry);
    }
    return *slot;
}

}  // namespace

double joint_digit_mass(Digit i, Digit j, std::size_t lag, const MeasureContext& ctx, JointMethod method,
                        const JointMassOptions& options) {
    if (i < ctx.m() || j < ctx.m()) throw domain_error("digits must be >= m");
    if (lag < 1) throw domain_error("lag must be >= 1");
    const double theta = ctx.theta();
    switch (method) {
        case JointMethod::exact:
            if (lag != 1) throw parameter_error("unsupported: exact joint masses are only available at lag 1");
            return joint_digit_mass_lag1(i, j, ctx);
        case JointMethod::quadrature: {
            const SpectralTransfer op(ctx, options.spectral_nodes);
            Vec g = op.first_image_of_digit(i);
            for (std::size_t n = 1; n < lag; ++n) g = op.apply(g);
            return op.integrate_digit(g, j);
        }
        case JointMethod::ulam: {
            const auto& entry = cached_ulam(ctx.m(), options.ulam_cells);
            const auto& P = entry.P;
            const Vec a = cell_overlap_weights(P, 1.0 / (static_cast<double>(i + 1) * theta),
                                               1.0 / (static_cast<double>(i) * theta));
            const Vec b = cell_overlap_weights(P, 1.0 / (static_cast<double>(j + 1) * theta),
                                               1.0 / (static_cast<double>(j) * theta));
            const Vec mass = entry.pi.cell_mass();
            Vec v(P.cells), w;
            for (std::size_t c = 0; c < P.cells; ++c) v[c] = mass[c] * a[c];
            for (std::size_t n = 0; n < lag; ++n) {
                P.left_multiply(v, w);
                v.swap(w);
            }
            return dot(v, b);
        }
    }
    throw parameter_error("unknown joint method");
}

ExponentialFit fit_exponential(const Vec& x, const Vec& y) {
    Vec xs, ls;
    for (std::size_t k = 0; k < x.size() && k < y.size(); ++k)
        if (y[k] > 0.0 && std::isfinite(y[k]) && std::isfinite(x[k])) {
            xs.push_back(x[k]);
            ls.push_back(std::log(y[k]));
        }
    if (xs.size() < 3) throw fit_error("exponential fit needs at least 3 usable points, got " + std::to_string(xs.size()));
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ls.begin(), ls.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (ls[k] - my);
        syy += (ls[k] - my) * (ls[k] - my);
    }
    if (!(sxx > 0.0)) throw fit_error("exponential fit needs distinct abscissae");
    const double slope = sxy / sxx;
    ExponentialFit fit;
    fit.rate = std::exp(slope);
    fit.amplitude = std::exp(my - slope * mx);
    fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    fit.points = xs.size();
    return fit;
}

std::vector<MixingEstimate> psi_curve(std::size_t max_lag, Digit digit_cap, const MeasureContext& ctx,
                                      const SpectralTransfer* op) {
    const Digit m = ctx.m();
    if (max_lag < 1) throw domain_error("lag must be >= 1");
    if (digit_cap < m) throw domain_error("digit cap must be >= m");
    std::unique_ptr<SpectralTransfer> owned;
    if (!op && max_lag > 1) {
        owned = std::make_unique<SpectralTransfer>(ctx);
        op = owned.get();
    }
    const auto count = static_cast<std::size_t>(digit_cap - m + 1);
    Vec p(count);
    for (std::size_t a = 0; a < count; ++a) p[a] = digit_mass(m + static_cast<Digit>(a), ctx);
    std::vector<Vec> rows;
    if (op)
        for (std::size_t b = 0; b < count; ++b) rows.push_back(op->digit_integration_row(m + static_cast<Digit>(b)));

    std::vector<MixingEstimate> curve(max_lag);
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        auto& e = curve[lag - 1];
        e.lag = lag;
        e.method = lag == 1 ? JointMethod::exact : JointMethod::quadrature;
    }
    for (std::size_t a = 0; a < count; ++a) {
        const Digit i = m + static_cast<Digit>(a);
        Vec g;
        if (op) g = op->first_image_of_digit(i);
        for (std::size_t lag = 1; lag <= max_lag; ++lag) {
            if (lag > 1 && op) g = op->apply(g);
            auto& e = curve[lag - 1];
            for (std::size_t b = 0; b < count; ++b) {
                const Digit j = m + static_cast<Digit>(b);
                const double joint = lag == 1 ? joint_digit_mass_lag1(i, j, ctx) : dot(rows[b], g);
                const double dev = std::abs(joint / (p[a] * p[b]) - 1.0);
                ++e.pairs_evaluated;
                if (dev > e.psi_hat) {
                    e.psi_hat = dev;
                    e.argmax_i = i;
                    e.argmax_j = j;
                }
            }
        }
    }
    return curve;
}

std::vector<MixingEstimate> psi_curve_ulam(std::size_t max_lag, Digit digit_cap, const MeasureContext& ctx,
                                           std::size_t cells) {
    const Digit m = ctx.m();
    if (max_lag < 1) throw domain_error("lag must be >= 1");
    if (digit_cap < m) throw domain_error("digit cap must be >= m");
    const auto& entry = cached_ulam(m, cells);
    const auto& P = entry.P;
    const Vec mass = entry.pi.cell_mass();
    const double theta = ctx.theta();
    const auto count = static_cast<std::size_t>(digit_cap - m + 1);
    std::vector<Vec> weights;
    Vec p(count);
    for (std::size_t a = 0; a < count; ++a) {
        const auto i = static_cast<double>(m + static_cast<Digit>(a));
        weights.push_back(cell_overlap_weights(P, 1.0 / ((i + 1.0) * theta), 1.0 / (i * theta)));
        p[a] = digit_mass(m + static_cast<Digit>(a), ctx);
    }
    std::vector<MixingEstimate> curve(max_lag);
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        curve[lag - 1].lag = lag;
        curve[lag - 1].method = JointMethod::ulam;
    }
    std::vector<std::vector<MixingEstimate>> partial(count, curve);
    parallel_for(count, default_thread_count(), [&](std::size_t a) {
        Vec v(P.cells), w;
        for (std::size_t c = 0; c < P.cells; ++c) v[c] = mass[c] * weights[a][c];
        for (std::size_t lag = 1; lag <= max_lag; ++lag) {
            P.left_multiply(v, w);
            v.swap(w);
            auto& e = partial[a][lag - 1];
            for (std::size_t b = 0; b < count; ++b) {
                const double dev = std::abs(dot(v, weights[b]) / (p[a] * p[b]) - 1.0);
                ++e.pairs_evaluated;
                if (dev > e.psi_hat) {
                    e.psi_hat = dev;
                    e.argmax_i = m + static_cast<Digit>(a);
                    e.argmax_j = m + static_cast<Digit>(b);
                }
            }
        }
    });
    for (const auto& row : partial)
        for (std::size_t k = 0; k < max_lag; ++k) {
            curve[k].pairs_evaluated += row[k].pairs_evaluated;
            if (row[k].psi_hat > curve[k].psi_hat) {
                curve[k].psi_hat = row[k].psi_hat;
                curve[k].argmax_i = row[k].argmax_i;
                curve[k].argmax_j = row[k].argmax_j;
            }
        }
    return curve;
}

MixingEstimate psi_estimate(std::size_t lag, Digit digit_cap, const MeasureContext& ctx, JointMethod method) {
    switch (method) {
        case JointMethod::exact:
            if (lag != 1) throw parameter_error("unsupported: exact joint masses are only available at lag 1");
            return psi_curve(1, digit_cap, ctx).back();
        case JointMethod::ulam: return psi_curve_ulam(lag, digit_cap, ctx).back();
        case JointMethod::quadrature: return psi_curve(lag, digit_cap, ctx).back();
    }
    throw parameter_error("unknown joint method");
}

ExponentialFit fit_psi(const std::vector<MixingEstimate>& curve, std::size_t first_lag, std::size_t last_lag) {
    Vec x, y;
    for (const auto& e : curve)
        if (e.lag >= first_lag && e.lag <= last_lag) {
            x.push_back(static_cast<double>(e.lag));
            y.push_back(e.psi_hat);
        }
    return fit_exponential(x, y);
}

std::vector<CovarianceCheck> covariance_check(std::size_t max_lag, Digit level, Digit digit_cap,
                                              const MeasureContext& ctx, double slack) {
    const Digit m = ctx.m();
    if (level < m || level > digit_cap) throw domain_error("covariance check needs m <= level <= digit cap");
    const SpectralTransfer op(ctx);
    const auto curve = psi_curve(max_lag, digit_cap, ctx, &op);
    const auto count = static_cast<std::size_t>(level - m + 1);
    Vec p(count);
    double mean = 0.0, second = 0.0;
    for (std::size_t a = 0; a < count; ++a) {
        const double i = static_cast<double>(m) + static_cast<double>(a);
        p[a] = digit_mass(m + static_cast<Digit>(a), ctx);
        mean += i * p[a];
        second += i * i * p[a];
    }
    const double variance = second - mean * mean;
    std::vector<Vec> rows;
    for (std::size_t b = 0; b < count; ++b) rows.push_back(op.digit_integration_row(m + static_cast<Digit>(b)));

    // cov[lag] = sum_{i,j} i j (joint - p_i p_j)
    Vec cov(max_lag, 0.0);
    for (std::size_t a = 0; a < count; ++a) {
        const Digit i = m + static_cast<Digit>(a);
        Vec g = op.first_image_of_digit(i);
        for (std::size_t lag = 1; lag <= max_lag; ++lag) {
            if (lag > 1) g = op.apply(g);
            for (std::size_t b = 0; b < count; ++b) {
                const Digit j = m + static_cast<Digit>(b);
                const double joint = lag == 1 ? joint_digit_mass_lag1(i, j, ctx) : dot(rows[b], g);
                cov[lag - 1] += static_cast<double>(i) * static_cast<double>(j) * (joint - p[a] * p[b]);
            }
        }
    }
    std::vector<CovarianceCheck> out;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        CovarianceCheck c;
        c.lag = lag;
        c.covariance = cov[lag - 1];
        c.variance = variance;
        c.psi_hat = curve[lag - 1].psi_hat;
        c.bound = c.psi_hat * variance * (1.0 + slack);
        c.holds = std::abs(c.covariance) <= c.bound;
        out.push_back(c);
    }
    return out;
}

// ---- exports --------------------------------------------------------------------

void write_ulam_coordinates(std::ostream& out, const UlamOperator& P) {
    out << std::setprecision(17);
    for (std::size_t i = 0; i < P.cells; ++i)
        for (std::size_t k = P.row_ptr[i]; k < P.row_ptr[i + 1]; ++k) out << i << ' ' << P.col[k] << ' ' << P.val[k] << '\n';
}

void write_density_csv(std::ostream& out, const StationaryDensity& d) {
    out << "cell_midpoint,density\n" << std::setprecision(17);
    for (std::size_t i = 0; i < d.density.size(); ++i)
        out << (static_cast<double>(i) + 0.5) * d.cell_width << ',' << d.density[i] << '\n';
}

void write_psi_csv(std::ostream& out, const std::vector<MixingEstimate>& curve) {
    out << "lag,psi_hat\n" << std::setprecision(17);
    for (const auto& e : curve) out << e.lag << ',' << e.psi_hat << '\n';
}

}  // namespace thetaexp
