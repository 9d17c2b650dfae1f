#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lagdec/tensor.hpp"

namespace lagdec {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// min objective^T x + constant  s.t.  ineq_rows x <= ineq_rhs, eq_rows x == eq_rhs, lower <= x <= upper.
struct ExplicitLp {
    std::size_t num_vars = 0;
    Vec objective;
    double constant = 0.0;
    Vec lower, upper;
    std::vector<Vec> ineq_rows;
    Vec ineq_rhs;
    std::vector<Vec> eq_rows;
    Vec eq_rhs;
    std::vector<std::string> names;

    explicit ExplicitLp(std::size_t n = 0)
        : num_vars(n), objective(n, 0.0), lower(n, -kInf), upper(n, kInf) {}

    std::size_t add_var(double lo, double hi, std::string name = {}) {
        objective.push_back(0.0);
        lower.push_back(lo);
        upper.push_back(hi);
        for (Vec& r : ineq_rows) r.push_back(0.0);
        for (Vec& r : eq_rows) r.push_back(0.0);
        names.resize(num_vars);
        names.push_back(std::move(name));
        return num_vars++;
    }
    void add_ineq(Vec row, double rhs) {
        if (row.size() != num_vars) throw ShapeError("lp row length mismatch");
        ineq_rows.push_back(std::move(row));
        ineq_rhs.push_back(rhs);
    }
    void add_eq(Vec row, double rhs) {
        if (row.size() != num_vars) throw ShapeError("lp row length mismatch");
        eq_rows.push_back(std::move(row));
        eq_rhs.push_back(rhs);
    }

    double evaluate(std::span<const double> x) const { return dot(objective, x) + constant; }

    /// Largest violation of any constraint or variable bound at x.
    double max_violation(std::span<const double> x) const {
        double worst = 0.0;
        for (std::size_t i = 0; i < num_vars; ++i) {
            worst = std::max({worst, lower[i] - x[i], x[i] - upper[i]});
        }
        for (std::size_t r = 0; r < ineq_rows.size(); ++r) worst = std::max(worst, dot(ineq_rows[r], x) - ineq_rhs[r]);
        for (std::size_t r = 0; r < eq_rows.size(); ++r) worst = std::max(worst, std::fabs(dot(eq_rows[r], x) - eq_rhs[r]));
        return worst;
    }

    std::string var_name(std::size_t i) const {
        if (i < names.size() && !names[i].empty()) return names[i];
        return "x" + std::to_string(i);
    }
};

/// Writes the problem in the CPLEX LP text format.
inline void write_lp_format(const ExplicitLp& lp, std::ostream& os) {
    os.precision(17);
    const auto term_list = [&](const Vec& coef) {
        bool first = true;
        for (std::size_t i = 0; i < coef.size(); ++i) {
            if (coef[i] == 0.0) continue;
            os << (coef[i] < 0.0 ? " - " : (first ? " " : " + ")) << std::fabs(coef[i]) << ' ' << lp.var_name(i);
            first = false;
        }
        if (first) os << " 0 " << lp.var_name(0);
    };
    os << "\\ constant term " << lp.constant << "\nMinimize\n obj:";
    term_list(lp.objective);
    os << "\nSubject To\n";
    for (std::size_t r = 0; r < lp.ineq_rows.size(); ++r) {
        os << " c" << r << ":";
        term_list(lp.ineq_rows[r]);
        os << " <= " << lp.ineq_rhs[r] << '\n';
    }
    for (std::size_t r = 0; r < lp.eq_rows.size(); ++r) {
        os << " e" << r << ":";
        term_list(lp.eq_rows[r]);
        os << " = " << lp.eq_rhs[r] << '\n';
    }
    os << "Bounds\n";
    for (std::size_t i = 0; i < lp.num_vars; ++i) {
        os << ' ';
        if (std::isinf(lp.lower[i])) os << "-inf"; else os << lp.lower[i];
        os << " <= " << lp.var_name(i) << " <= ";
        if (std::isinf(lp.upper[i])) os << "+inf"; else os << lp.upper[i];
        os << '\n';
    }
    os << "End\n";
}

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
    }
    return "?";
}

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    double value = kInf;
    Vec point;
    std::size_t pivots = 0;
};

namespace detail {

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), t_((rows + 1) * (cols + 1), 0.0) {}

    double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return t_[r * (cols_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, cols_); }
    double& cost(std::size_t c) { return at(rows_, c); }

    void pivot(std::size_t pr, std::size_t pc) {
        const double p = at(pr, pc);
        for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) /= p;
        at(pr, pc) = 1.0;
        for (std::size_t r = 0; r <= rows_; ++r) {
            if (r == pr) continue;
            const double f = at(r, pc);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
            at(r, pc) = 0.0;
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

private:
    std::size_t rows_, cols_;
    std::vector<double> t_;
};

}  // namespace detail

/// Two-phase primal simplex on a dense tableau with Bland's rule. The final basis is re-solved with an
/// LU factorization of the original columns to clean up accumulated pivoting error.
inline LpSolution simplex_solve(const ExplicitLp& lp, double tol = 1e-9, std::size_t max_pivots = 200000) {
    const std::size_t n = lp.num_vars;
    // x_i = offset_i + sign_i * y_pos_i  (- y_neg_i for free variables)
    std::vector<double> offset(n, 0.0), sign(n, 1.0);
    std::vector<long> col_neg(n, -1);
    std::vector<std::size_t> col_pos(n);
    std::size_t ns = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (lp.lower[i] > lp.upper[i]) return {LpStatus::infeasible, kInf, {}, 0};
        col_pos[i] = ns++;
        if (std::isfinite(lp.lower[i])) {
            offset[i] = lp.lower[i];
        } else if (std::isfinite(lp.upper[i])) {
            offset[i] = lp.upper[i];
            sign[i] = -1.0;
        } else {
            col_neg[i] = static_cast<long>(ns++);
        }
    }
    struct Row {
        Vec a;
        double b;
        bool equality;
    };
    std::vector<Row> rows;
    const auto translate = [&](const Vec& coef, double rhs, bool eq) {
        Row r{Vec(ns, 0.0), rhs, eq};
        for (std::size_t i = 0; i < n; ++i) {
            if (coef[i] == 0.0) continue;
            r.b -= coef[i] * offset[i];
            r.a[col_pos[i]] += coef[i] * sign[i];
            if (col_neg[i] >= 0) r.a[static_cast<std::size_t>(col_neg[i])] -= coef[i];
        }
        rows.push_back(std::move(r));
    };
    for (std::size_t r = 0; r < lp.ineq_rows.size(); ++r) translate(lp.ineq_rows[r], lp.ineq_rhs[r], false);
    for (std::size_t r = 0; r < lp.eq_rows.size(); ++r) translate(lp.eq_rows[r], lp.eq_rhs[r], true);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isfinite(lp.lower[i]) && std::isfinite(lp.upper[i])) {
            Row r{Vec(ns, 0.0), lp.upper[i] - lp.lower[i], false};
            r.a[col_pos[i]] = 1.0;
            rows.push_back(std::move(r));
        }
    }

    const std::size_t m = rows.size();
    std::size_t n_slack = 0;
    for (const Row& r : rows) n_slack += r.equality ? 0 : 1;
    std::vector<double> slack_sign(m, 0.0);
    std::vector<bool> needs_art(m, false);
    std::size_t n_art = 0;
    for (std::size_t r = 0; r < m; ++r) {
        const bool flip = rows[r].b < 0.0;
        if (!rows[r].equality) slack_sign[r] = flip ? -1.0 : 1.0;
        if (flip) {
            for (double& v : rows[r].a) v = -v;
            rows[r].b = -rows[r].b;
        }
        needs_art[r] = rows[r].equality || flip;
        n_art += needs_art[r] ? 1 : 0;
    }
    const std::size_t total = ns + n_slack + n_art;
    const std::size_t art_begin = ns + n_slack;

    // Original standard-form columns, kept for the final re-solve.
    Eigen::MatrixXd a_std = Eigen::MatrixXd::Zero(static_cast<long>(m), static_cast<long>(total));
    Eigen::VectorXd b_std(static_cast<long>(m));
    detail::Tableau tab(m, total);
    std::vector<std::size_t> basis(m);
    {
        std::size_t slack = ns, art = art_begin;
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < ns; ++c) tab.at(r, c) = rows[r].a[c];
            if (!rows[r].equality) {
                tab.at(r, slack) = slack_sign[r];
                if (!needs_art[r]) basis[r] = slack;
                ++slack;
            }
            if (needs_art[r]) {
                tab.at(r, art) = 1.0;
                basis[r] = art++;
            }
            tab.rhs(r) = rows[r].b;
            b_std(static_cast<long>(r)) = rows[r].b;
            for (std::size_t c = 0; c < total; ++c) a_std(static_cast<long>(r), static_cast<long>(c)) = tab.at(r, c);
        }
    }

    std::size_t pivots = 0;
    // Returns false when unbounded.
    const auto run = [&](std::size_t allowed_cols) -> bool {
        for (;;) {
            std::size_t enter = allowed_cols;
            for (std::size_t c = 0; c < allowed_cols; ++c) {
                if (tab.cost(c) < -tol) {
                    enter = c;
                    break;
                }
            }
            if (enter == allowed_cols) return true;
            std::size_t leave = m;
            double best = kInf;
            for (std::size_t r = 0; r < m; ++r) {
                const double a = tab.at(r, enter);
                if (a <= tol) continue;
                const double ratio = tab.rhs(r) / a;
                if (ratio < best - 1e-12 || (std::fabs(ratio - best) <= 1e-12 && basis[r] < basis[leave])) {
                    best = ratio;
                    leave = r;
                }
            }
            if (leave == m) return false;
            tab.pivot(leave, enter);
            basis[leave] = enter;
            if (++pivots > max_pivots) throw std::runtime_error("simplex: pivot limit exceeded");
        }
    };

    // Phase 1: minimize the sum of artificials.
    if (n_art > 0) {
        for (std::size_t c = 0; c <= total; ++c) tab.cost(c) = 0.0;
        for (std::size_t c = art_begin; c < total; ++c) tab.cost(c) = 1.0;
        for (std::size_t r = 0; r < m; ++r) {
            if (basis[r] < art_begin) continue;
            for (std::size_t c = 0; c <= total; ++c) tab.cost(c) -= tab.at(r, c);
        }
        run(total);
        const double infeasibility = -tab.cost(total);
        double scale = 1.0;
        for (std::size_t r = 0; r < m; ++r) scale = std::max(scale, std::fabs(rows[r].b));
        if (infeasibility > 1e-7 * scale) return {LpStatus::infeasible, kInf, {}, pivots};
        // Drive zero-level artificials out of the basis where possible.
        for (std::size_t r = 0; r < m; ++r) {
            if (basis[r] < art_begin) continue;
            for (std::size_t c = 0; c < art_begin; ++c) {
                if (std::fabs(tab.at(r, c)) > tol) {
                    tab.pivot(r, c);
                    basis[r] = c;
                    ++pivots;
                    break;
                }
            }
        }
    }

    // Phase 2 over structural and slack columns.
    Vec cost_std(total, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        cost_std[col_pos[i]] += lp.objective[i] * sign[i];
        if (col_neg[i] >= 0) cost_std[static_cast<std::size_t>(col_neg[i])] -= lp.objective[i];
    }
    for (std::size_t c = 0; c <= total; ++c) tab.cost(c) = c < total ? cost_std[c] : 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        const double cb = cost_std[basis[r]];
        if (cb == 0.0) continue;
        for (std::size_t c = 0; c <= total; ++c) tab.cost(c) -= cb * tab.at(r, c);
    }
    if (!run(art_begin)) return {LpStatus::unbounded, -kInf, {}, pivots};

    Vec y(total, 0.0);
    if (m > 0) {
        Eigen::MatrixXd bmat(static_cast<long>(m), static_cast<long>(m));
        for (std::size_t r = 0; r < m; ++r) bmat.col(static_cast<long>(r)) = a_std.col(static_cast<long>(basis[r]));
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(bmat);
        if (lu.isInvertible()) {
            const Eigen::VectorXd xb = lu.solve(b_std);
            for (std::size_t r = 0; r < m; ++r) y[basis[r]] = xb(static_cast<long>(r));
        } else {
            for (std::size_t r = 0; r < m; ++r) y[basis[r]] = tab.rhs(r);
        }
    }
    LpSolution sol;
    sol.status = LpStatus::optimal;
    sol.pivots = pivots;
    sol.point.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = offset[i] + sign[i] * y[col_pos[i]];
        if (col_neg[i] >= 0) v -= y[static_cast<std::size_t>(col_neg[i])];
        sol.point[i] = v;
    }
    sol.value = lp.evaluate(sol.point);
    return sol;
}

}  // namespace lagdec
