#include "cbr/fit.hpp"

#include <algorithm>
#include <cmath>

#include "cbr/errors.hpp"

namespace cbr::fit {

namespace {

Bound bound_of(const FitModel& m, std::size_t k) { return m.bounds.empty() ? Bound{} : m.bounds[k]; }

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double cost_of(const FitData& data, std::span<const double> r) {
    double c = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) c += data.weight(i) * r[i] * r[i];
    return c;
}

Eigen::MatrixXd jacobian_of(const FitModel& model, std::span<const double> p, const FitData& data) {
    if (model.jacobian) {
        Eigen::MatrixXd J(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(model.n_params));
        model.jacobian(p, data, J);
        return J;
    }
    return numerical_jacobian(model, p, data);
}

// Rank test on the diagonally scaled normal matrix.
void require_full_rank(const Eigen::MatrixXd& A, const std::vector<std::string>& names,
                       const std::vector<std::size_t>& free_idx) {
    const Eigen::Index n = A.rows();
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(A(i, i) > 0.0)) {
            const std::size_t k = free_idx[static_cast<std::size_t>(i)];
            throw RankDeficientError("normal matrix is singular: parameter has no effect on the residual",
                                     k < names.size() ? names[k] : "param " + std::to_string(k));
        }
        d(i) = 1.0 / std::sqrt(A(i, i));
    }
    const Eigen::MatrixXd S = d.asDiagonal() * A * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 1e-13 * hi)) throw RankDeficientError("normal matrix is singular: parameters are degenerate");
}

}  // namespace

void FitModel::validate() const {
    if (n_params == 0) throw ParameterError("model has no parameters");
    if (!residual) throw ParameterError("model has no residual function");
    if (!bounds.empty()) {
        if (bounds.size() != n_params) throw ShapeError("bounds size differs from parameter count");
        for (std::size_t k = 0; k < n_params; ++k)
            if (!(bounds[k].lower <= bounds[k].upper))
                throw ParameterError("lower bound exceeds upper bound", "param " + std::to_string(k));
    }
}

FitModel make_curve_model(std::size_t n_params, std::function<double(std::span<const double>, double)> f,
                          std::vector<std::string> names) {
    FitModel m;
    m.n_params = n_params;
    m.names = std::move(names);
    m.residual = [f = std::move(f)](std::span<const double> p, const FitData& d, std::span<double> r) {
        for (std::size_t i = 0; i < d.size(); ++i) r[i] = f(p, d.x[i]) - d.y[i];
    };
    return m;
}

double weighted_cost(const FitModel& model, const FitData& data, std::span<const double> params) {
    std::vector<double> r(data.size());
    model.residual(params, data, r);
    return cost_of(data, r);
}

Eigen::MatrixXd numerical_jacobian(const FitModel& model, std::span<const double> params, const FitData& data) {
    if (!all_finite(params)) throw DomainError("parameters are not finite");
    const std::size_t n = model.n_params;
    const std::size_t m = data.size();
    Eigen::MatrixXd J(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    std::vector<double> p(params.begin(), params.end());
    std::vector<double> rp(m), rm(m);
    for (std::size_t k = 0; k < n; ++k) {
        const double h = std::max(1e-8, 1e-8 * std::abs(p[k]));
        const Bound b = bound_of(model, k);
        const double p0 = p[k];
        double up = p0 + h;
        double dn = p0 - h;
        if (up > b.upper) up = p0;
        if (dn < b.lower) dn = p0;
        if (up == dn) {
            J.col(static_cast<Eigen::Index>(k)).setZero();
            continue;
        }
        p[k] = up;
        model.residual(p, data, rp);
        p[k] = dn;
        model.residual(p, data, rm);
        p[k] = p0;
        const double span = up - dn;
        for (std::size_t i = 0; i < m; ++i) {
            const double v = (rp[i] - rm[i]) / span;
            if (!std::isfinite(v)) throw DomainError("non-finite Jacobian entry", "param " + std::to_string(k));
            J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
        }
    }
    return J;
}

FitResult least_squares_fit(const FitModel& model, const FitData& data, std::vector<double> p,
                            const FitOptions& options) {
    model.validate();
    const std::size_t n = model.n_params;
    const std::size_t m = data.size();
    if (p.size() != n) throw ShapeError("initial parameter vector has wrong size");
    if (!data.weights.empty() && data.weights.size() != m) throw ShapeError("weights size differs from data");
    if (!data.x.empty() && data.x.size() != m) throw ShapeError("x size differs from y");

    std::size_t n_variable = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const Bound b = bound_of(model, k);
        if (!(p[k] >= b.lower && p[k] <= b.upper))
            throw DomainError("initial parameter outside bounds",
                              k < model.names.size() ? model.names[k] : "param " + std::to_string(k));
        if (b.lower < b.upper) ++n_variable;
    }
    if (m < n_variable) throw DataError("fewer data points than free parameters");

    std::vector<double> r(m), r_trial(m);
    model.residual(p, data, r);
    if (!all_finite(r)) throw DomainError("residual is not finite at the initial parameters");
    double cost = cost_of(data, r);

    FitResult result;
    result.names = model.names;
    result.n_points = m;
    double lambda = options.initial_lambda;
    std::vector<double> trial(n);
    bool converged = false;
    int iter = 0;

    for (; iter < options.max_iterations && !converged; ++iter) {
        if (cost == 0.0) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd J = jacobian_of(model, p, data);
        Eigen::VectorXd wr(static_cast<Eigen::Index>(m));
        Eigen::MatrixXd WJ = J;
        for (std::size_t i = 0; i < m; ++i) {
            const double w = data.weight(i);
            wr(static_cast<Eigen::Index>(i)) = w * r[i];
            WJ.row(static_cast<Eigen::Index>(i)) *= w;
        }
        const Eigen::VectorXd g = J.transpose() * wr;
        const Eigen::MatrixXd A = J.transpose() * WJ;

        std::vector<std::size_t> free_idx;
        for (std::size_t k = 0; k < n; ++k) {
            const Bound b = bound_of(model, k);
            if (!(b.lower < b.upper)) continue;
            const double gk = g(static_cast<Eigen::Index>(k));
            if (p[k] <= b.lower && gk > 0.0) continue;
            if (p[k] >= b.upper && gk < 0.0) continue;
            free_idx.push_back(k);
        }
        if (free_idx.empty()) {
            converged = true;
            break;
        }
        const auto nf = static_cast<Eigen::Index>(free_idx.size());
        Eigen::MatrixXd Af(nf, nf);
        Eigen::VectorXd gf(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
            gf(a) = g(static_cast<Eigen::Index>(free_idx[static_cast<std::size_t>(a)]));
            for (Eigen::Index b = 0; b < nf; ++b)
                Af(a, b) = A(static_cast<Eigen::Index>(free_idx[static_cast<std::size_t>(a)]),
                             static_cast<Eigen::Index>(free_idx[static_cast<std::size_t>(b)]));
        }
        require_full_rank(Af, model.names, free_idx);

        // inner damping loop: raise lambda until a step lowers the cost
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd M = Af;
            for (Eigen::Index a = 0; a < nf; ++a) M(a, a) += lambda * Af(a, a);
            const Eigen::VectorXd step = M.ldlt().solve(-gf);
            trial = p;
            for (Eigen::Index a = 0; a < nf; ++a) {
                const std::size_t k = free_idx[static_cast<std::size_t>(a)];
                const Bound b = bound_of(model, k);
                trial[k] = std::clamp(p[k] + step(a), b.lower, b.upper);
            }
            model.residual(trial, data, r_trial);
            const double trial_cost = all_finite(r_trial) ? cost_of(data, r_trial)
                                                          : std::numeric_limits<double>::infinity();
            if (trial_cost < cost) {
                double dp2 = 0.0, p2 = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    dp2 += (trial[k] - p[k]) * (trial[k] - p[k]);
                    p2 += p[k] * p[k];
                }
                const double decrease = cost - trial_cost;
                p = trial;
                r = r_trial;
                const double old_cost = cost;
                cost = trial_cost;
                result.cost_history.push_back(cost);
                lambda = std::max(lambda / 10.0, 1e-15);
                accepted = true;
                if (std::sqrt(dp2) <= options.param_tolerance * (std::sqrt(p2) + options.param_tolerance) ||
                    decrease <= options.cost_tolerance * old_cost)
                    converged = true;
            } else {
                lambda *= 10.0;
                if (lambda > 1e16) {
                    // no descent direction left at working precision
                    converged = true;
                    break;
                }
            }
        }
    }

    result.params = p;
    result.iterations = iter;
    result.converged = converged;
    result.chi2 = cost;

    const Eigen::MatrixXd J = jacobian_of(model, p, data);
    Eigen::MatrixXd WJ = J;
    for (std::size_t i = 0; i < m; ++i) WJ.row(static_cast<Eigen::Index>(i)) *= data.weight(i);
    const Eigen::MatrixXd A = J.transpose() * WJ;
    std::vector<std::size_t> var_idx;
    result.at_bound.assign(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const Bound b = bound_of(model, k);
        if (b.lower < b.upper) var_idx.push_back(k);
        result.at_bound[k] = (p[k] <= b.lower || p[k] >= b.upper);
    }
    const auto nv = static_cast<Eigen::Index>(var_idx.size());
    Eigen::MatrixXd Av(nv, nv);
    for (Eigen::Index a = 0; a < nv; ++a)
        for (Eigen::Index b = 0; b < nv; ++b)
            Av(a, b) = A(static_cast<Eigen::Index>(var_idx[static_cast<std::size_t>(a)]),
                         static_cast<Eigen::Index>(var_idx[static_cast<std::size_t>(b)]));
    result.covariance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    if (nv > 0) {
        Eigen::MatrixXd Ci;
        try {
            require_full_rank(Av, model.names, var_idx);
            Ci = Av.ldlt().solve(Eigen::MatrixXd::Identity(nv, nv));
        } catch (const RankDeficientError&) {
            // a parameter pinned at a bound can leave a flat direction
            Ci = Av.completeOrthogonalDecomposition().pseudoInverse();
        }
        Ci = 0.5 * (Ci + Ci.transpose());
        for (Eigen::Index a = 0; a < nv; ++a)
            for (Eigen::Index b = 0; b < nv; ++b)
                result.covariance(static_cast<Eigen::Index>(var_idx[static_cast<std::size_t>(a)]),
                                  static_cast<Eigen::Index>(var_idx[static_cast<std::size_t>(b)])) = Ci(a, b);
    }
    const std::size_t dof = m > var_idx.size() ? m - var_idx.size() : 1;
    result.reduced_chi2 = cost / static_cast<double>(dof);
    return result;
}

std::vector<double> parameter_uncertainties(const FitResult& result) {
    if (!result.converged) throw StateError("fit did not converge; uncertainties are undefined");
    const auto n = static_cast<std::size_t>(result.covariance.rows());
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double v = result.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
        out[k] = std::sqrt(std::max(v, 0.0) * result.reduced_chi2);
    }
    return out;
}

}  // namespace cbr::fit
