#include "spatconf/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "spatconf/errors.hpp"

namespace spatconf {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& start,
                             const Eigen::VectorXd& step, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             int max_evals, double ftol) {
    const Eigen::Index dim = start.size();
    auto clamp = [&](Eigen::VectorXd p) {
        for (Eigen::Index i = 0; i < dim; ++i) p(i) = std::clamp(p(i), lower(i), upper(i));
        return p;
    };
    NelderMeadResult out;
    auto eval = [&](const Eigen::VectorXd& p) {
        ++out.evals;
        const double v = f(p);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<Eigen::VectorXd> simplex;
    std::vector<double> values;
    simplex.push_back(clamp(start));
    values.push_back(eval(simplex.back()));
    for (Eigen::Index i = 0; i < dim; ++i) {
        Eigen::VectorXd p = simplex.front();
        p(i) += step(i);
        if (p(i) > upper(i)) p(i) = simplex.front()(i) - step(i);
        simplex.push_back(clamp(p));
        values.push_back(eval(simplex.back()));
    }

    std::vector<std::size_t> order(simplex.size());
    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const double best = values[order.front()];
        const double worst = values[order.back()];
        if (std::isfinite(worst) && worst - best <= ftol * (1.0 + std::abs(best))) {
            out.converged = true;
            break;
        }
        if (out.evals >= max_evals) break;

        const std::size_t hi = order.back();
        const std::size_t second = order[order.size() - 2];
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
        for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += simplex[order[k]];
        centroid /= static_cast<double>(dim);

        const Eigen::VectorXd reflected = clamp(centroid + (centroid - simplex[hi]));
        const double f_ref = eval(reflected);
        if (f_ref < best) {
            const Eigen::VectorXd expanded = clamp(centroid + 2.0 * (centroid - simplex[hi]));
            const double f_exp = eval(expanded);
            if (f_exp < f_ref) {
                simplex[hi] = expanded;
                values[hi] = f_exp;
            } else {
                simplex[hi] = reflected;
                values[hi] = f_ref;
            }
            continue;
        }
        if (f_ref < values[second]) {
            simplex[hi] = reflected;
            values[hi] = f_ref;
            continue;
        }
        const bool outside = f_ref < values[hi];
        const Eigen::VectorXd contracted =
            outside ? clamp(centroid + 0.5 * (reflected - centroid)) : clamp(centroid + 0.5 * (simplex[hi] - centroid));
        const double f_con = eval(contracted);
        if (f_con < (outside ? f_ref : values[hi])) {
            simplex[hi] = contracted;
            values[hi] = f_con;
            continue;
        }
        const Eigen::VectorXd anchor = simplex[order.front()];
        for (std::size_t k = 1; k < order.size(); ++k) {
            const std::size_t idx = order[k];
            simplex[idx] = anchor + 0.5 * (simplex[idx] - anchor);
            values[idx] = eval(simplex[idx]);
        }
    }
    const auto best_it = std::min_element(values.begin(), values.end());
    out.x = simplex[static_cast<std::size_t>(best_it - values.begin())];
    out.value = *best_it;
    return out;
}

ScalarMinimum golden_section(const std::function<double(double)>& f, double a, double b, double xtol, int max_iter) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < max_iter && std::abs(b - a) > xtol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? ScalarMinimum{c, fc} : ScalarMinimum{d, fd};
}

double bisect(const std::function<double(double)>& f, double a, double b, double xtol, int max_iter) {
    double fa = f(a);
    const double fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0)) throw NumericalError("bisect: interval does not bracket a root");
    for (int it = 0; it < max_iter && std::abs(b - a) > xtol; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) return m;
        if ((fm > 0.0) == (fa > 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

} // namespace spatconf
