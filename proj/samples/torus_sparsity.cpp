// Solves self-transport of the uniform measure on the circle for a few epsilons and compares
// section diameters with the closed-form support radius.

#include <cstdio>
#include <vector>

#include "rot/dual_solver.hpp"
#include "rot/plan.hpp"
#include "rot/rate_harness.hpp"
#include "rot/torus_oracle.hpp"

int main() {
    using namespace rot;
    const double p = 2.0;
    const auto dom = Domain::torus(1);
    const auto grid = uniform_grid_measure(dom, 1024);
    const RotProblem base(grid, grid, CostKernel::for_domain(dom), SolverParams(1e-2, p));

    std::vector<double> eps_list = log_spaced(1e-2, 1e-4, 5), diameters;
    std::printf("%-10s %-12s %-12s %-10s\n", "epsilon", "diameter", "2 R_eps", "members");
    for (double eps : eps_list) {
        const RotProblem pb(base.lambda, base.mu, base.kernel, SolverParams(eps, p));
        const auto sol = solve_dual(pb);
        const PlanAnalysis plan(pb, sol.duals);
        const auto sec = plan.section(0);
        const auto oracle = TorusSolution::make(1, p, eps);
        std::printf("%-10.3g %-12.6f %-12.6f %-10zu\n", eps, sec.diameter, 2.0 * oracle.r_eps, sec.member_indices.size());
        diameters.push_back(sec.diameter);
    }
    const auto fit = fit_loglog(eps_list, diameters, 1.0 / 3.0, 0.05);
    std::printf("fitted slope %.4f (expected 1/3): %s\n", fit.slope, fit.pass ? "pass" : "fail");
    return fit.pass ? 0 : 1;
}
