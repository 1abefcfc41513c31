#include <qtdg/experiment.hpp>
#include <qtdg/solve.hpp>

#include <gtest/gtest.h>

using namespace qtdg;

TEST(Solve, OneByOne) {
    SparseMatrix A(1, 1);
    A.insert(0, 0) = 2.0;
    Eigen::VectorXd b(1);
    b << 4.0;
    EXPECT_DOUBLE_EQ(solve_linear(A, b)[0], 2.0);
}

TEST(Solve, PolyReactionResidual) {
    const auto r = solve_problem(builtin("poly_reaction"), SpaceKind::quasi_trefftz, 2, 8, {-1, 32.0, std::nullopt});
    EXPECT_LE(r->solution.residual, 1e-10);
    const auto e = compute_errors(r->solution, builtin("poly_reaction").exact);
    EXPECT_LE(e.err_L2, 1e-8);
    EXPECT_LE(e.err_H1, 1e-8);
    EXPECT_LE(e.err_Linf, 1e-8);
}

TEST(Solve, PureNeumannDiffusionIsSingular) {
    ProblemSpec p = builtin("exp_diffusion");
    p.boundary.mode = BoundaryMode::by_inflow_sign;  // no inflow, so every facet becomes Neumann
    p.boundary.g_N = [](const Vec&, const Vec&) { return 1.0; };
    const Mesh m = classify_boundary(generate_structured(2, 1), p);
    const auto b = build_bases(m, p, SpaceKind::quasi_trefftz, 1);
    const auto sys = assemble(m, p, b, {0, 1.0, std::nullopt});
    EXPECT_THROW((void)solve(sys, m, b), SingularMatrix);
}

TEST(Solve, Deterministic) {
    const auto p = builtin("smooth_dar");
    const auto a = solve_problem(p, SpaceKind::quasi_trefftz, 3, 8, {1, 72.0, std::nullopt});
    const auto b = solve_problem(p, SpaceKind::quasi_trefftz, 3, 8, {1, 72.0, std::nullopt});
    EXPECT_EQ((a->solution.coeffs - b->solution.coeffs).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Errors, ZeroSolutionAgainstOne) {
    const Mesh m = generate_structured(2, 2);
    BasisSet bases;
    for (const auto& el : m.elements()) bases.push_back(build_full_poly_basis(el, 2, 1));
    DiscreteSolution s;
    s.coeffs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * m.num_elements()));
    s.mesh = &m;
    s.bases = &bases;
    for (std::size_t t = 0; t <= m.num_elements(); ++t) s.offsets.push_back(static_cast<Eigen::Index>(3 * t));
    const auto e = compute_errors(s, ScalarField::constant(2, 1.0));
    EXPECT_NEAR(e.err_L2, 1.0, 1e-14);
    EXPECT_NEAR(e.err_H1, 1.0, 1e-14);
    EXPECT_NEAR(e.err_Linf, 1.0, 1e-14);
    EXPECT_THROW((void)compute_errors(s, std::nullopt), MissingExactSolution);
}

TEST(Errors, DarNormDominates) {
    for (const char* name : {"smooth_dar", "exp_diffusion"}) {
        const auto p = builtin(name);
        const auto r = solve_problem(p, SpaceKind::quasi_trefftz, 2, 4, {-1, 32.0, std::nullopt});
        const auto e = compute_errors(r->solution, p.exact, std::nullopt, DarNormData{&p, 32.0});
        ASSERT_TRUE(e.err_dar.has_value());
        EXPECT_GE(*e.err_dar, e.err_L2);
        // K >= min K on the square
        const double kmin = std::string(name) == "smooth_dar" ? 1.0 : std::exp(-1.0);
        EXPECT_GE(*e.err_dar, std::sqrt(kmin) * e.err_H1_semi);
        EXPECT_LE(e.err_L2, e.err_H1);
    }
}

TEST(Rates, ExactPowers) {
    ErrorReport a, b;
    a.h_actual = 0.5;
    b.h_actual = 0.25;
    a.err_L2 = a.err_H1 = a.err_Linf = 4e-2;
    b.err_L2 = b.err_H1 = b.err_Linf = 1e-2;
    EXPECT_NEAR(convergence_rates({a, b})[0].L2, 2.0, 1e-14);
    EXPECT_THROW((void)convergence_rates({b, a}), NonMonotoneH);
    EXPECT_THROW((void)convergence_rates({a}), ContractError);
}

// the table column values with a halving meshsize
TEST(Rates, TableSequences) {
    auto rates = [](std::vector<double> errs) {
        std::vector<ErrorReport> reps;
        double h = 0.25;
        for (double e : errs) {
            ErrorReport r;
            r.h_actual = h;
            r.err_L2 = r.err_H1 = r.err_Linf = e;
            reps.push_back(r);
            h /= 2;
        }
        return convergence_rates(reps);
    };
    const auto r = rates({1.445e-5, 1.704e-6, 1.991e-7});
    EXPECT_NEAR(r[0].L2, 3.085, 1e-3);
    EXPECT_NEAR(r[1].L2, 3.098, 1e-3);
}

TEST(Convergence, H1MonotoneOnExpDiffusion) {
    ExperimentConfig c;
    c.problem = "exp_diffusion";
    c.degrees = {1, 2, 3};
    c.levels = {2, 4, 8};
    c.timing = false;
    const auto rec = run(c);
    for (std::size_t k = 1; k < rec.cells.size(); ++k)
        if (rec.cells[k].p == rec.cells[k - 1].p) EXPECT_LT(rec.cells[k].report.err_H1, rec.cells[k - 1].report.err_H1);
}
