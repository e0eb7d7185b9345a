import numpy as np
import pytest

from conftest import BENCH_EPS, BENCH_W
from satstab.errors import AllInfeasible
from satstab.harness import DataCollection, generate_data
from satstab.qmi_relaxation import consistency_set, in_sigma
from satstab.saturated_sys import (
    NoiseModel,
    closed_loop_spectral_radius,
    ellipsoid_boundary_points,
    simulate,
)
from satstab.sdp import OPTIMAL, LmiProblem, SolveOptions, VarSpace, affine_constraint, solve
from satstab.synthesis import (
    SynthesisConfig,
    SynthesisResult,
    build_inclusion,
    build_phi,
    build_psi,
    certify,
    make_var_space,
    synthesize,
)


@pytest.fixture
def vs_model(bench_plant):
    return make_var_space(bench_plant.n_x, bench_plant.n_u, with_eta=False)


@pytest.fixture
def vs_data(bench_plant):
    return make_var_space(bench_plant.n_x, bench_plant.n_u, with_eta=True)


class TestBuildPhi:
    def test_identity_point_matches_hand_assembly(self, bench_plant, vs_model):
        mu, lam = 0.4, 0.05
        con = build_phi(bench_plant, vs_model, mu, lam)
        y = vs_model.pack({"eps": 1.0, "W": np.eye(2), "S": np.eye(1),
                           "Y": np.zeros((1, 2)), "Z": np.zeros((1, 2))})
        A, B = bench_plant.A, bench_plant.B
        expected = np.block([
            [0.6 * np.eye(2), np.zeros((2, 1)), A.T],
            [np.zeros((1, 2)), 2.0 * np.eye(1), B.T],
            [A, B, (1.0 - lam / mu) * np.eye(2)],
        ])
        np.testing.assert_allclose(con.evaluate(y), expected, atol=1e-15)

    def test_random_point_matches_independent_assembly(self, bench_plant, vs_model):
        mu, lam = 0.3, 0.05
        con = build_phi(bench_plant, vs_model, mu, lam)
        rng = np.random.default_rng(7)
        W = rng.normal(size=(2, 2))
        W = 0.5 * (W + W.T)
        S = np.diag(rng.uniform(0.1, 2.0, size=1))
        Y = rng.normal(size=(1, 2))
        Z = rng.normal(size=(1, 2))
        eps = float(rng.uniform(1.0, 50.0))
        y = vs_model.pack({"eps": eps, "W": W, "S": S, "Y": Y, "Z": Z})
        A, B = bench_plant.A, bench_plant.B
        expected = np.block([
            [(1 - mu) * W, Y.T + Z.T, W @ A.T + Y.T @ B.T],
            [Y + Z, 2 * S, S @ B.T],
            [A @ W + B @ Y, B @ S, W - (lam * eps / mu) * np.eye(2)],
        ])
        np.testing.assert_allclose(con.evaluate(y), expected, atol=1e-12)

    def test_noise_free_drops_the_level_variable(self, bench_plant, vs_model):
        con = build_phi(bench_plant, vs_model, mu=0.4, lam=0.0)
        assert vs_model.scalar_index("eps") not in con.Fi

    def test_level_coefficient_block(self, bench_plant, vs_model):
        mu, lam = 0.4, 0.05
        con = build_phi(bench_plant, vs_model, mu, lam)
        F = con.Fi[vs_model.scalar_index("eps")]
        expected = np.zeros((5, 5))
        expected[3:, 3:] = -(lam / mu) * np.eye(2)
        np.testing.assert_allclose(F, expected, atol=1e-15)

    def test_published_solution_is_feasible_up_to_print_precision(self, bench_plant):
        # With (W, eps) pinned to the published two-decimal values the best
        # slack over the remaining variables sits within rounding of zero.
        mu, lam = 0.3, 0.05
        A, B = bench_plant.A, bench_plant.B
        vs = VarSpace(scalars=("t",), diag_blocks=[("S", 1)],
                      rect_blocks=[("Y", (1, 2)), ("Z", (1, 2))])

        def phi_fixed(parts):
            S, Y, Z, t = parts["S"], parts["Y"], parts["Z"], parts["t"]
            return np.block([
                [(1 - mu) * BENCH_W, Y.T + Z.T, BENCH_W @ A.T + Y.T @ B.T],
                [Y + Z, 2 * S, S @ B.T],
                [A @ BENCH_W + B @ Y, B @ S,
                 BENCH_W - (lam * BENCH_EPS / mu) * np.eye(2)]]) - t * np.eye(5)

        def incl_fixed(parts):
            Z, t = parts["Z"], parts["t"]
            return np.block([[BENCH_W, Z.T], [Z, np.array([[25.0]])]]) - t * np.eye(3)

        cons = [affine_constraint(vs, phi_fixed), affine_constraint(vs, incl_fixed),
                affine_constraint(vs, lambda p: np.atleast_2d(p["S"] - p["t"] * np.eye(1)))]
        c = np.zeros(vs.size)
        c[vs.scalar_index("t")] = 1.0
        prob = LmiProblem(vars=vs, constraints=cons, objective=c,
                          lower={"t": -10.0}, upper={"t": 10.0})
        rep = solve(prob, SolveOptions(margin=0.0))
        assert rep.status == OPTIMAL
        assert rep.objective > -6e-3  # printed values carry two decimals

    def test_exact_linearity_by_finite_differences(self, bench_plant, vs_model):
        con = build_phi(bench_plant, vs_model, mu=0.3, lam=0.05)
        rng = np.random.default_rng(8)
        y0 = rng.normal(size=vs_model.size)
        base = con.evaluate(y0)
        for i in range(vs_model.size):
            e = np.zeros(vs_model.size)
            e[i] = 1.0
            diff = con.evaluate(y0 + e) - base
            expected = con.Fi.get(i, np.zeros_like(base))
            np.testing.assert_allclose(diff, expected, atol=1e-9 * (1 + np.abs(base).max()))


class TestBuildInclusion:
    def test_single_input_corner(self, vs_model):
        cons = build_inclusion(vs_model, [5.0])
        assert len(cons) == 1
        assert cons[0].block_dim == 3
        assert cons[0].F0[2, 2] == 25.0

    def test_identity_point_eigenvalue(self, vs_model):
        con = build_inclusion(vs_model, [5.0])[0]
        y = vs_model.pack({"eps": 1.0, "W": np.eye(2), "S": np.eye(1),
                           "Y": np.zeros((1, 2)), "Z": np.zeros((1, 2))})
        w = np.linalg.eigvalsh(con.evaluate(y))
        assert w[0] == pytest.approx(1.0)

    def test_violation_witness(self, vs_model):
        con = build_inclusion(vs_model, [5.0])[0]
        y = vs_model.pack({"eps": 1.0, "W": np.eye(2), "S": np.eye(1),
                           "Y": np.zeros((1, 2)), "Z": np.array([[100.0, 0.0]])})
        assert np.linalg.eigvalsh(con.evaluate(y))[0] < 0


class TestBuildPsi:
    def make_data(self, bench_plant, lam, seed=5, p=20):
        noise = NoiseModel(lam=lam, delta_omega=0.05 * np.eye(2))
        data, _ = generate_data(bench_plant, noise, p, seed)
        return data, noise

    def test_noiseless_data_reproduces_stabilizing_gain(self, bench_plant):
        data, noise = self.make_data(bench_plant, lam=0.0)
        cfg = SynthesisConfig(mu_grid=(0.3,), lam=0.0, u_bar=bench_plant.u_bar)
        result, _ = synthesize((data, noise), cfg)
        assert closed_loop_spectral_radius(bench_plant, result.K) < 1.0

    def test_zero_multiplier_point_is_never_positive(self, bench_plant, vs_data):
        data, noise = self.make_data(bench_plant, lam=0.05)
        con = build_psi(data, noise, vs_data, mu=0.3)
        y = vs_data.pack({"eps": 2.0, "eta": 0.0, "W": np.eye(2), "S": np.eye(1),
                          "Y": np.zeros((1, 2)), "Z": np.zeros((1, 2))})
        assert np.linalg.eigvalsh(con.evaluate(y))[0] < 0

    def test_multiplier_coefficient_carries_the_data_grams(self, bench_plant, vs_data):
        lam, p = 0.05, 20
        data, noise = self.make_data(bench_plant, lam=lam, p=p)
        con = build_psi(data, noise, vs_data, mu=0.3)
        F = con.Fi[vs_data.scalar_index("eta")]
        Xp, X, U = data.Xplus, data.X, data.U
        # block layout (2, 1, 2, 2, 1): third diagonal block spans rows 3:5
        np.testing.assert_allclose(F[3:5, 3:5], Xp @ Xp.T - p * lam * noise.delta_omega)
        np.testing.assert_allclose(F[3:5, 5:7], -(Xp @ X.T))
        np.testing.assert_allclose(F[3:5, 7:8], -(Xp @ U.T))
        np.testing.assert_allclose(F[5:7, 5:7], X @ X.T)
        np.testing.assert_allclose(F[5:7, 7:8], X @ U.T)
        np.testing.assert_allclose(F[7:8, 7:8], U @ U.T)
        # the noise-energy term: p * lam * (0.05 I) = 0.05 I here
        np.testing.assert_allclose((Xp @ Xp.T) - F[3:5, 3:5], 0.05 * np.eye(2))

    def test_exact_linearity_by_finite_differences(self, bench_plant, vs_data):
        data, noise = self.make_data(bench_plant, lam=0.05)
        con = build_psi(data, noise, vs_data, mu=0.4)
        rng = np.random.default_rng(9)
        y0 = rng.normal(size=vs_data.size)
        base = con.evaluate(y0)
        for i in range(vs_data.size):
            e = np.zeros(vs_data.size)
            e[i] = 1.0
            diff = con.evaluate(y0 + e) - base
            expected = con.Fi.get(i, np.zeros_like(base))
            np.testing.assert_allclose(diff, expected, atol=1e-7 * (1 + np.abs(base).max()))


class TestSynthesize:
    def test_reference_values_at_benchmark_cell(self, result_mu03):
        np.testing.assert_allclose(result_mu03.W, BENCH_W, rtol=1e-2)
        assert result_mu03.epsilon == pytest.approx(BENCH_EPS, rel=1e-2)

    def test_gain_extraction_is_exact(self, result_mu03):
        err = np.linalg.norm(result_mu03.K @ result_mu03.W - result_mu03.Y)
        assert err <= 1e-8 * (1.0 + np.linalg.norm(result_mu03.Y))
        err = np.linalg.norm(result_mu03.G @ result_mu03.W - result_mu03.Z)
        assert err <= 1e-8 * (1.0 + np.linalg.norm(result_mu03.Z))

    def test_objective_never_increases_with_noise_level(self, bench_plant):
        objectives = []
        for lam in (0.01, 0.05, 0.1):
            result, _ = synthesize(bench_plant, SynthesisConfig(mu_grid=(0.3,), lam=lam))
            objectives.append(result.objective)
        assert objectives[0] >= objectives[1] >= objectives[2]

    def test_mu_table_records_every_grid_point(self, bench_plant):
        cfg = SynthesisConfig(mu_grid=(0.1, 0.3, 0.6), lam=0.05)
        result, table = synthesize(bench_plant, cfg)
        assert [row.mu for row in table] == [0.1, 0.3, 0.6]
        assert all(row.status == OPTIMAL for row in table)
        assert result.objective == pytest.approx(max(row.objective for row in table))

    def test_noise_free_model_route(self, bench_plant):
        cfg = SynthesisConfig(mu_grid=(0.3,), lam=0.0)
        result, _ = synthesize(bench_plant, cfg)
        assert result.epsilon == pytest.approx(cfg.eps_cap, rel=1e-3)
        assert closed_loop_spectral_radius(bench_plant, result.K) < 1.0
        P = np.linalg.inv(result.W)
        for x0 in ellipsoid_boundary_points(result.basin(), 4):
            traj = simulate(bench_plant, result.K, x0, None, 1000)
            v = np.einsum("ki,ij,kj->k", traj, P, traj)
            assert np.all(np.diff(v) <= 1e-12 * v[:-1] + 1e-15)

    def test_true_plant_belongs_to_the_data_consistency_set(self, bench_plant, noise_005):
        data, _ = generate_data(bench_plant, noise_005, 20, 11)
        N = consistency_set(data.Xplus, data.X, data.U, noise_005.lam, noise_005.delta_omega)
        AB = np.vstack([bench_plant.A.T, bench_plant.B.T])
        assert in_sigma(AB, N)

    def test_not_informative_raises_all_infeasible(self, bench_plant, noise_005):
        x = np.array([[0.3], [0.7]])
        data = DataCollection(Xplus=np.hstack([x, x]), X=np.hstack([x, x]),
                              U=np.array([[0.5, 0.5]]))
        with pytest.raises(AllInfeasible):
            synthesize((data, noise_005), SynthesisConfig(mu_grid=(0.3,), lam=0.05,
                                                          u_bar=bench_plant.u_bar))

    def test_data_route_needs_levels(self, bench_plant, noise_005):
        data, _ = generate_data(bench_plant, noise_005, 20, 1)
        with pytest.raises(ValueError):
            synthesize((data, noise_005), SynthesisConfig(mu_grid=(0.3,), lam=0.05))

    def test_result_json_roundtrip(self, result_mu03):
        doc = result_mu03.to_json_dict()
        back = SynthesisResult.from_json_dict(doc)
        np.testing.assert_allclose(back.W, result_mu03.W)
        np.testing.assert_allclose(back.K, result_mu03.K)
        assert back.eta is None
        assert back.epsilon == result_mu03.epsilon


class TestCertify:
    def test_model_result_passes_battery(self, result_mu03, bench_plant, noise_005):
        report = certify(result_mu03, bench_plant, noise_005, samples=10_000, seed=0)
        assert report.passed, report.summary()
        assert set(report.checks) == {"sector", "inclusion", "decrease", "invariance"}

    def test_sign_flipped_gain_fails_decrease_with_witness(self, result_mu03, bench_plant, noise_005):
        bad = SynthesisResult(
            W=result_mu03.W, S=result_mu03.S, Y=result_mu03.Y, Z=result_mu03.Z,
            epsilon=result_mu03.epsilon, eta=None, mu=result_mu03.mu,
            K=-result_mu03.K, G=result_mu03.G, objective=result_mu03.objective)
        report = certify(bad, bench_plant, noise_005, samples=4000, seed=0)
        check = report.checks["decrease"]
        assert not check.passed
        assert check.worst > 0
        assert check.witness is not None

    def test_noise_free_battery_degenerates_to_convergence(self, bench_plant):
        cfg = SynthesisConfig(mu_grid=(0.3,), lam=0.0)
        result, _ = synthesize(bench_plant, cfg)
        noise0 = NoiseModel(lam=0.0, delta_omega=0.05 * np.eye(2))
        report = certify(result, bench_plant, noise0, samples=2000, seed=0)
        assert report.passed, report.summary()
        assert "spectral radius" in report.checks["invariance"].note
