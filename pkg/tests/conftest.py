import numpy as np
import pytest

from satstab import NoiseModel, Plant, SynthesisConfig, synthesize

# Benchmark plant used across the suite: unstable oscillatory pair with a
# single saturated input channel.
BENCH_A = np.array([[0.8, 0.5], [-0.4, 1.2]])
BENCH_B = np.array([[0.0], [1.0]])
BENCH_UBAR = np.array([5.0])

# Reference optimum of the design problem at lam=0.05, mu=0.3, alpha=(1, 1e-3),
# cross-checked against an external conic solver to 1e-6 relative.
BENCH_W = np.array([[78.67, -14.16], [-14.16, 27.09]])
BENCH_EPS = 79.54


@pytest.fixture(scope="session")
def bench_plant() -> Plant:
    return Plant(A=BENCH_A, B=BENCH_B, u_bar=BENCH_UBAR)


@pytest.fixture(scope="session")
def noise_005(bench_plant) -> NoiseModel:
    return NoiseModel(lam=0.05, delta_omega=0.05 * np.eye(bench_plant.n_x))


@pytest.fixture(scope="session")
def result_mu03(bench_plant):
    result, _ = synthesize(bench_plant, SynthesisConfig(mu_grid=(0.3,), lam=0.05))
    return result


@pytest.fixture(scope="session")
def result_mu04(bench_plant):
    result, _ = synthesize(bench_plant, SynthesisConfig(mu_grid=(0.4,), lam=0.05))
    return result
