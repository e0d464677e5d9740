import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qiplab import linalg
from qiplab.errors import ArgumentError, DimensionError, ValidationError

from conftest import haar_unitary, random_density

# Frozen independent constants for |0><0| vs |+><+| (computed from the 2x2
# eigendecomposition by hand, see oracles/distance_constants.py).
T_ZERO_PLUS = math.sqrt(2.0) / 2.0
F_ZERO_PLUS = math.sqrt(2.0) / 2.0

ZERO = np.array([[1, 0], [0, 0]], dtype=complex)
PLUS = np.full((2, 2), 0.5, dtype=complex)


def test_trace_distance_frozen_constant():
    assert abs(linalg.trace_distance(ZERO, PLUS) - T_ZERO_PLUS) < 1e-12


def test_fidelity_frozen_constant():
    assert abs(linalg.fidelity(ZERO, PLUS) - F_ZERO_PLUS) < 1e-12


def test_trace_distance_extremes():
    one = np.array([[0, 0], [0, 1]], dtype=complex)
    assert abs(linalg.trace_distance(ZERO, one) - 1.0) < 1e-12
    assert linalg.trace_distance(ZERO, ZERO) == 0.0


def test_pair_must_be_normalized():
    with pytest.raises(ArgumentError):
        linalg.trace_distance(2 * ZERO, PLUS)


seeds = st.integers(min_value=0, max_value=2 ** 31 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from([2, 3, 4]))
def test_trace_distance_is_a_metric(seed, d):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(d, rng) for _ in range(3))
    tab = linalg.trace_distance(a, b)
    assert 0.0 <= tab <= 1.0
    assert abs(tab - linalg.trace_distance(b, a)) < 1e-12
    assert tab <= linalg.trace_distance(a, c) + \
        linalg.trace_distance(c, b) + 1e-12


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from([2, 3, 4]))
def test_fidelity_trace_distance_bounds(seed, d):
    rng = np.random.default_rng(seed)
    a, b = random_density(d, rng), random_density(d, rng)
    f = linalg.fidelity(a, b)
    t = linalg.trace_distance(a, b)
    assert 0.0 <= f <= 1.0 + 1e-12
    assert 1 - f <= t + 1e-9
    assert t <= math.sqrt(max(1 - f * f, 0.0)) + 1e-9


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    a, b = random_density(4, rng), random_density(4, rng)
    u = haar_unitary(4, rng)
    t0 = linalg.trace_distance(a, b)
    t1 = linalg.trace_distance(u @ a @ u.conj().T, u @ b @ u.conj().T)
    assert abs(t0 - t1) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_partial_trace_contracts_distance(seed):
    rng = np.random.default_rng(seed)
    a, b = random_density(4, rng), random_density(4, rng)
    ra = linalg.partial_trace_mat(a, [2, 2], [0])
    rb = linalg.partial_trace_mat(b, [2, 2], [0])
    assert linalg.trace_distance(ra, rb) <= \
        linalg.trace_distance(a, b) + 1e-10


def test_partial_trace_of_product(rng):
    a, b = random_density(2, rng), random_density(2, rng)
    prod = np.kron(a, b)
    assert np.allclose(linalg.partial_trace_mat(prod, [2, 2], [0]), a)
    assert np.allclose(linalg.partial_trace_mat(prod, [2, 2], [1]), b)


def test_tensor_all_and_cap(rng):
    mats = [random_density(2, rng) for _ in range(3)]
    full = linalg.tensor_all(mats)
    assert full.shape == (8, 8)
    assert abs(np.trace(full).real - 1.0) < 1e-12
    with pytest.raises(DimensionError):
        linalg.tensor_all([np.eye(2)] * 20)


def test_pure_state_and_density_checks(rng):
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v /= np.linalg.norm(v)
    rho = linalg.pure_state(v)
    assert abs(np.trace(rho.mat).real - 1.0) < 1e-12
    assert linalg.is_psd(rho.mat)
    with pytest.raises(ValidationError):
        linalg.DensityMatrix(np.array([[1, 1], [0, 0]], dtype=complex))


def test_psd_clip_removes_negative_part():
    m = np.diag([1.0, -0.2]).astype(complex)
    clipped = linalg.psd_clip(m)
    assert linalg.is_psd(clipped)


def test_eig_hermitian_reconstructs(rng):
    m = random_density(4, rng)
    vals, vecs = linalg.eig_hermitian(m)
    rebuilt = vecs @ np.diag(vals) @ vecs.conj().T
    assert np.allclose(rebuilt, m, atol=1e-10)


def test_matrix_json_round_trip(rng):
    m = random_density(3, rng)
    data = json.loads(linalg.mat_dumps(m))
    # entries serialize as [re, im] pairs
    assert isinstance(data[0][0], list) and len(data[0][0]) == 2
    assert np.allclose(linalg.mat_loads(json.dumps(data)), m)
