import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weaksde.variates import (
    SeededRng,
    catalogued_moments,
    draw_elliptic,
    draw_hypo,
    elliptic_bundle_from_normals,
    hypo_bundle_from_normals,
    moment_oracle,
    n_normals_elliptic,
    n_normals_hypo,
)

from mc_moments import EXTRACTORS, run_mc_suite


def test_deterministic_replay():
    a = draw_elliptic(SeededRng(42, 3), 1.0, 2, shape=(5,))
    b = draw_elliptic(SeededRng(42, 3), 1.0, 2, shape=(5,))
    np.testing.assert_array_equal(a.B, b.B)
    np.testing.assert_array_equal(a.xi, b.xi)
    c = draw_elliptic(SeededRng(42, 4), 1.0, 2, shape=(5,))
    assert not np.array_equal(a.B, c.B)

    h1 = draw_hypo(SeededRng(7, 0), 0.25, 3)
    h2 = draw_hypo(SeededRng(7, 0), 0.25, 3)
    np.testing.assert_array_equal(h1.eta, h2.eta)
    np.testing.assert_array_equal(h1.zeta_0k, h2.zeta_0k)


@given(seed=st.integers(0, 2**32 - 1), delta=st.floats(1e-4, 4.0), d_R=st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_zeta_integration_by_parts(seed, delta, d_R):
    b = draw_hypo(SeededRng(seed), delta, d_R, shape=(16,))
    np.testing.assert_allclose(b.zeta_k0 + b.zeta_0k, b.B * delta, rtol=1e-12, atol=1e-300)


def test_bundle_shapes_and_flags():
    b = draw_elliptic(SeededRng(0), 0.5, 3, shape=(4, 2))
    assert b.B.shape == (4, 2, 3)
    assert b.xi.shape == (4, 2, 3, 3)
    assert b.d_R == 3 and not b.is_hypo
    h = draw_hypo(SeededRng(0), 0.5, 2)
    assert h.eta.shape == (3, 3)
    assert h.is_hypo
    assert h.eta[0, 0] == 0.0


def test_deterministic_scaling_in_delta():
    # with the normals held fixed, entries scale by the advertised powers of delta
    d_R = 3
    rng = SeededRng(11)
    normals = rng.standard_normal((8, n_normals_hypo(d_R)))
    b1 = hypo_bundle_from_normals(normals, 0.5, d_R)
    b4 = hypo_bundle_from_normals(normals, 2.0, d_R)
    np.testing.assert_allclose(b4.B, 2.0 * b1.B, rtol=1e-12)
    np.testing.assert_allclose(b4.xi, 4.0 * b1.xi, rtol=1e-12)
    np.testing.assert_allclose(b4.zeta_0k, 8.0 * b1.zeta_0k, rtol=1e-12)
    np.testing.assert_allclose(b4.zeta_k0, 8.0 * b1.zeta_k0, rtol=1e-12)
    # inner eta block carries two Brownian indices (delta^2); the time
    # row/column carry one Brownian and two time integrations (delta^{5/2})
    np.testing.assert_allclose(b4.eta[..., 1:, 1:], 16.0 * b1.eta[..., 1:, 1:], rtol=1e-12)
    np.testing.assert_allclose(b4.eta[..., 1:, 0], 32.0 * b1.eta[..., 1:, 0], rtol=1e-12)
    np.testing.assert_allclose(b4.eta[..., 0, 1:], 32.0 * b1.eta[..., 0, 1:], rtol=1e-12)


def test_bad_inputs():
    with pytest.raises(ValueError):
        draw_elliptic(SeededRng(0), 0.0, 2)
    with pytest.raises(ValueError):
        draw_hypo(SeededRng(0), -1.0, 2)
    with pytest.raises(ValueError):
        elliptic_bundle_from_normals(np.zeros((4, 5)), 1.0, 2)  # needs 3
    with pytest.raises(ValueError):
        hypo_bundle_from_normals(np.zeros((4, 5)), 1.0, 2)  # needs 8


def test_moment_oracle_hand_values():
    assert moment_oracle("E[eta_0k zeta_k0]", 1.0, (2, 2)) == pytest.approx(1 / 6)
    assert moment_oracle("E[eta eta]", 2.0, (1, 2, 1, 2)) == pytest.approx(16 / 12)
    assert moment_oracle("E[eta eta]", 2.0, (1, 2, 2, 1)) == 0.0
    assert moment_oracle("E[xi xi]", 0.5, (1, 2, 1, 2)) == pytest.approx(0.125)
    assert moment_oracle("E[xi xi]", 0.5, (1, 2, 2, 1)) == 0.0
    # quadratic-in-B moments distinguish three index patterns
    assert moment_oracle("E[xi B B]", 2.0, (1, 1, 1, 1)) == pytest.approx(4.0)
    assert moment_oracle("E[xi B B]", 2.0, (1, 2, 1, 2)) == pytest.approx(2.0)
    assert moment_oracle("E[xi B B]", 2.0, (1, 2, 2, 1)) == pytest.approx(2.0)
    assert moment_oracle("E[xi B B]", 2.0, (1, 1, 2, 2)) == 0.0
    assert moment_oracle("E[zeta_0k zeta_0k]", 1.0, (1, 1)) == pytest.approx(1 / 3)
    assert moment_oracle("E[B zeta_0k]", 1.0, (1, 1)) == pytest.approx(0.5)
    assert moment_oracle("E[I_k0 I_k00]", 1.0, (1, 1)) == pytest.approx(1 / 8)
    assert moment_oracle("E[I_k0 I_0k0]", 1.0, (1, 1)) == pytest.approx(1 / 6)
    assert moment_oracle("E[eta]", 1.0, (0, 2)) == 0.0


def test_moment_oracle_errors():
    with pytest.raises(ValueError, match="unknown moment identifier"):
        moment_oracle("E[nonsense]", 1.0, (1,))
    with pytest.raises(ValueError, match="expects"):
        moment_oracle("E[xi xi]", 1.0, (1, 2))
    with pytest.raises(ValueError, match=">="):
        moment_oracle("E[xi]", 1.0, (0, 1))
    with pytest.raises(ValueError):
        moment_oracle("E[B B]", -1.0, (1, 1))


def test_every_extractable_moment_is_catalogued():
    known = set(catalogued_moments())
    assert set(EXTRACTORS) <= known


def test_mc_moment_suite_quick():
    # reduced-N version of the acceptance criterion (there: N=2e6, both deltas)
    rows = run_mc_suite(N=200_000, delta=0.5, d_R=2, seed=2024)
    bad = [r for r in rows if abs(r["z"]) > 5.0]
    assert not bad, f"moments out of 5 SE: {bad}"
