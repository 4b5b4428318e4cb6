import math

import numpy as np
import pytest

from fluxtem import detector as det_mod
from fluxtem.errors import InvalidStateError


def test_trivial_detector_invariants():
    det = det_mod.trivial(10)
    det.validate()
    assert det.n_pixels == 10
    assert det.boundary_power_fraction() == 0.0
    np.testing.assert_array_equal(det.a, det.b)
    assert np.all(det.beta == 0.0)


def test_two_region_detector():
    det = det_mod.two_region(6, 2)
    det.validate()
    np.testing.assert_allclose(det.beta[6:], math.pi)
    np.testing.assert_allclose(det.b[6:], -det.a[6:])
    assert det.power_a.sum() == pytest.approx(1.0)
    assert det.power_b.sum() == pytest.approx(1.0)


def test_degenerate_detector_flags_everything_boundary():
    det = det_mod.degenerate_two_pixel()
    assert det.boundary_mask.all()
    assert det.non_boundary_power_fraction() == 0.0
    det.validate()  # boundary pixels are exempt from the moduli law


def test_validate_rejects_unequal_moduli():
    a = np.array([1.0, 0.0], dtype=complex)
    b = np.array([0.8, 0.6], dtype=complex)
    det = det_mod.DetectorModel(
        a=a, b=b, beta=np.zeros(2), region=np.zeros(2, dtype=np.int8), tolerance=1e-6
    )
    with pytest.raises(InvalidStateError):
        det.validate()


def test_validate_rejects_off_law_beta():
    n = 4
    amp = np.full(n, 0.5, dtype=complex)
    det = det_mod.DetectorModel(
        a=amp,
        b=amp * np.exp(0.3j),
        beta=np.full(n, 0.3),
        region=np.zeros(n, dtype=np.int8),
    )
    with pytest.raises(InvalidStateError):
        det.validate(check_beta_law=True)
    det.validate(check_beta_law=False)


def test_validate_rejects_unnormalized_power():
    amp = np.array([1.0, 1.0], dtype=complex)
    det = det_mod.DetectorModel(
        a=amp, b=amp, beta=np.zeros(2), region=np.zeros(2, dtype=np.int8)
    )
    with pytest.raises(InvalidStateError):
        det.validate()


def test_csv_round_trip(tmp_path):
    det = det_mod.two_region(5, 3)
    path = tmp_path / "det.csv"
    det.to_csv(path)
    back = det_mod.DetectorModel.from_csv(path, tolerance=det.tolerance)
    np.testing.assert_array_equal(back.a, det.a)
    np.testing.assert_array_equal(back.b, det.b)
    np.testing.assert_array_equal(back.beta, det.beta)
    np.testing.assert_array_equal(back.region, det.region)


def test_equal_weight_cumulative_normalized():
    det = det_mod.two_region(7, 9)
    cum = det.equal_weight_cumulative
    assert cum[-1] == 1.0
    assert np.all(np.diff(cum) >= 0.0)


def test_mismatched_arrays_rejected():
    with pytest.raises(InvalidStateError):
        det_mod.DetectorModel(
            a=np.ones(3, dtype=complex),
            b=np.ones(2, dtype=complex),
            beta=np.zeros(3),
            region=np.zeros(3, dtype=np.int8),
        )
