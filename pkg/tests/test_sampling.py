import numpy as np
import pytest

from saacontrol.problems import OscillatorConfig, VaccinationConfig
from saacontrol.sampling import (
    ParameterBox,
    SampleSet,
    derive_seed,
    nominal_point,
    sample_iid,
    sample_sobol,
)


def gray_code_sobol_dim1(n):
    """First n points (after the origin) of the 1-D Sobol' sequence, direction numbers 2^-k."""
    out = []
    for i in range(1, n + 1):
        gray = i ^ (i >> 1)
        acc, k = 0, 1
        while gray:
            if gray & 1:
                acc ^= 1 << (32 - k)
            gray >>= 1
            k += 1
        out.append(acc / 2**32)
    return np.array(out)


class TestIid:
    def test_degenerate_box(self):
        s = sample_iid(([0.0, 1.0], [0.0, 1.0]), 7, 3)
        assert np.array_equal(s.points, np.tile([0.0, 1.0], (7, 1)))

    def test_uniform_mean(self):
        s = sample_iid(([0.0], [1.0]), 100_000, 11)
        # 3 sigma of the mean is 3 / sqrt(12 * 1e5) ~ 0.0027
        assert abs(s.points.mean() - 0.5) <= 0.01

    def test_deterministic(self):
        a = sample_iid(([0.0, -1.0], [1.0, 1.0]), 50, 42)
        b = sample_iid(([0.0, -1.0], [1.0, 1.0]), 50, 42)
        assert np.array_equal(a.points, b.points)
        assert a.provenance == {"generator": "iid", "seed": 42, "N": 50}

    def test_points_in_box(self):
        box = OscillatorConfig().box
        s = sample_iid(box, 500, 1)
        assert np.all(s.points >= box.lower) and np.all(s.points <= box.upper)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample_iid(([1.0], [0.0]), 3, 0)
        with pytest.raises(ValueError):
            sample_iid(([0.0], [1.0]), 0, 0)


class TestDeriveSeed:
    def test_distinct_over_replications(self):
        seeds = {derive_seed(7, n, r) for n in (4, 8, 16, 32, 64, 128, 256) for r in range(50)}
        assert len(seeds) == 350

    def test_stable(self):
        assert derive_seed(7, 4, 0) == derive_seed(7, 4, 0)
        assert derive_seed(7, 4, 0) != derive_seed(8, 4, 0)


class TestSobol:
    def test_unscrambled_reference_values(self):
        s = sample_sobol(([0.0], [1.0]), 3, 0)
        np.testing.assert_array_equal(s.points[:, 0], [0.5, 0.75, 0.25])

    def test_unscrambled_matches_gray_code_construction(self):
        s = sample_sobol(([0.0], [1.0]), 64, 0)
        np.testing.assert_array_equal(s.points[:, 0], gray_code_sobol_dim1(64))

    def test_degenerate_box(self):
        s = sample_sobol(([2.0], [2.0]), 10, 5)
        assert np.all(s.points == 2.0)

    def test_uniformity_4096(self):
        s = sample_sobol((np.zeros(6), np.ones(6)), 4096, 123)
        assert np.all(np.abs(s.points.mean(axis=0) - 0.5) <= 0.005)

    def test_shift_changes_points_but_is_deterministic(self):
        box = (np.zeros(3), np.ones(3))
        a, b, c = sample_sobol(box, 16, 1), sample_sobol(box, 16, 1), sample_sobol(box, 16, 2)
        assert np.array_equal(a.points, b.points)
        assert not np.array_equal(a.points, c.points)

    def test_digital_shift_preserves_stratification(self):
        # the first 2^k points after the origin hit every dyadic interval of length 2^-k at most twice
        pts = sample_sobol(([0.0], [1.0]), 256, 99).points[:, 0]
        counts = np.bincount((pts * 256).astype(int), minlength=256)
        assert counts.max() <= 2

    def test_dimension_limit(self):
        with pytest.raises(ValueError):
            sample_sobol((np.zeros(9), np.ones(9)), 4, 1)

    def test_in_box(self):
        box = VaccinationConfig().box
        s = sample_sobol(box, 1000, 3)
        assert np.all(s.points >= box.lower) and np.all(s.points <= box.upper)


class TestNominal:
    def test_oscillator(self):
        np.testing.assert_allclose(nominal_point(OscillatorConfig().box), [np.pi, 0, 0, 0, 0], atol=1e-15)

    def test_vaccination(self):
        np.testing.assert_allclose(nominal_point(VaccinationConfig().box), [0.2, 0.525, 0.001, 0.5, 0.5, 0.1], rtol=1e-15)

    def test_unit(self):
        assert np.array_equal(nominal_point(ParameterBox(np.zeros(4), np.ones(4))), np.full(4, 0.5))


def test_csv_roundtrip(tmp_path):
    s = sample_iid(([0.0, -1.0], [1.0, 1.0]), 20, 9)
    s.to_csv(tmp_path / "s.csv")
    back = SampleSet.from_csv(tmp_path / "s.csv")
    assert np.array_equal(back.points, s.points)
