import numpy as np
import pytest

from fevo.operators import FunctionGrid
from fevo.rng import RngStream
from fevo.symbol import JumpDist, make_symbol
from fevo.validation import (
    ValidationReport,
    empirical_cf_test,
    fit_limit,
    fit_linear_constant,
    generator_coincidence_test,
    piecewise_drift_oracle,
    positive_maximum_suite,
    random_bumps,
    strong_continuity_probe,
)


def gauss_grid(N=512):
    return FunctionGrid.sample(lambda x: np.exp(-0.5 * x**2), -16, 16, N)


def wave_grid(N=512):
    return FunctionGrid.sample(lambda x: np.sin(x) * np.exp(-x**2 / 8), -16, 16, N)


def test_report_structure():
    rep = ValidationReport("demo")
    rep.add("a", 0.1, 0.2, seed=3, k=1)
    assert rep.verdict
    rep.add("b", 0.3, 0.2)
    assert not rep.verdict
    other = ValidationReport("sub")
    other.add("c", 0.0, 0.0)
    other.notes.append("hello")
    rep.extend(other)
    assert [r.name for r in rep.records] == ["a", "b", "sub/c"]
    assert all(r.tolerance is not None for r in rep.records)
    text = rep.to_text()
    assert "verdict = fail" in text and "# note: hello" in text and "seed = 3" in text
    rows = rep.to_csv().strip().split("\n")
    assert rows[0].startswith("scenario,check,passed")
    assert len(rows) == 4
    assert rep.summary_lines()[1].startswith("FAIL demo/b")


def test_cf_drift_only_exact():
    rep = empirical_cf_test(make_symbol(drift="2"), 0.0, [0.3], 0.1, np.arange(-5, 6), 10_000,
                            RngStream(1))
    assert rep.records[0].error <= 1e-12


def test_cf_brownian():
    rep = empirical_cf_test(make_symbol(diffusion="1"), 0.0, [0.0], 0.01, np.arange(-5, 6),
                            100_000, RngStream(2))
    assert rep.verdict
    assert rep.records[0].error <= 0.0127
    assert any("Bonferroni" in n for n in rep.notes)


def test_cf_point_jump_at_pi():
    sym = make_symbol(intensity="1", jump=JumpDist.point([1.0]))
    rep = empirical_cf_test(sym, 0.0, [0.5], 1.0, [np.pi], 100_000, RngStream(3))
    assert rep.records[0].error <= 0.013
    assert rep.records[0].params["worst_xi"] == [np.pi]


def test_cf_reproducible_and_guarded():
    sym = make_symbol(alpha=1.5, scale="0.7")
    a = empirical_cf_test(sym, 0.0, [0.0], 0.1, [1.0, 2.0], 10_000, RngStream(4, 9))
    b = empirical_cf_test(sym, 0.0, [0.0], 0.1, [1.0, 2.0], 10_000, RngStream(4, 9))
    assert a.to_text() == b.to_text()
    with pytest.raises(ValueError):
        empirical_cf_test(sym, 0.0, [0.0], 0.1, [1.0], 9_999, RngStream(4))


def test_fits():
    assert fit_limit([4e-3, 2e-3, 1e-3], [1.4, 1.2, 1.1]) == pytest.approx((1.0, 100.0))
    assert fit_linear_constant([0.1, 0.05, 0.01], [0.2, 0.1, 0.05]) == pytest.approx(2.0)


def test_strong_continuity_brownian(brownian):
    rep = strong_continuity_probe(brownian, gauss_grid(), 0.0, 0.5, [0.1, 0.05, 0.025, 0.0125], 8)
    assert rep.verdict
    for r in rep.records:
        assert r.params["fitted_C"] < 1
    zero = strong_continuity_probe(brownian, gauss_grid(), 0.0, 0.5, [0.1, 0.05, 0.0], 8)
    assert zero.records[0].params["deviations"][-1] == 0.0


def test_strong_continuity_drift(example3):
    # Lipschitz constant of the Gaussian is exp(-1/2)
    lip = np.exp(-0.5)
    deltas = [0.08, 0.04, 0.02]
    rep = strong_continuity_probe(example3, gauss_grid(), 0.0, 0.4, deltas, 8)
    assert rep.verdict
    for r in rep.records:
        for d, dev in zip(deltas, r.params["deviations"]):
            assert dev <= lip * 2 * d + 1e-6


def test_coincidence_time_homogeneous():
    sym = make_symbol(drift="0.5 + 0*s", diffusion="1")
    rep = generator_coincidence_test(sym, 0.3, gauss_grid(), [4e-3, 2e-3, 1e-3], 10_000,
                                     RngStream(5), expect="coincide", points=np.arange(224, 289, 8))
    assert rep.verdict
    assert rep.records[0].params["outcome"] == "coincide"
    assert max(rep.records[0].params["differences"]) <= 1e-12


def test_coincidence_smooth_drift():
    sym = make_symbol(drift="1 + s^2/4")
    rep = generator_coincidence_test(sym, 1.0, wave_grid(), [4e-3, 2e-3, 1e-3], 10_000,
                                     RngStream(6), expect="coincide", points=np.arange(192, 321, 4))
    assert rep.verdict
    d = rep.records[0].params["differences"]
    # O(h): the difference roughly halves with h
    assert d[1] < 0.7 * d[0] and d[2] < 0.7 * d[1]


def test_split_example3(example3):
    f = wave_grid()
    pts = np.arange(192, 321, 4)
    rep = generator_coincidence_test(example3, 0.5, f, [4e-3, 2e-3, 1e-3], 10_000, RngStream(7),
                                     expect="split", points=pts)
    assert rep.verdict
    rec = rep.records[0]
    fprime = (np.cos(f.x) - f.x / 4 * np.sin(f.x)) * np.exp(-f.x**2 / 8)
    assert abs(rec.params["fitted_limit"] - np.max(np.abs(fprime[pts]))) <= 0.1
    wrong = generator_coincidence_test(example3, 0.5, f, [4e-3, 1e-3], 10_000, RngStream(7),
                                       expect="coincide", points=pts)
    assert not wrong.verdict


def test_coincidence_guards(example3):
    with pytest.raises(ValueError):
        generator_coincidence_test(example3, 0.5, wave_grid(), [1e-3, 2e-3], 10_000, RngStream(0))
    with pytest.raises(ValueError):
        generator_coincidence_test(example3, 0.5, wave_grid(), [2e-3, 1e-3], 100, RngStream(0))


@pytest.mark.parametrize(
    "t0,t,expected", [(0.0, 1.0, 1.5), (0.0, 0.3, 0.3), (0.2, 0.2, 0.0), (0.7, 1.0, 0.6)]
)
def test_piecewise_oracle(t0, t, expected):
    assert piecewise_drift_oracle(1, 2, 0.5, t0, 0.0, t) == pytest.approx(expected, abs=1e-15)


def test_piecewise_oracle_guard():
    with pytest.raises(ValueError):
        piecewise_drift_oracle(1, 2, 0.5, 1.0, 0.0, 0.5)


def test_random_bumps_shape():
    bumps = random_bumps(-16, 16, 512, 12, np.random.default_rng(0))
    for f in bumps:
        k = int(np.argmax(f.values))
        assert 0.3 * 512 <= k < 0.7 * 512
        # symmetric about the maximising node
        m = min(k, 511 - k)
        assert np.max(np.abs(f.values[k - m : k] - f.values[k + m : k : -1])) <= 1e-12
        assert max(abs(f.values[0]), abs(f.values[-1])) <= 1e-8 * f.values.max()


def test_pmp_suite_passes(example3):
    for sym in (example3, make_symbol(diffusion="1 + 0.5*cos(x1)", drift="sin(x1)")):
        rep = positive_maximum_suite(sym, -16, 16, 512, 9, seed=1)
        assert rep.verdict
        assert rep.records[0].error == 0
        assert rep.records[0].params["bumps"] == 9
