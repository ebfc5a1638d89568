import io
import math

import pytest

from casphere.materials import (
    EV_OVER_HBAR,
    Drude,
    MaterialError,
    PerfectReflector,
    Plasma,
    Tabulated,
    TabulatedRangeError,
    Vacuum,
    gold_drude,
    load_tabulated,
    save_tabulated,
)


class TestPlasma:
    def test_epsilon_at_plasma_frequency(self):
        wp = 9.0 * EV_OVER_HBAR
        assert Plasma(omega_p=wp).epsilon(wp) == pytest.approx(2.0, rel=1e-15)

    def test_monotone_nonincreasing(self):
        model = Plasma(omega_p=1e16)
        xis = [10 ** k for k in range(12, 19)]
        values = [model.epsilon(x) for x in xis]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_invalid_parameters(self):
        with pytest.raises(MaterialError):
            Plasma(omega_p=0.0)
        with pytest.raises(MaterialError):
            Plasma(omega_p=1e15).epsilon(0.0)


class TestDrude:
    def test_approaches_plasma_for_small_gamma(self):
        wp = 9.0 * EV_OVER_HBAR
        drude = Drude(omega_p=wp, gamma=1e-6 * wp)
        plasma = Plasma(omega_p=wp)
        # the two agree to first order in gamma/xi
        for xi in (0.1 * wp, wp, 10 * wp):
            assert drude.epsilon(xi) == pytest.approx(plasma.epsilon(xi), rel=1e-4)

    def test_monotone_nonincreasing(self):
        model = gold_drude()
        xis = [10 ** k for k in range(12, 19)]
        values = [model.epsilon(x) for x in xis]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_invalid_parameters(self):
        with pytest.raises(MaterialError):
            Drude(omega_p=1e16, gamma=0.0)


class TestPerfectAndVacuum:
    def test_perfect_is_infinite(self):
        assert PerfectReflector().epsilon(1e15) == math.inf

    def test_vacuum_is_one(self):
        assert Vacuum().epsilon(1e15) == 1.0


class TestZeroFrequencyClass:
    def test_classes(self):
        assert PerfectReflector().zero_frequency_class().kind == "perfect_conductor"
        assert Drude(1e16, 1e13).zero_frequency_class().kind == "drude"
        zfc = Plasma(1e16).zero_frequency_class()
        assert zfc.kind == "plasma"
        assert zfc.omega_p == 1e16
        assert Tabulated(xi=(1e14,), eps=(10.0,)).zero_frequency_class().kind == "drude"


class TestTabulated:
    def test_loglog_midpoint(self):
        model = Tabulated(xi=(1e14, 1e16), eps=(100.0, 1.5))
        expected = math.exp((math.log(100.0) + math.log(1.5)) / 2.0)
        assert model.epsilon(1e15) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(12.247, abs=5e-4)

    def test_out_of_range_is_error(self):
        model = Tabulated(xi=(1e14, 1e16), eps=(100.0, 1.5))
        with pytest.raises(TabulatedRangeError):
            model.epsilon(1e13)
        with pytest.raises(TabulatedRangeError):
            model.epsilon(1e17)

    def test_extrapolation_tails(self):
        model = Tabulated(xi=(1e14, 1e16), eps=(100.0, 1.5), extrapolate=True)
        # below the grid: (eps - 1) grows like 1/xi
        assert model.epsilon(1e13) == pytest.approx(1.0 + 99.0 * 10.0, rel=1e-12)
        # above the grid: (eps - 1) falls like 1/xi^2
        assert model.epsilon(1e17) == pytest.approx(1.0 + 0.5 / 100.0, rel=1e-12)

    def test_validation(self):
        with pytest.raises(MaterialError):
            Tabulated(xi=(), eps=())
        with pytest.raises(MaterialError):
            Tabulated(xi=(1e16, 1e14), eps=(1.5, 100.0))
        with pytest.raises(MaterialError):
            Tabulated(xi=(1e14, 1e16), eps=(0.5, 1.5))

    def test_nonmonotone_epsilon_warns(self):
        with pytest.warns(UserWarning):
            Tabulated(xi=(1e14, 1e15, 1e16), eps=(10.0, 20.0, 1.5))


class TestLoadTabulated:
    def test_basic_parse(self):
        model = load_tabulated("# header\n1e14 100\n1e16 1.5\n")
        assert len(model.xi) == 2
        assert model.eps == (100.0, 1.5)

    def test_nonmonotone_grid(self):
        with pytest.raises(MaterialError, match="increasing"):
            load_tabulated("1e16 1.5\n1e14 100\n")

    def test_empty(self):
        with pytest.raises(MaterialError, match="no data"):
            load_tabulated("# only comments\n")

    def test_bad_line_reports_number(self):
        with pytest.raises(MaterialError, match="line 2"):
            load_tabulated("1e14 100\n1e15 not_a_number\n")
        with pytest.raises(MaterialError, match="line 1"):
            load_tabulated("1e14 100 extra\n")

    def test_epsilon_below_one_rejected(self):
        with pytest.raises(MaterialError, match="line 1"):
            load_tabulated("1e14 0.5\n")

    def test_save_load_roundtrip(self):
        model = Tabulated(xi=(1.25e14, 3.5e15, 1e16), eps=(88.25, 7.5, 1.125))
        buffer = io.StringIO()
        save_tabulated(model, buffer)
        reloaded = load_tabulated(buffer.getvalue())
        assert reloaded.xi == model.xi
        assert reloaded.eps == model.eps


class TestGoldDefaults:
    def test_parameters(self):
        model = gold_drude()
        assert model.omega_p == pytest.approx(9.0 * EV_OVER_HBAR)
        assert model.gamma == pytest.approx(0.035 * EV_OVER_HBAR)
