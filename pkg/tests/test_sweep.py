"""Tests for sweep module."""

import math
import tomllib

import pytest


def _spec(**values):
    from mode_invisibility.sweep import SweepSpec, merge_config, parse_layer

    base = {
        "observable": "probability",
        "parameter": "magnitude",
        "grid_min": 0.0,
        "grid_max": 2.0,
        "points": 3,
        "output": "",
        "svg": False,
    }
    base.update(values)
    return SweepSpec.from_config(merge_config(parse_layer(base)))


class TestOverrides:
    """Test command-line key=value overrides."""

    def test_typed_values(self):
        from mode_invisibility.sweep import parse_override

        assert parse_override("points=5") == {"points": 5}
        assert parse_override("coupling=1e-6") == {"coupling": 1e-6}
        assert parse_override("state=fock") == {"state": "fock"}
        assert parse_override('state="fock"') == {"state": "fock"}
        assert parse_override("svg=false") == {"svg": False}
        assert parse_override("family_values=[1, 2.5]") == {"family_values": [1.0, 2.5]}
        assert parse_override(" magnitude = 3 ") == {"magnitude": 3.0}

    def test_integer_keys_accept_integral_floats(self):
        from mode_invisibility.sweep import parse_override

        assert parse_override("points=5.0") == {"points": 5}

    def test_invalid_overrides(self):
        from mode_invisibility.common import ConfigError
        from mode_invisibility.sweep import parse_override

        for text in ("points", "=3", "bogus=1", "points=2.5", "svg=1", "state=3"):
            with pytest.raises(ConfigError):
                parse_override(text)


class TestSpecFile:
    """Test flat TOML spec files and layer merging."""

    def test_load(self, tmp_path):
        from mode_invisibility.sweep import load_spec_file

        path = tmp_path / "spec.toml"
        path.write_text('observable = "phase"\npoints = 4\ncoupling = 2e-4\n')
        assert load_spec_file(path) == {
            "observable": "phase",
            "points": 4,
            "coupling": 2e-4,
        }

    def test_missing_file(self, tmp_path):
        from mode_invisibility.common import ConfigError
        from mode_invisibility.sweep import load_spec_file

        with pytest.raises(ConfigError, match="not found"):
            load_spec_file(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        from mode_invisibility.common import ConfigError
        from mode_invisibility.sweep import load_spec_file

        path = tmp_path / "spec.toml"
        path.write_text("points = = 4\n")
        with pytest.raises(ConfigError):
            load_spec_file(path)

    def test_nested_tables_rejected(self, tmp_path):
        from mode_invisibility.common import ConfigError
        from mode_invisibility.sweep import load_spec_file

        path = tmp_path / "spec.toml"
        path.write_text("[cavity]\nlength = 2.0\n")
        with pytest.raises(ConfigError, match="flat"):
            load_spec_file(path)

    def test_merge_order(self):
        """Test defaults < earlier layers < later layers."""
        from mode_invisibility.sweep import SPEC_KEYS, merge_config

        merged = merge_config({"points": 5, "state": "fock"}, {"points": 7})
        assert merged["points"] == 7
        assert merged["state"] == "fock"
        assert merged["beta"] == SPEC_KEYS["beta"]
        assert set(merged) == set(SPEC_KEYS)


class TestTomlValue:
    """Test TOML literal rendering."""

    def test_literals(self):
        from mode_invisibility.sweep import toml_value

        assert toml_value(True) == "true"
        assert toml_value(3) == "3"
        assert toml_value(1.0) == "1.0"
        assert toml_value(0.1) == "0.10000000000000001"
        assert toml_value(math.nan) == "nan"
        assert toml_value(-math.inf) == "-inf"
        assert toml_value([1.0, 2.5]) == "[1.0, 2.5]"
        assert toml_value('say "hi"') == '"say \\"hi\\""'

    def test_parses_back(self):
        """Test rendered floats are read back exactly by a TOML parser."""
        from mode_invisibility.sweep import toml_value

        for value in (1e-22, 2.0, 1 / 3, 123456789.0, -7.5e15):
            assert tomllib.loads(f"x = {toml_value(value)}")["x"] == value


class TestGridSpec:
    """Test grid construction."""

    def test_linear(self):
        from mode_invisibility.sweep import GridSpec

        values = GridSpec("magnitude", 0.0, 1.0, 5).values()
        assert values == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_without_endpoint(self):
        from mode_invisibility.sweep import GridSpec

        values = GridSpec("psi", 0.0, 2 * math.pi, 4, endpoint=False).values()
        assert values == pytest.approx([0.0, math.pi / 2, math.pi, 3 * math.pi / 2])

    def test_log(self):
        from mode_invisibility.sweep import GridSpec

        values = GridSpec("epsilon", 1e-5, 1e-2, 4, scale="log").values()
        assert values == pytest.approx([1e-5, 1e-4, 1e-3, 1e-2])

    def test_integer_parameter(self):
        from mode_invisibility.common import ConfigError
        from mode_invisibility.sweep import GridSpec

        assert GridSpec("n", 0.0, 20.0, 21).values()[-1] == 20.0
        with pytest.raises(ConfigError):
            GridSpec("n", 0.0, 1.0, 3).values()

    def test_invalid_grids(self):
        from mode_invisibility.common import ConfigError
        from mode_invisibility.sweep import GridSpec

        with pytest.raises(ConfigError):
            GridSpec("beta", 1.0, 3.0, 3)
        with pytest.raises(ConfigError):
            GridSpec("magnitude", 0.0, 1.0, 1)
        with pytest.raises(ConfigError):
            GridSpec("magnitude", 0.0, 1.0, 3, scale="cubic")
        with pytest.raises(ConfigError):
            GridSpec("epsilon", 0.0, 1.0, 3, scale="log")


class TestSweepSpec:
    """Test spec validation."""

    def test_from_config(self):
        from mode_invisibility.sweep import Observable

        spec = _spec()
        assert spec.observable is Observable.PROBABILITY
        assert spec.grid.values() == [0.0, 1.0, 2.0]
        assert spec.output is None
        assert spec.family_parameter is None

    def test_point_values(self):
        """Test the grid value and family value land on their keys."""
        spec = _spec(family_parameter="coupling", family_values=[1e-4, 2e-4])
        values = spec.point_values(1.0, 2e-4)
        assert values["magnitude"] == 1.0
        assert values["coupling"] == 2e-4

    def test_integer_points_stay_integers(self):
        spec = _spec(parameter="n", grid_min=0.0, grid_max=4.0, points=5, state="fock")
        assert spec.point_values(3.0)["n"] == 3
        assert isinstance(spec.point_values(3.0)["n"], int)

    def test_config_echo(self):
        from mode_invisibility.sweep import SPEC_KEYS

        config = _spec(coupling=2e-4).to_config()
        assert set(config) == set(SPEC_KEYS)
        assert config["coupling"] == 2e-4

    def test_invalid_specs(self):
        from mode_invisibility.common import ConfigError

        for values in (
            {"observable": "entropy"},
            {"observable": "stability"},
            {"family_parameter": "coupling"},
            {"family_parameter": "magnitude", "family_values": [1.0]},
            {"state": "thermal"},
            {"gap": "colour"},
            {"speed_m_per_s": 4e8},
            {"beta": 0},
        ):
            with pytest.raises(ConfigError):
                _spec(**values)


class TestEvaluatePoint:
    """Test single-point evaluation."""

    def test_probability_row(self):
        from mode_invisibility.fockspace import Coherent
        from mode_invisibility.integrals import CavitySetup
        from mode_invisibility.perturbation import transition_probability
        from mode_invisibility.sweep import Observable, evaluate_point, merge_config

        row = evaluate_point(Observable.PROBABILITY, merge_config({"magnitude": 2.0}))
        expected = transition_probability(Coherent(2.0), CavitySetup()).p_excite
        assert row.value == pytest.approx(expected, rel=1e-15)
        assert row.p_target == row.value
        assert row.method == "closed_form"

    def test_visibility_row(self):
        """Test arm probabilities and visibility are all reported."""
        from mode_invisibility.sweep import Observable, evaluate_point, merge_config

        row = evaluate_point(Observable.VISIBILITY, merge_config({"magnitude": 3.0}))
        assert row.value == row.visibility
        assert row.p_target > row.p_reference > 0.0

    def test_stability_row(self):
        """Test switching raises P_e above the abrupt value."""
        from mode_invisibility.sweep import Observable, evaluate_point, merge_config

        abrupt = evaluate_point(
            Observable.STABILITY, merge_config({"length": 1.3e-5})
        )
        values = merge_config({"length": 1.3e-5, "epsilon": 1e-3})
        row = evaluate_point(Observable.STABILITY, values)
        assert row.method == "quadrature"
        assert abrupt.method == "closed_form"
        assert row.value > abrupt.value


class TestRunSweep:
    """Test grid sweeps and their outputs."""

    def test_rows_in_grid_order(self):
        from mode_invisibility.sweep import run_sweep

        result = run_sweep(_spec(), threads=2)
        assert [row.index for row in result.rows] == [0, 1, 2]
        assert result.parameters() == [0.0, 1.0, 2.0]
        values = result.values()
        assert values[0] < values[1] < values[2]
        assert result.metadata["weak_adiabatic"] is True
        assert result.metadata["rows"] == 3

    def test_thread_count_does_not_change_results(self):
        from mode_invisibility.sweep import run_sweep

        spec = _spec(points=6)
        single = run_sweep(spec, threads=1).values()
        assert run_sweep(spec, threads=4).values() == single

    def test_mode_sum_computed_once_per_setup(self):
        """Test concurrent points share one vacuum mode sum."""
        from mode_invisibility.integrals import _cached_mode_sum
        from mode_invisibility.sweep import run_sweep

        _cached_mode_sum.cache_clear()
        result = run_sweep(_spec(points=8), threads=4)
        assert [row.index for row in result.rows] == list(range(8))
        assert _cached_mode_sum.cache_info().misses == 1

    def test_families(self):
        """Test family curves come out family-major and scale as λ²."""
        from mode_invisibility.sweep import run_sweep

        spec = _spec(family_parameter="coupling", family_values=[1e-4, 2e-4])
        result = run_sweep(spec, threads=2)
        assert [row.family for row in result.rows] == [1e-4] * 3 + [2e-4] * 3
        for low, high in zip(result.values(1e-4), result.values(2e-4)):
            assert high == pytest.approx(4 * low, rel=1e-12)

    def test_phase_is_unwrapped(self):
        from mode_invisibility.sweep import run_sweep

        result = run_sweep(_spec(observable="phase", grid_max=10.0), threads=2)
        for row in result.rows:
            assert row.unwrapped == pytest.approx(row.value)
        assert result.values() == sorted(result.values())

    def test_failure_names_grid_point(self):
        """Test a failing point is reported with its index and value."""
        from mode_invisibility.common import GridPointError, WeakAdiabaticViolation
        from mode_invisibility.sweep import run_sweep

        spec = _spec(observable="interferometric_phase", beta=1)
        with pytest.raises(GridPointError) as excinfo:
            run_sweep(spec, threads=1)
        assert excinfo.value.index == 0
        assert excinfo.value.value == 0.0
        assert isinstance(excinfo.value.cause, WeakAdiabaticViolation)

    def test_stability_sweep(self):
        from mode_invisibility.sweep import run_sweep

        spec = _spec(
            observable="stability",
            parameter="epsilon",
            grid_min=1e-4,
            grid_max=1e-2,
            points=3,
            scale="log",
            length=1.3e-5,
        )
        result = run_sweep(spec, threads=1)
        assert result.metadata["slope"] == pytest.approx(2.0, abs=0.05)
        assert len(result.rows) == 3
        assert result.rows[0].value < result.rows[2].value


class TestOutput:
    """Test CSV and SVG output."""

    def test_csv_round_trip(self, tmp_path):
        """Test metadata echo and rows read back as written."""
        from mode_invisibility import __version__
        from mode_invisibility.sweep import read_csv, run_sweep

        output = tmp_path / "out" / "sweep.csv"
        result = run_sweep(_spec(output=str(output)), threads=2)
        metadata, rows = read_csv(output)

        assert metadata["tool"] == "mode-invisibility"
        assert metadata["version"] == __version__
        assert metadata["points"] == 3
        assert metadata["result.rows"] == 3
        assert metadata["result.weak_adiabatic"] is True
        assert list(rows[0]) == result.columns
        for row, cells in zip(result.rows, rows):
            assert float(cells["probability"]) == row.value
            assert cells["method"] == "closed_form"
            assert cells["p_reference"] == ""

    def test_rerun_from_metadata(self, tmp_path):
        """Test the config echo reproduces the same rows."""
        from mode_invisibility.sweep import (
            SweepSpec,
            merge_config,
            read_csv,
            run_sweep,
            spec_from_metadata,
        )

        first = tmp_path / "first.csv"
        second = tmp_path / "second.csv"
        run_sweep(_spec(output=str(first), coupling=3e-4), threads=1)
        metadata, rows = read_csv(first)
        layer = spec_from_metadata(metadata)
        layer["output"] = str(second)
        run_sweep(SweepSpec.from_config(merge_config(layer)), threads=3)
        assert read_csv(second)[1] == rows

    def test_svg_written(self, tmp_path):
        """Test the plot lands next to the CSV and is reproducible."""
        from mode_invisibility.sweep import run_sweep, write_svg

        output = tmp_path / "plot.csv"
        result = run_sweep(_spec(output=str(output), svg=True, title="demo"), threads=1)
        svg = output.with_suffix(".svg")
        text = svg.read_text(encoding="utf-8")
        assert "<svg" in text

        again = tmp_path / "again.svg"
        write_svg(result, again, "demo")
        assert again.read_bytes() == svg.read_bytes()


class TestWorkerCount:
    """Test the thread-count environment variable."""

    def test_from_environment(self, monkeypatch):
        from mode_invisibility.common import THREADS_ENV
        from mode_invisibility.sweep import worker_count

        monkeypatch.setenv(THREADS_ENV, "3")
        assert worker_count() == 3
        monkeypatch.setenv(THREADS_ENV, "0")
        assert worker_count() == 1

    def test_default(self, monkeypatch):
        from mode_invisibility.common import THREADS_ENV
        from mode_invisibility.sweep import worker_count

        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert worker_count() >= 1

    def test_invalid(self, monkeypatch):
        from mode_invisibility.common import THREADS_ENV, ConfigError
        from mode_invisibility.sweep import worker_count

        monkeypatch.setenv(THREADS_ENV, "many")
        with pytest.raises(ConfigError):
            worker_count()
