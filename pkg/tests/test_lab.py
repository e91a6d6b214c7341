"""Tests for floatlab.config and floatlab.lab."""

import math
import os

import numpy as np
import pytest

from floatlab.bodies import AffineImage, Ball, WeightFn, parse_body
from floatlab.config import ExperimentConfig, parse_weight
from floatlab.errors import BudgetTooSmall, ConfigError, ExperimentError
from floatlab.floating import floating_limit_prediction
from floatlab.lab import (
    approximation_functional,
    best_approximation_study,
    best_polygon_area,
    boundary_nodes,
    polygon_distance,
    run,
)
from floatlab.numerics import alpha_n
from floatlab.report import CSV_HEADER, load_report, read_csv
from floatlab.stochastic import rng_stream

ELLIPSE = AffineImage(Ball(2), np.diag([2.0, 1.0]))
CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")

RANDOM_DISK = """
[experiment]
kind = random
seed = 3
replicates = 20

[body]
body = disk

[grid]
values = 10, 20
"""


# --- config ---------------------------------------------------------------------------

def test_config_defaults():
    config = ExperimentConfig.from_text("[experiment]\nkind = floating\n")
    assert config.body == "disk"
    assert config.replicates == 100
    assert config.format == "csv"
    assert config.terms_or(1) == 1
    assert config.output_stem() == "floatlab-floating"


def test_config_sections_and_comments():
    config = ExperimentConfig.from_text("""
[experiment]
kind = Hilbert        # case-insensitive
quantity = random
[body]
body = ellipse a=0.5 b=0.3
ambient = square side=2
[weight]
flavor = holmes_thompson
[grid]
values = 8, 16, 32
""")
    assert config.kind == "hilbert"
    assert config.flavor == "holmes-thompson"
    assert config.grid == [8.0, 16.0, 32.0]
    assert config.sample_sizes == [8, 16, 32]
    assert config.uses_sample_sizes


@pytest.mark.parametrize("text, field", [
    ("[experiment]\nseed = 1\n", "experiment.kind"),
    ("[experiment]\nkind = teleport\n", "experiment.kind"),
    ("[experiment]\nkind = floating\ncolour = red\n", "experiment.colour"),
    ("[experiment]\nkind = floating\n[plots]\nx = 1\n", "plots"),
    ("[experiment]\nkind = floating\nreplicates = 0\n", "experiment.replicates"),
    ("[experiment]\nkind = floating\nseed = seven\n", "experiment.seed"),
    ("[experiment]\nkind = floating\n[output]\nformat = pdf\n", "output.format"),
    ("[experiment]\nkind = floating\n[weight]\nflavor = finsler\n", "weight.flavor"),
    ("[experiment]\nkind = floating\n[weight]\nphi = chart\n", "weight.phi"),
    ("[experiment]\nkind = floating\n[weight]\npsi = sigma\n", "weight.psi"),
    ("[experiment]\nkind = floating\n[body]\nbody = blob\n", "body.body"),
    ("[experiment]\nkind = floating\nquantity = duality\n", "experiment.quantity"),
    ("[experiment]\nkind = floating\n[grid]\nvalues = 1e-3, 1e-2, 1e-4\n", "grid.values"),
    ("[experiment]\nkind = floating\n[grid]\nvalues = 1e-3, -1e-4\n", "grid.values"),
    ("[experiment]\nkind = random\n[grid]\nvalues = 2.5, 10\n", "grid.values"),
    ("[experiment]\nkind = omegacp\n[grid]\nvalues = 0.5, 1.5\n", "grid.values"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_text(text)
    assert info.value.field == field


def test_config_overrides_skip_missing_values():
    config = ExperimentConfig.from_text(RANDOM_DISK).with_overrides(seed=None, replicates=5, flavor=None)
    assert config.seed == 3
    assert config.replicates == 5
    with pytest.raises(ConfigError):
        config.with_overrides(format="gif")


def test_config_file_must_exist(tmp_path):
    with pytest.raises(FileNotFoundError):
        ExperimentConfig.from_file(str(tmp_path / "missing.ini"))


def test_parse_weight():
    x = np.array([0.3, 0.4])
    assert float(parse_weight("const c=2")(x)) == 2.0
    assert float(parse_weight("bump")(x)) == pytest.approx(1.25 ** -1.5)
    chart = WeightFn.klein()
    assert parse_weight("chart", chart_density=chart) is chart
    for text in ("", "const", "const c=two", "gaussian", "chart"):
        with pytest.raises(ValueError):
            parse_weight(text)


# --- best approximation ---------------------------------------------------------------

def test_boundary_nodes_on_the_disk_are_equally_spaced():
    nodes = boundary_nodes(Ball(2), 64)
    gaps = np.diff(np.unwrap(nodes.theta))
    assert np.allclose(gaps, 2 * math.pi / 64, rtol=1e-5)
    assert np.allclose(np.linalg.norm(nodes.points, axis=1), 1.0)
    assert np.allclose(nodes.normals, nodes.points, atol=1e-6)


def test_best_inscribed_hexagon_of_the_disk():
    approx = best_polygon_area(Ball(2), 6)
    expected = math.pi - 3 * math.sin(math.pi / 3)
    assert approx.m == 6
    assert approx.dist == pytest.approx(expected, rel=5e-3)
    assert polygon_distance(Ball(2), approx.vertices) == pytest.approx(approx.dist, rel=1e-6)


def test_best_circumscribed_hexagon_of_the_disk():
    approx = best_polygon_area(Ball(2), 6, mode="circumscribed")
    expected = 6 * math.tan(math.pi / 6) - math.pi
    assert approx.dist == pytest.approx(expected, rel=5e-3)
    assert np.all(np.linalg.norm(approx.vertices, axis=1) >= 1.0)
    assert polygon_distance(Ball(2), approx.vertices, mode="circumscribed") == pytest.approx(approx.dist, rel=1e-6)


def test_best_polygon_beats_random_inscribed_polygons():
    m = 8
    best = best_polygon_area(ELLIPSE, m).dist
    rng = rng_stream(0, 0, "polygons")
    for _ in range(20):
        theta = np.sort(rng.uniform(0.0, 2 * math.pi, m))
        vertices = np.column_stack([2 * np.cos(theta), np.sin(theta)])
        assert polygon_distance(ELLIPSE, vertices) >= best * (1 - 1e-3)


def test_best_polygon_rejects_bad_requests():
    with pytest.raises(BudgetTooSmall):
        best_polygon_area(Ball(2), 2)
    with pytest.raises(ValueError):
        best_polygon_area(Ball(2), 6, mode="outer")
    with pytest.raises(ValueError):
        best_polygon_area(parse_body("square"), 6, mode="circumscribed")
    with pytest.raises(ValueError):
        best_polygon_area(Ball(3), 6)


def test_approximation_functional():
    assert approximation_functional(Ball(2)) == pytest.approx(2 * math.pi, rel=1e-8)
    assert approximation_functional(ELLIPSE) == pytest.approx(2 * math.pi * 2 ** (1 / 3), rel=1e-7)
    assert approximation_functional(Ball(2), WeightFn.const(8.0)) == pytest.approx(4 * math.pi, rel=1e-8)


def test_best_approximation_ratio_is_affine_invariant():
    report = best_approximation_study(ELLIPSE, [16, 8], compare=Ball(2))
    assert [row.param for row in report.rows] == [8.0, 16.0]
    assert report.experiment == "bestapprox-inscribed"
    assert report.metadata["functional_ratio"] == pytest.approx(2 ** (1 / 3), rel=1e-7)
    for row in report.rows:
        assert row.extra["ratio"] == pytest.approx(1.0, rel=0.05)
        assert row.normalized == pytest.approx(row.estimate * row.param ** 2)
        assert math.isnan(row.stderr)


@pytest.mark.slow
def test_best_approximation_rate():
    report = best_approximation_study(ELLIPSE, [32, 64, 128])
    assert -2.1 <= report.metadata["slope"] <= -1.9
    # dist * m^2 tends to F^3 / 12 for inscribed polygons
    assert report.rows[-1].normalized == pytest.approx(report.metadata["functional"] ** 3 / 12, rel=0.02)


# --- running experiments --------------------------------------------------------------

def test_run_is_deterministic(tmp_path):
    first = ExperimentConfig.from_text(RANDOM_DISK).with_overrides(out=str(tmp_path / "a"))
    second = first.with_overrides(out=str(tmp_path / "b"))
    report = run(first)
    run(second)
    with open(tmp_path / "a.csv", "rb") as a, open(tmp_path / "b.csv", "rb") as b:
        assert a.read() == b.read()
    assert report.metadata["kind"] == "random"
    assert report.metadata["seed"] == 3
    assert "numpy" in report.metadata["versions"]
    records = read_csv(str(tmp_path / "a.csv"))
    assert [r["param"] for r in records[:2]] == [10.0, 20.0]
    assert all(r["seed"] == 3.0 for r in records)


def test_run_writes_the_report_archive(tmp_path):
    config = ExperimentConfig.from_text(RANDOM_DISK).with_overrides(out=str(tmp_path / "disk"), format="both")
    report = run(config)
    assert os.path.exists(tmp_path / "disk.csv")
    with open(tmp_path / "disk.svg") as f:
        assert "<svg" in f.read()
    loaded = load_report(str(tmp_path / "disk.msgpack"))
    assert loaded.experiment == report.experiment
    assert [row.estimate for row in loaded.rows] == [row.estimate for row in report.rows]


def test_empty_grid_writes_only_the_header(tmp_path):
    config = ExperimentConfig(kind="bestapprox", grid=[], out=str(tmp_path / "empty"))
    report = run(config)
    assert report.rows == []
    with open(tmp_path / "empty.csv") as f:
        assert f.read() == ",".join(CSV_HEADER) + "\n"


def test_run_without_writing(tmp_path):
    config = ExperimentConfig(kind="efron", grid=[10], replicates=10, out=str(tmp_path / "none"))
    run(config, write=False)
    assert not os.listdir(tmp_path)


def test_experiment_errors_carry_the_failing_module():
    config = ExperimentConfig(kind="hyperbolic", body="disk r=0.995", grid=[1e-3])
    with pytest.raises(ExperimentError) as info:
        run(config, write=False)
    assert info.value.module == "spaces"
    assert type(info.value.cause).__name__ == "OutOfChart"


def test_circumscribed_run_on_a_polygon_fails_in_lab():
    config = ExperimentConfig(kind="bestapprox", body="square", mode="circumscribed", grid=[6])
    with pytest.raises(ExperimentError) as info:
        run(config, write=False)
    assert info.value.module == "lab"


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIG_DIR)))
def test_example_configs_parse(name):
    config = ExperimentConfig.from_file(os.path.join(CONFIG_DIR, name))
    assert config.output_stem().startswith("results/")


@pytest.mark.parametrize("kwargs, params, limit_param", [
    ({"kind": "floating", "grid": [1e-2, 1e-3]}, [1e-3, 1e-2], 0.0),
    ({"kind": "dual", "grid": [10, 20], "replicates": 5}, [10.0, 20.0], math.inf),
    ({"kind": "spherical", "body": "cap rho=0.8", "grid": [1e-2, 1e-3]}, [1e-3, 1e-2], 0.0),
    ({"kind": "spherical", "quantity": "duality", "body": "cap rho=0.8", "grid": [10, 20], "replicates": 5},
     [10.0, 20.0], math.inf),
    ({"kind": "hilbert", "body": "disk r=0.5", "grid": [1e-2, 1e-3]}, [1e-3, 1e-2], 0.0),
    ({"kind": "hilbert", "quantity": "random", "body": "disk r=0.5", "grid": [10, 20], "replicates": 5},
     [10.0, 20.0], math.inf),
    ({"kind": "omegacp", "ambient": "disk", "grid": [0.8, 0.9]}, [0.8, 0.9], 1.0),
], ids=["floating", "dual", "spherical", "spherical-duality", "hilbert", "hilbert-random", "omegacp"])
def test_every_kind_runs_on_a_small_grid(tmp_path, kwargs, params, limit_param):
    config = ExperimentConfig(out=str(tmp_path / kwargs["kind"]), seed=5, **kwargs)
    report = run(config)
    path = tmp_path / (kwargs["kind"] + ".csv")
    with open(path) as f:
        assert f.readline() == ",".join(CSV_HEADER) + "\n"
    records = read_csv(str(path))
    assert len(records) == len(params) + 1
    assert [r["param"] for r in records[:-1]] == pytest.approx(params)
    assert records[-1]["param"] == limit_param
    assert math.isfinite(report.predicted)
    assert all(math.isfinite(r["predicted"]) and math.isfinite(r["estimate"]) for r in records)


def test_hilbert_weights_default_to_the_volume_density():
    config = ExperimentConfig(kind="hilbert", body="disk r=0.5", grid=[1e-2, 1e-3])
    assert (config.phi, config.psi) == ("sigma", "sigma")
    assert ExperimentConfig(kind="floating").phi == "one"
    report = run(config, write=False)
    area = report.metadata["hilbert_floating_area"]
    assert report.predicted == pytest.approx(alpha_n(2) * area, rel=1e-12)


def test_hilbert_honours_configured_weights():
    config = ExperimentConfig(kind="hilbert", body="disk r=0.5", phi="one", psi="const c=2", grid=[1e-2, 1e-3])
    report = run(config, write=False)
    expected = floating_limit_prediction(Ball(2, 0.5), WeightFn.one(), WeightFn.const(2.0))
    assert report.predicted == pytest.approx(expected, rel=1e-10)
    assert report.metadata["phi"] == "one"
    assert report.metadata["psi"] == "const c=2"
    sigma_run = run(config.with_overrides(phi="sigma", psi="sigma"), write=False)
    assert sigma_run.predicted != pytest.approx(report.predicted, rel=1e-3)


def test_sample_size_minimum_depends_on_the_kind():
    assert ExperimentConfig(kind="dual", grid=[1, 2, 4]).sample_sizes == [1, 2, 4]
    with pytest.raises(ConfigError) as info:
        ExperimentConfig(kind="dual", grid=[0, 2])
    assert info.value.field == "grid.values"
    for kind in ("random", "efron", "bestapprox"):
        with pytest.raises(ConfigError):
            ExperimentConfig(kind=kind, grid=[2, 4])


def test_dual_run_with_single_halfspaces():
    report = run(ExperimentConfig(kind="dual", grid=[1, 2], replicates=4), write=False)
    assert [row.param for row in report.rows] == [1.0, 2.0]
    for row in report.rows:
        assert 0 <= row.estimate <= row.param
        assert math.isfinite(row.extra["width_excess"])
