import json

import numpy as np
import pytest
from scipy.special import expit, logit

from detcal import binned
from detcal.synth import (ConvergenceRow, SynthConfig, convergence_experiment,
                          generate, ground_truth_ce, la_ece_binary,
                          rows_to_csv, rows_to_json, temperature_scale,
                          true_conditional)


# --- temperature rescaling ---

def test_temperature_scale_hand_value():
    # logit(0.8) = ln 4; sharpening by t = 0.5 doubles it to ln 16
    assert temperature_scale(0.8, 0.5) == pytest.approx(16.0 / 17.0, abs=1e-14)


def test_temperature_scale_identity_and_types():
    assert temperature_scale(0.37, 1.0) == pytest.approx(0.37, abs=1e-14)
    assert isinstance(temperature_scale(0.5, 2.0), float)
    out = temperature_scale(np.array([0.2, 0.8]), 2.0)
    assert isinstance(out, np.ndarray)
    assert out[0] + out[1] == pytest.approx(1.0, abs=1e-14)  # symmetry about 0.5


def test_temperature_scale_validation():
    with pytest.raises(ValueError, match="positive"):
        temperature_scale(0.5, 0.0)
    with pytest.raises(ValueError, match="strictly inside"):
        temperature_scale(1.0, 0.5)
    with pytest.raises(ValueError, match="strictly inside"):
        temperature_scale(np.array([0.5, 0.0]), 0.5)


def test_true_conditional_inverts_second_stage():
    p = np.array([0.1, 0.4, 0.75, 0.93])
    s = temperature_scale(p, 0.6)
    back = true_conditional(s, 0.6)
    assert back == pytest.approx(p, abs=1e-12)


# --- dataset generation ---

def test_generate_is_deterministic_per_seed():
    a = generate(SynthConfig(n=200, seed=9))
    b = generate(SynthConfig(n=200, seed=9))
    c = generate(SynthConfig(n=200, seed=10))
    assert np.array_equal(a.scores, b.scores)
    assert np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.scores, c.scores)


def test_generate_matches_documented_construction():
    # rebuild the draw from the documented two-stream counter RNG split
    interior = (np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    config = SynthConfig(n=64, t1=0.7, t2=0.5, seed=21)
    u = np.random.Generator(np.random.Philox(key=np.array([21, 0], dtype=np.uint64))).random(64)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    p = np.clip(expit(logit(u) / 0.7), *interior)
    draws = np.random.Generator(np.random.Philox(key=np.array([21, 1], dtype=np.uint64))).random(64)
    data = generate(config)
    assert np.array_equal(data.scores, np.clip(expit(logit(p) / 0.5), *interior))
    assert np.array_equal(data.labels, (draws < p).astype(float))


def test_generate_outputs_valid_ranges():
    data = generate(SynthConfig(n=5000, seed=2))
    assert np.all((data.scores > 0.0) & (data.scores < 1.0))
    assert set(np.unique(data.labels)) <= {0.0, 1.0}


def test_labels_track_true_conditional():
    # E[Z | s] should match the invertible second stage on a large draw
    data = generate(SynthConfig(n=200_000, t1=0.6, t2=0.6, seed=4))
    gap = np.mean(data.labels - true_conditional(data.scores, 0.6))
    assert abs(gap) < 0.005


# --- exact miscalibration value ---

def test_ground_truth_ce_reference_value():
    assert ground_truth_ce(0.6, 0.6) == pytest.approx(0.06069110414622253, abs=1e-10)


def test_ground_truth_ce_matches_dense_grid():
    u = np.linspace(0.0, 1.0, 1_000_001)[1:-1]
    lo = logit(u)
    gap = np.abs(expit(lo / 0.6) - expit(lo / 0.36))
    grid_value = np.trapezoid(gap, u)
    assert ground_truth_ce(0.6, 0.6) == pytest.approx(float(grid_value), abs=1e-6)


def test_ground_truth_ce_zero_without_second_distortion():
    assert ground_truth_ce(0.6, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert ground_truth_ce(1.3, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_ground_truth_ce_validation():
    with pytest.raises(ValueError):
        ground_truth_ce(0.0, 0.6)
    with pytest.raises(ValueError):
        ground_truth_ce(0.6, float("nan"))


# --- convergence experiment ---

def test_convergence_rows_shape():
    rows = convergence_experiment(ns=(50, 100), seeds=(0, 1, 2),
                                  estimators=("kde_threshold", "dece", "laece"),
                                  mode="sequential")
    assert rows[0].estimator == "ground_truth"
    assert rows[0].n == 0 and rows[0].ci95 == 0.0
    assert rows[0].mean == pytest.approx(0.06069110414622253, abs=1e-10)
    assert len(rows) == 1 + 2 * 3
    for row in rows[1:]:
        assert row.n in (50, 100)
        assert 0.0 <= row.mean <= 1.0
        assert row.ci95 >= 0.0


def test_convergence_kde_names_coincide_on_binary_labels():
    rows = convergence_experiment(ns=(80,), seeds=(3,),
                                  estimators=("kde_threshold", "kde_identity"),
                                  mode="sequential")
    by_name = {row.estimator: row for row in rows[1:]}
    assert by_name["kde_threshold"].mean == by_name["kde_identity"].mean


def test_convergence_single_seed_has_zero_ci():
    rows = convergence_experiment(ns=(60,), seeds=(5,), estimators=("dece",),
                                  mode="sequential")
    assert rows[1].ci95 == 0.0


def test_convergence_validation():
    with pytest.raises(ValueError, match="unknown estimators"):
        convergence_experiment(ns=(50,), seeds=(0,), estimators=("magic",))
    with pytest.raises(ValueError, match="non-empty"):
        convergence_experiment(ns=(), seeds=(0,))
    with pytest.raises(ValueError, match="at least 2"):
        convergence_experiment(ns=(1,), seeds=(0,))


# --- binary reduction of the class-aware metric ---

def test_la_ece_binary_hand_values():
    assert la_ece_binary([0.2, 0.8], [0.0, 1.0], num_bins=1) == pytest.approx(0.0, abs=1e-15)
    assert la_ece_binary([0.2, 0.8], [0.0, 1.0], num_bins=25) == pytest.approx(0.2, abs=1e-15)


def test_la_ece_binary_equals_single_class_form():
    rng = np.random.Generator(np.random.Philox(key=np.array([11, 0], dtype=np.uint64)))
    scores = rng.uniform(size=40)
    labels = (rng.uniform(size=40) < 0.5).astype(float)
    direct = binned.la_ece(scores, labels, labels == 1.0,
                           np.zeros(40, dtype=np.int64), [0],
                           binned.BinningConfig(25))
    assert la_ece_binary(scores, labels) == direct


# --- serialization ---

def test_rows_serialize():
    rows = [ConvergenceRow(n=0, estimator="ground_truth", mean=0.5, ci95=0.0),
            ConvergenceRow(n=10, estimator="dece", mean=0.25, ci95=0.0125)]
    csv_text = rows_to_csv(rows)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "n,estimator,mean,ci95"
    assert lines[1].startswith("0,ground_truth,")
    parsed = json.loads(rows_to_json(rows))
    assert parsed[1]["mean"] == 0.25
    assert parsed[1]["estimator"] == "dece"


def test_synth_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n=0)
    with pytest.raises(ValueError):
        SynthConfig(n=10, t1=-1.0)
    with pytest.raises(ValueError):
        SynthConfig(n=10, seed=-3)
