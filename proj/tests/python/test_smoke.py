"""Smoke tests for the Python bindings."""

import json
import math
import os

import pytest

import ramangeo

FIXTURES = os.environ.get("RAMANGEO_FIXTURES", "data/fixtures")


def test_clean_locality():
    assert ramangeo.clean_locality("Tsumeb Mine (Ongopolo) , Namibia") == "Tsumeb Mine, Namibia"
    assert ramangeo.clean_locality("A,,B ,  C") == "A, B, C"


def test_detect_synthetic():
    assert ramangeo.detect_synthetic("Ruby (synthetic)", "")
    assert not ramangeo.detect_synthetic("Cerussite", "Tsumeb, Namibia")
    assert not ramangeo.detect_synthetic("Quartz", "photosynthetic mat deposit")


def test_parse_spectrum():
    text = "##NAMES=Diopside\n##LOCALITY=X\n100.0, 5.0\n101.0, 6.0\n##END="
    raw = ramangeo.parse_spectrum(text)
    assert raw["wavenumbers"] == [100.0, 101.0]
    assert raw["intensities"] == [5.0, 6.0]
    assert raw["metadata"]["NAMES"] == "Diopside"

    with pytest.raises(ramangeo.RamangeoError):
        ramangeo.parse_spectrum("##NAMES=Empty\n##END=")


def test_resample_bounds_and_padding():
    wavenumbers = [200.0 + 10.0 * i for i in range(40)]
    intensities = [math.sin(0.2 * i) + 2.0 for i in range(40)]
    values = ramangeo.resample(wavenumbers, intensities, 100.0, 800.0, 64)
    assert len(values) == 64
    assert all(0.0 <= v <= 1.0 for v in values)
    assert values[0] == 0.0  # grid point left of the support


def test_minmax_normalize():
    assert ramangeo.minmax_normalize([2.0, 4.0, 6.0]) == [0.0, 0.5, 1.0]


def test_count_params_default_config():
    config = json.dumps({"num_classes": 101})
    assert ramangeo.count_params(config) == 1654725


def test_iso3166():
    assert ramangeo.iso3166_alpha3("United States of America") == "USA"
    assert ramangeo.iso3166_alpha3("Atlantis") is None


def test_spatial_join():
    polygons = ramangeo.CountryPolygonSet.load(os.path.join(FIXTURES, "polygons.geojson"))
    assert len(polygons) == 3
    assert polygons.assign(-19.58, 17.72) == "Namibia"
    assert polygons.assign(31.44, -109.91) == "United States of America"
    assert polygons.assign(-50.0, 0.0) is None


def _gaussian_rows(samples, grid, classes, seed=7):
    import random

    rng = random.Random(seed)
    rows, labels = [], []
    for s in range(samples):
        c = s % classes
        center = grid * (c + 1) / (classes + 1) + rng.uniform(-1, 1)
        width = grid * 0.03
        row = [math.exp(-0.5 * ((i - center) / width) ** 2) + 0.02 * rng.random()
               for i in range(grid)]
        lo, hi = min(row), max(row)
        rows.append([(v - lo) / (hi - lo) for v in row])
        labels.append(c)
    return rows, labels


def test_train_and_predict_roundtrip(tmp_path):
    rows, labels = _gaussian_rows(24, 64, 2)
    model_cfg = json.dumps({"depths": [1, 1, 1, 1], "dims": [4, 8, 16, 32],
                            "drop_path_max": 0.0})
    train_cfg = json.dumps({"epochs": 40, "batch_size": 8, "learning_rate": 0.002,
                            "weight_decay": 0.05, "holdout_fraction": 0.25, "seed": 3})
    classifier, history_jsonl = ramangeo.train_holdout(
        rows, labels, ["Alphaland", "Betaland"], model_cfg, train_cfg, (100.0, 900.0))

    history = [json.loads(line) for line in history_jsonl.splitlines()]
    assert len(history) == 40
    assert history[-1]["val_accuracy"] >= 0.9

    ranked = classifier.predict_processed(rows[0], top_k=2)
    assert ranked[0][0] == "Alphaland"
    assert abs(sum(p for _, p in ranked) - 1.0) < 1e-6

    path = str(tmp_path / "smoke.cnx1")
    classifier.save(path)
    reloaded = ramangeo.Classifier(path)
    assert reloaded.class_labels == ["Alphaland", "Betaland"]
    assert reloaded.window == (100.0, 900.0)
    again = reloaded.predict_processed(rows[0], top_k=2)
    assert again[0][0] == ranked[0][0]
    assert again[0][1] == pytest.approx(ranked[0][1], abs=1e-12)


def test_evaluate():
    report = json.loads(ramangeo.evaluate([0, 1, 1], [0, 1, 0], ["a", "b"]))
    assert report["accuracy"] == pytest.approx(2.0 / 3.0)
    assert report["per_class"][0]["class"] == "a"
