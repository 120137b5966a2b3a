import csv
import math

import numpy as np
import pytest

from acoustics import PropagationField, loss_at, loss_between, render_diagram
from utils.errors import ConfigurationError, DomainError


def test_loss_examples_default_field():
    field = PropagationField()
    # 40 + 0 + 25 = 65, clamped to the floor
    assert loss_at(field, 0.5, 500.0) == 80.0
    # sin(0) removes the modulation: 40 + 100 + 30
    assert loss_at(field, 100000.0, 0.0) == pytest.approx(170.0, abs=1e-9)


def test_loss_monotone_without_modulation():
    field = PropagationField(modulation_amp=0.0)
    ranges = np.linspace(0.0, 200000.0, 2001)
    values = loss_at(field, ranges, 250.0)
    assert np.all(np.diff(values) >= 0)


def test_loss_stays_in_bounds_and_is_pure():
    field = PropagationField(base_offset=10.0, modulation_amp=60.0, absorption=2.0)
    rng = np.random.default_rng(7)
    r = rng.uniform(0, 300000, 5000)
    z_r = rng.uniform(0, 1000, 5000)
    z_s = rng.uniform(0, 1000, 5000)
    first = loss_between(field, r, z_r, z_s)
    second = loss_between(field, r, z_r, z_s)
    assert np.array_equal(first, second)
    assert first.min() >= field.loss_floor
    assert first.max() <= field.loss_ceiling


def test_loss_rejects_out_of_domain():
    field = PropagationField()
    with pytest.raises(DomainError):
        loss_at(field, 1000.0, 1200.0)
    with pytest.raises(DomainError):
        loss_at(field, -1.0, 100.0)
    with pytest.raises(DomainError):
        loss_between(field, 1000.0, 100.0, -5.0)


def test_field_invariants():
    with pytest.raises(ConfigurationError):
        PropagationField(loss_floor=200.0, loss_ceiling=80.0)
    with pytest.raises(ConfigurationError):
        PropagationField(source_depth=1500.0)
    with pytest.raises(ConfigurationError):
        PropagationField(water_depth=0.0)


def test_diagram_saturation():
    diagram = render_diagram(PropagationField(), 100000.0, 101, 21, saturation=120.0)
    assert diagram.values.shape == (21, 101)
    assert diagram.values.max() <= 120.0


def test_diagram_corners_and_unsaturated():
    field = PropagationField()
    diagram = render_diagram(field, 50000.0, 2, 2)
    for i, depth in enumerate([0.0, 1000.0]):
        for j, r in enumerate([0.0, 50000.0]):
            assert diagram.values[i, j] == pytest.approx(loss_at(field, r, depth), rel=1e-12)

    full = render_diagram(field, 80000.0, 17, 9, saturation=math.inf)
    ranges, depths = np.meshgrid(full.range_axis, full.depth_axis)
    assert np.array_equal(full.values, loss_at(field, ranges, depths))


def test_diagram_rejects_small_grid():
    with pytest.raises(DomainError):
        render_diagram(PropagationField(), 1000.0, 1, 5)
    with pytest.raises(DomainError):
        render_diagram(PropagationField(), 0.0, 5, 5)


def test_diagram_csv_layout(tmp_path):
    diagram = render_diagram(PropagationField(), 1000.0, 3, 2, saturation=120.0)
    path = tmp_path / "diagram.csv"
    diagram.to_csv(str(path))
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["depth_m\\range_m", "0.00", "500.00", "1000.00"]
    assert [row[0] for row in rows[1:]] == ["0.00", "1000.00"]
    assert all(len(row) == 4 for row in rows)
    assert float(rows[1][1]) == pytest.approx(diagram.values[0, 0], abs=0.005)
