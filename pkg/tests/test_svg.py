import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from echotrain.svg import Figure, nice_ticks


@given(lo=st.floats(-1e6, 1e6), width=st.floats(1e-6, 1e6))
def test_nice_ticks_cover_range(lo, width):
    hi = lo + width
    ticks = nice_ticks(lo, hi)
    assert 2 <= len(ticks) <= 12
    assert all(lo - 1e-9 * width <= t <= hi + 1e-9 * width for t in ticks)
    steps = np.diff(ticks)
    assert np.allclose(steps, steps[0], rtol=1e-6)


def test_render_is_valid_xml_with_log_axes():
    fig = Figure(xlabel="x <a>", ylabel="y & z", title="t", logx=True, logy=True)
    fig.add([1, 10, 100], [1e-3, 1.0, 1e3], "data", markers=True)
    fig.add([1, 100], [0.0, np.nan], "dropped")
    fig.notes.append("b = 2")
    root = ET.fromstring(fig.render())
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f"{ns}polyline")) == 1
    assert len(root.findall(f"{ns}circle")) == 3
    labels = [t.text for t in root.findall(f"{ns}text")]
    assert "x <a>" in labels and "1e-3" in labels and "b = 2" in labels


@pytest.mark.parametrize("xs, ys", [([], []), ([1.0], [2.0]), ([0.0, 0.0], [5.0, 5.0])])
def test_degenerate_data_renders(xs, ys):
    ET.fromstring(Figure().add(xs, ys).render())
