import json

import pytest

from catsim.workload import (Group, WorkloadError, WorkloadSpec, default_webpage, load_workload,
                             make_payloads, stream_layout)


def test_default_page():
    spec = default_webpage()
    assert [g.size // 1024 for g in spec.groups] == [8, 25, 40, 60, 150]
    assert spec.total_bytes == 283 * 1024
    assert [g.priority for g in spec.ordered()] == [4, 3, 2, 1, 0]


def test_layout_is_submission_order():
    layout = stream_layout(default_webpage())
    assert layout[0] == (0, 150 * 1024, "P4 analytics/tracking")
    assert layout[-1][1] == 283 * 1024


def test_payloads_deterministic():
    spec = default_webpage()
    assert make_payloads(spec, 3) == make_payloads(spec, 3)
    assert make_payloads(spec, 3) != make_payloads(spec, 4)


def test_roundtrip(tmp_path):
    spec = default_webpage()
    path = tmp_path / "w.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert load_workload(path) == spec


@pytest.mark.parametrize("bad", [
    {"groups": [], "x": 1},
    {"groups": [{"priority": 0, "size": 1, "label": "a", "z": 0}]},
    {"groups": [{"priority": 0, "label": "a"}]},
    {"groups": [{"priority": 0, "size": 1, "label": "a"}], "submission_order": [1]},
    {"groups": [{"priority": 0, "size": 1, "label": "a"}, {"priority": 1, "size": 1, "label": "a"}]},
])
def test_rejects(bad):
    with pytest.raises(WorkloadError):
        WorkloadSpec.from_dict(bad)


def test_group_checks():
    with pytest.raises(WorkloadError):
        Group(0, 0, "empty")
    with pytest.raises(ValueError):
        Group(9, 10, "bad")
