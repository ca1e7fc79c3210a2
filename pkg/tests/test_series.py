import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lowcount.series import (
    AnomalySegment,
    CountSeries,
    ScoreSeries,
    SeriesFormatError,
    format_series_csv,
    mask_from_segments,
    read_series_csv,
    segments_from_mask,
    write_series_csv,
)

F, T = False, True


@pytest.mark.parametrize(
    "mask, expected",
    [
        ([F, T, T, F, T], [(1, 3), (4, 5)]),
        ([F, F, F], []),
        ([T] * 5, [(0, 5)]),
        ([], []),
    ],
)
def test_segments_from_mask(mask, expected):
    assert segments_from_mask(mask) == [AnomalySegment(s, e) for s, e in expected]


@pytest.mark.parametrize(
    "segments, length, expected",
    [
        ([(1, 3)], 4, [F, T, T, F]),
        ([], 2, [F, F]),
        ([(0, 5)], 5, [T] * 5),
    ],
)
def test_mask_from_segments(segments, length, expected):
    segs = [AnomalySegment(s, e) for s, e in segments]
    assert mask_from_segments(segs, length).tolist() == expected


def test_mask_from_segments_out_of_bounds():
    with pytest.raises(ValueError):
        mask_from_segments([AnomalySegment(2, 6)], 5)


def test_segment_validation():
    with pytest.raises(ValueError):
        AnomalySegment(3, 3)
    with pytest.raises(ValueError):
        AnomalySegment(-1, 2)


@given(st.lists(st.booleans(), max_size=200))
def test_mask_round_trip(mask):
    segs = segments_from_mask(mask)
    assert mask_from_segments(segs, len(mask)).tolist() == mask
    for a, b in zip(segs, segs[1:]):
        # disjoint, sorted and maximal (a gap separates neighbours)
        assert a.end < b.start


def test_count_series_invariants():
    with pytest.raises(ValueError):
        CountSeries([1, -1, 2])
    with pytest.raises(ValueError):
        CountSeries([1.5, 2])
    with pytest.raises(ValueError):
        CountSeries([1, 2], dt=0)
    with pytest.raises(ValueError):
        CountSeries([1, 2], labels=[True])
    s = CountSeries([1.0, 2.0], labels=[0, 1])
    assert s.values.dtype == np.int64
    assert s.labels.tolist() == [False, True]
    with pytest.raises(ValueError):
        s.values[0] = 5


def test_score_series_warmup_and_nan():
    s = ScoreSeries([9.0, 9.0, 1.0, 2.0], valid_from=2)
    assert s.scores.tolist() == [0.0, 0.0, 1.0, 2.0]
    assert s.evaluated.tolist() == [1.0, 2.0]
    with pytest.raises(ValueError):
        ScoreSeries([np.nan, 1.0])


def test_csv_format_is_exact(tmp_path):
    s = CountSeries([3, 0, 7], labels=[F, T, F])
    assert format_series_csv(s) == "t,value,label\n0,3,0\n1,0,1\n2,7,0\n"
    assert format_series_csv(CountSeries([3, 0])) == "t,value\n0,3\n1,0\n"
    path = tmp_path / "s.csv"
    write_series_csv(s, path)
    assert b"\r" not in path.read_bytes()
    back = read_series_csv(path, dt=0.1)
    assert back.values.tolist() == [3, 0, 7]
    assert back.labels.tolist() == [F, T, F]
    assert back.dt == 0.1


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("t,value\n0,1\n1,-1\n", "line 3"),
        ("t,value\n0,1.5\n", "line 2"),
        ("t,value,label\n0,1,2\n", "line 2"),
        ("time,value\n0,1\n", "line 1"),
        ("t,value\n0\n", "line 2"),
    ],
)
def test_csv_errors_name_the_line(tmp_path, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(SeriesFormatError, match=fragment):
        read_series_csv(path)
