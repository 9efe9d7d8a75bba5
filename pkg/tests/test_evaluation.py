import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vidsum.errors import FormatError, InputError
from vidsum.evaluation import (TimingRecord, UserAnnotations, fit_records,
                               intervals_to_frames, linear_fit, pairwise_f1, timing_run,
                               write_rows_csv)


def test_f1_examples():
    ann = UserAnnotations(100, [[(10, 30)]])
    assert pairwise_f1(np.arange(10, 30), ann).f1 == 1.0
    assert pairwise_f1(np.arange(50, 60), ann).f1 == 0.0
    rep = pairwise_f1(np.arange(0, 50), UserAnnotations(100, [[(25, 75)]]))
    assert (rep.precision[0], rep.recall[0], rep.f1) == (0.5, 0.5, 0.5)


def test_f1_printed_denominators():
    # p divides by the user's count, r by the machine summary's count
    rep = pairwise_f1(np.arange(0, 10), UserAnnotations(100, [[(0, 40)]]))
    assert rep.precision[0] == pytest.approx(10 / 40)
    assert rep.recall[0] == pytest.approx(10 / 10)


def test_empty_summary_flag():
    rep = pairwise_f1([], UserAnnotations(10, [[(0, 5)], [(5, 10)]]))
    assert rep.empty_summary and rep.f1 == 0.0
    with pytest.raises(InputError):
        pairwise_f1([1], UserAnnotations(10, []))


def test_annotations_validation(tmp_path):
    with pytest.raises(InputError):
        UserAnnotations(10, [[(0, 5), (4, 8)]])
    with pytest.raises(InputError):
        UserAnnotations(10, [[(5, 12)]])
    with pytest.raises(FormatError):
        UserAnnotations.from_dict({"users": []})
    (tmp_path / "a.json").write_text('{"n_frames": 5, "users": [[[0, 2]]]}')
    assert UserAnnotations.load(tmp_path / "a.json").frame_sets()[0].tolist() == [0, 1]
    assert intervals_to_frames([]).size == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_f1_bounds_and_identity(seed):
    rng = np.random.default_rng(seed)
    n = 200
    users = []
    for _ in range(rng.integers(1, 4)):
        cuts = np.sort(rng.choice(np.arange(1, n), size=4, replace=False))
        users.append([(int(cuts[0]), int(cuts[1])), (int(cuts[2]), int(cuts[3]))])
    ann = UserAnnotations(n, users)
    S = rng.choice(n, size=rng.integers(0, n), replace=False)
    f1 = pairwise_f1(S, ann).f1
    assert 0.0 <= f1 <= 1.0
    same = UserAnnotations(n, [users[0]] * 3)
    assert pairwise_f1(same.frame_sets()[0], same).f1 == 1.0


def test_timing_record():
    rec, out = timing_run(lambda: 42, video_seconds=10.0, label="x")
    assert out == 42 and rec.processing_seconds > 0
    assert TimingRecord(10.0, 5.0).speed_multiplier == 2.0


def test_linear_fit_examples():
    fit = linear_fit([1, 2], [3, 7])
    assert (fit.slope, fit.intercept, fit.r2) == (4.0, -1.0, 1.0)
    fit = fit_records([TimingRecord(d, 0.5 * d + 1) for d in (10, 20, 40)])
    assert fit.r2 == pytest.approx(1.0)
    with pytest.raises(InputError):
        linear_fit([1, 1], [2, 3])


@settings(max_examples=100, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.integers(0, 2**32 - 1))
def test_linear_fit_recovers_line(a, b, seed):
    x = np.sort(np.random.default_rng(seed).uniform(0, 200, 12))
    fit = linear_fit(x, a * x + b)
    assert fit.slope == pytest.approx(a, abs=1e-9)
    assert fit.intercept == pytest.approx(b, abs=1e-9)


def test_rows_csv(tmp_path):
    write_rows_csv(tmp_path / "r.csv", [{"video": "v", "duration": 10, "time": 5, "speed": 2,
                                        "f1": 0.5, "extra": 1}])
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert list(rows[0]) == ["video", "duration", "time", "speed", "f1"]
