"""Problem-file parsing and round-trip."""

import numpy as np
import pytest

from mpoc import load_problem, save_problem
from mpoc.probfile import dumps, loads


def test_roundtrip_preserves_every_double(ex2, tmp_path):
    path = tmp_path / "ex2.prob"
    save_problem(ex2, path)
    back = load_problem(path)
    for name in ("A", "B", "Q", "R", "P", "Gx", "Gu", "b", "theta_box"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ex2, name))
    assert back.T == ex2.T


def test_roundtrip_irrational_entries(ex1, tmp_path):
    from mpoc import LtiOcProblem
    p = LtiOcProblem(A=[[np.pi]], B=[[1.0 / 3.0]], Q=[[np.e]], R=[[1.0]],
                     P=[[np.sqrt(2.0)]], Gx=[[1.0]], Gu=[[1.0]], b=[1e-17],
                     T=0.1 + 0.2, theta_box=[[-1.0, 1.0]])
    back = loads(dumps(p))
    assert back.A[0, 0] == p.A[0, 0]
    assert back.T == p.T
    assert back.b[0] == p.b[0]


def test_comments_and_blank_lines_ignored(ex1):
    text = "# comment\n\n" + dumps(ex1)
    back = loads(text)
    np.testing.assert_array_equal(back.A, ex1.A)


def test_missing_key_rejected():
    with pytest.raises(ValueError, match="missing"):
        loads("A = [[0.0]]\n")


def test_bad_literal_rejected(ex1):
    text = dumps(ex1).replace("T = 2.0", "T = import_os")
    with pytest.raises(ValueError, match="bad literal"):
        loads(text)


def test_malformed_line_rejected():
    with pytest.raises(ValueError, match="key = value"):
        loads("this is not an assignment\n")


def test_atomic_write_leaves_no_temp_files(ex1, tmp_path):
    save_problem(ex1, tmp_path / "p.prob")
    leftovers = [f for f in tmp_path.iterdir() if f.name.startswith(".tmp-")]
    assert leftovers == []
