from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopsched.errors import RuntimeFault
from loopsched.interp import Instance, check_equiv, interpret, random_instance
from loopsched.parser import parse_proc

from conftest import fixture_procs

GEMV = parse_proc(
    """
proc gemv(M: size, N: size, A: f32[M, N], x: f32[N], y: f32[M]):
  for i in seq(0, M):
    for j in seq(0, N):
      y[i] += A[i, j] * x[j]
"""
)


def gemv_oracle(M, N, A, x, y):
    y = list(y)
    for i in range(M):
        y[i] += sum(A[i * N + j] * x[j] for j in range(N))
    return y


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 5), st.integers(0, 5), st.randoms(use_true_random=False))
def test_gemv_matches_oracle(M, N, rnd):
    def vals(n):
        return [Fraction(rnd.randint(-9, 9), rnd.randint(1, 4)) for _ in range(n)]

    A, x, y = vals(M * N), vals(N), vals(M)
    out = interpret(GEMV, Instance({"M": M, "N": N}, {"A": A, "x": x, "y": y}))
    assert list(out["y"][1]) == gemv_oracle(M, N, A, x, y)
    assert out["A"][1] == tuple(A)


def test_arithmetic_is_exact():
    p = parse_proc("proc f(x: f32[2]):\n  x[0] = x[1] / 3.0\n  x[1] = x[0] * 3.0\n")
    out = interpret(p, Instance({}, {"x": [0, 1]}))
    assert out["x"][1] == (Fraction(1, 3), Fraction(1))


def test_index_division_floors():
    p = parse_proc(
        """
proc f(N: size, x: f32[N]):
  for i in seq(0, N):
    x[i] = x[i / 2 + i % 2]
"""
    )
    out = interpret(p, Instance({"N": 5}, {"x": [10, 11, 12, 13, 14]}))
    # x[0]=x[0], x[1]=x[1], x[2]=x[1], x[3]=x[2] (already rewritten), x[4]=x[2]
    assert out["x"][1] == (10, 11, 11, 11, 11)


def test_windows_and_calls():
    procs = fixture_procs("misc.exo2ir")
    p = procs["misc"]
    inst = random_instance(p, seed=3)
    n = inst.sizes["N"]
    out = interpret(p, inst)
    x = inst.buffers["x"]
    assert out["y"][1] == tuple(x)  # copy4 per row
    d = list(inst.buffers["d"])
    if n > 4 and n % 2 == 0:
        d[0] = -d[1] / 3
    d = [v * 2 + Fraction(1, 2) for v in d]
    assert list(out["d"][1]) == d


def test_out_of_bounds_faults():
    p = parse_proc("proc f(N: size, x: f32[N]):\n  for i in seq(0, N + 1):\n    x[i] = 0.0\n")
    with pytest.raises(RuntimeFault):
        interpret(p, Instance({"N": 2}, {"x": [1, 2]}))


def test_uninitialized_read_faults():
    p = parse_proc("proc f(x: f32[2]):\n  t: f32\n  x[0] = t\n")
    with pytest.raises(RuntimeFault):
        interpret(p, Instance({}, {"x": [1, 2]}))


def test_random_instance_respects_asserts():
    p = parse_proc(
        """
proc f(N: size, M: size, x: f32[N, M]):
  assert N % 4 == 0
  assert M >= 3
  x[0, 0] = 1.0
"""
    )
    for seed in range(30):
        inst = random_instance(p, seed=seed, size_range=(1, 12))
        assert inst.sizes["N"] % 4 == 0 and 1 <= inst.sizes["N"] <= 12
        assert 3 <= inst.sizes["M"] <= 12
        assert len(inst.buffers["x"]) == inst.sizes["N"] * inst.sizes["M"]


def test_random_instance_is_deterministic():
    a = random_instance(GEMV, seed=11)
    b = random_instance(GEMV, seed=11)
    assert a.to_json() == b.to_json()
    assert Instance.from_json(a.to_json()).buffers == a.buffers


def test_check_equiv_detects_difference():
    q = parse_proc(
        """
proc gemv(M: size, N: size, A: f32[M, N], x: f32[N], y: f32[M]):
  for i in seq(0, M):
    for j in seq(1, N):
      y[i] += A[i, j] * x[j]
"""
    )
    rep = check_equiv(GEMV, q)
    assert not rep and rep.counterexamples
    assert "y" in rep.summary()
    assert check_equiv(GEMV, GEMV)
