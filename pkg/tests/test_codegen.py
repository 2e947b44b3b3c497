import subprocess
from pathlib import Path

import pytest

from loopsched.codegen import emit_c
from loopsched.errors import BackendError
from loopsched.interp import interpret, random_instance
from loopsched.parser import parse_proc, parse_procs
from loopsched.stdlib import load_machine, optimize_level_1, tile2D

from conftest import GOLDEN, fixture_procs


def tiled_gemv():
    g = fixture_procs("gemv.exo2ir")["gemv"]
    return tile2D(g, "i", "j", ["io", "ii"], ["jo", "ji"], 8, 8)


def test_gemv_golden():
    h, c = emit_c(tiled_gemv())
    assert h == (GOLDEN / "gemv_tiled.h").read_text()
    assert c == (GOLDEN / "gemv_tiled.c").read_text()


def test_emission_is_deterministic():
    assert emit_c(tiled_gemv()) == emit_c(tiled_gemv())


def test_pass_only_body():
    h, c = emit_c(parse_proc("proc nop(x: f32[4]):\n  pass\n"))
    assert "void nop(float *x) {\n}" in c


def test_precision_mismatch_in_call():
    procs = parse_procs(
        """
proc take(dst: i32[4]):
  for k in seq(0, 4):
    dst[k] = 0.0

proc give(x: f32[4]):
  take(x[0:4])
"""
    )
    with pytest.raises(BackendError, match="precision check") as ei:
        emit_c(procs[-1])
    assert "take" in str(ei.value)


def test_unknown_memory():
    p = parse_proc("proc f(x: f32[8] @DRAM):\n  x[0] = 1.0\n")
    from dataclasses import replace

    bad = replace(p, args=(replace(p.args[0], mem="SCRATCH"),))
    with pytest.raises(BackendError, match="unknown memory"):
        emit_c(bad)


def _c_array(vals):
    return "{" + ", ".join(f"{float(v)!r}f" for v in vals) + "}"


def _run_c(tmp_path, gcc, p, inst, flags=()):
    """Compile `p` with a driver that fills buffers from `inst` and prints
    every numeric argument."""
    h, c = emit_c(p)
    (tmp_path / f"{p.name}.h").write_text(h)
    (tmp_path / f"{p.name}.c").write_text(c)
    decl, call, dump = [], [], []
    for a in p.args:
        if a.is_size:
            call.append(str(inst.sizes[a.name]))
            continue
        vals = inst.buffers[a.name]
        vals = vals if isinstance(vals, (list, tuple)) else [vals]
        decl.append(f"static float {a.name}[{max(len(vals), 1)}] = {_c_array(vals)};")
        call.append(a.name)
        dump.append(f'for (int k = 0; k < {len(vals)}; k++) printf("%.9g\\n", {a.name}[k]);')
    main = "\n".join(
        ["#include <stdio.h>", f'#include "{p.name}.h"'] + decl
        + ["int main(void) {", f"  {p.name}({', '.join(call)});"] + dump + ["  return 0;", "}"]
    )
    (tmp_path / "main.c").write_text(main)
    exe = tmp_path / "prog"
    subprocess.run(
        [gcc, "-std=c99", "-O1", *flags, "-o", str(exe), str(tmp_path / "main.c"), str(tmp_path / f"{p.name}.c")],
        check=True,
        capture_output=True,
    )
    out = subprocess.run([str(exe)], check=True, capture_output=True, text=True).stdout
    return [float(v) for v in out.split()]


def _expected(p, inst):
    out = interpret(p, inst)
    vals = []
    for a in p.args:
        if not a.is_size:
            v = out[a.name][1]
            vals += [float(x) for x in (v if isinstance(v, (list, tuple)) else [v])]
    return vals


def test_compiled_gemv_matches_interpreter(tmp_path, gcc):
    p = tiled_gemv()
    inst = random_instance(p, seed=5, size_range=(8, 24))
    got = _run_c(tmp_path, gcc, p, inst)
    assert got == pytest.approx(_expected(p, inst), rel=1e-5, abs=1e-5)


def _has_avx2():
    try:
        flags = Path("/proc/cpuinfo").read_text()
    except OSError:
        return False
    return " avx2" in flags and " fma" in flags


@pytest.mark.skipif(not _has_avx2(), reason="needs an AVX2 and FMA host")
def test_compiled_vector_saxpy(tmp_path, gcc):
    s = fixture_procs("blas1.exo2ir")["saxpy"]
    p = optimize_level_1(s, "i", "f32", load_machine("v8f32"), 2)
    inst = random_instance(p, seed=2, size_range=(17, 40))
    got = _run_c(tmp_path, gcc, p, inst, flags=("-mavx2", "-mfma"))
    assert got == pytest.approx(_expected(s, inst), rel=1e-5, abs=1e-5)
