"""Smoke test for the pywfres extension.

Build first:
    cargo build --release -p wfres-py --features extension-module
then run:
    python3 python/smoke_test.py
"""

import cmath
import importlib.util
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load():
    lib = os.environ.get("PYWFRES_LIB", os.path.join(ROOT, "target", "release", "libpywfres.so"))
    if not os.path.exists(lib):
        sys.exit(f"extension not found at {lib}; build it with cargo first")
    tmp = tempfile.mkdtemp()
    dst = os.path.join(tmp, "pywfres.so")
    shutil.copy(lib, dst)
    spec = importlib.util.spec_from_file_location("pywfres", dst)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    w = load()

    free = w.Model.free_1d()
    assert free.dim == 1
    assert abs(free.p0([math.pi]) - 2.0) < 1e-14
    assert abs(free.velocity([math.pi / 2])[0] - 1.0) < 1e-14

    # i e^{iθ|n|}/sin θ with cos θ = 1 − λ
    theta = math.acos(0.0)
    re, im = w.free_kernel(1.0, 3)
    expect = 1j * cmath.exp(1j * theta * 3) / math.sin(theta)
    assert abs(complex(re, im) - expect) < 1e-12

    col, eps = w.lap_column(free, 256, 1.0)
    mid = len(col) // 2
    got = complex(*col[mid + 5])
    want = complex(*w.free_kernel(1.0, 5))
    assert abs(got - want) < 1e-3, (got, want, eps)

    m = w.classify_point(free, [-4.0], [math.pi / 2], [-3.0], [-math.pi / 2])
    assert not m["in_sigma_plus"]

    p = w.wf(w.Model.reference_1d(), [-4.0], [math.pi / 2], [-3.0], [-math.pi / 2],
             [0.125, 0.0625, 0.03125, 0.015625], 0.2, 1.0)
    assert p["fit"]["slope"] >= 3.0, p["fit"]

    s = w.t_splitting(6.0, 3.8, 3.0, 1.0)
    assert s["exponent_opt"] > 1.0

    t = w.transport(3.0, math.pi / 2, 0.2, 0.2, 0.125, 1)
    assert t["pass"]

    inv = w.invariant_suite()
    assert all(c["pass"] for c in inv["checks"])

    names = [r[0] for r in w.list_recipes()]
    assert "free-wf-offset" in names and len(names) >= 8

    out = tempfile.mkdtemp()
    assert w.run("t-splitting", out) == 0
    assert os.path.exists(os.path.join(out, "manifest.json"))
    assert w.run(os.path.join(out, "missing.toml")) == 2

    try:
        w.Model(potential="nonsense")
    except ValueError:
        pass
    else:
        raise AssertionError("bad potential accepted")

    print("pywfres smoke test ok")


if __name__ == "__main__":
    main()
