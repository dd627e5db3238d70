"""Smoke test for the Python bindings.

Build first:
    cargo build --release -p hadamard-py --features extension-module
then run `python3 python/smoke_test.py` from the repository root. The script
loads target/{release,debug}/libhadamard_py.so unless `hadamard` is already
importable (e.g. after a maturin install).
"""

import importlib.machinery
import importlib.util
import math
import sys
from pathlib import Path


def load():
    try:
        import hadamard
        return hadamard
    except ImportError:
        pass
    root = Path(__file__).resolve().parent.parent
    for profile in ("release", "debug"):
        for suffix in ("so", "dylib"):
            lib = root / "target" / profile / f"libhadamard_py.{suffix}"
            if lib.exists():
                loader = importlib.machinery.ExtensionFileLoader("hadamard", str(lib))
                spec = importlib.util.spec_from_loader("hadamard", loader)
                mod = importlib.util.module_from_spec(spec)
                loader.exec_module(mod)
                sys.modules["hadamard"] = mod
                return mod
    sys.exit("libhadamard_py not found; build it with cargo first")


def close(x, y, tol):
    assert abs(x - y) <= tol * max(1.0, abs(y)), (x, y)


def main():
    h = load()
    print("hadamard", h.__version__)

    sol = h.JacobiSolution.constant(1.0, 20.0, 1e-10)
    for t in (0.5, 3.0, 15.0):
        close(sol.log_f(t), math.log(math.sinh(t)), 1e-8)
        close(sol.u(t), 1.0 / math.tanh(t), 1e-8)

    prof = h.Profile("log-pinched", {"eps": 1.0, "eps_tilde": 0.5, "core": 1.0}, r_star=10.0)
    assert prof.a(50.0) <= prof.b(50.0)
    verdict = prof.decide_sc(t1=10.0, eps=1.0, eps_tilde=0.5, window=(100.0, 1e5), c1=2.0, eps1=0.75, alpha=0.2)
    print("branch:", verdict["branch"])
    assert verdict["branch"] == "branch1"

    hyp = h.Surface.constant_curvature(1.0)
    d = hyp.distance((1.0, 0.0), (2.0, math.pi))
    close(d, 3.0, 1e-10)
    close(h.Surface.flat(3).ball_volume(3, 2.0), 4.0 / 3.0 * math.pi * 8.0, 1e-10)

    u = h.dirichlet(hyp, [(1, 1.0, 0.0), (2, 0.0, 0.5)], [5.0, 10.0, 20.0])
    close(u.eval(20.0, 0.0), 1.0, 1e-8)
    assert abs(u.eval(3.0, 0.3)) <= 1.5
    modes = u.modes()
    print("modes:", [(m["n"], m["attained"]) for m in modes])
    assert all(m["attained"] == "attained" for m in modes)

    report, csv = h.run(["models", "--model", "constant", "--k", "1"])
    assert report["pass"] is True
    assert csv["models.csv"].startswith("t,a,b")

    try:
        h.Profile("no-such-model")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("unknown model accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
