"""Smoke test for the fairdiv Python extension.

Build and run from the repository root:

    cargo build --release -p fairdiv-py --features extension-module
    cp target/release/libfairdiv_py.so python/fairdiv_py.so
    python3 python/smoke_test.py
"""

import csv
import io
import math

import fairdiv_py as fd


def close(x, y, tol=1e-9):
    return abs(x - y) <= tol


def main():
    # Diagonal preferences: everyone gets their favourite item type.
    sol = fd.solve_fair([[3.0, 1.0], [1.0, 3.0]], "efe")
    assert close(sol.value, 6.0), sol
    assert close(sol.allocation[0][0], 1.0)

    # Identical rankings bind the constraints at welfare 4.
    binding = [[3.0, 3.0], [1.0, 1.0]]
    assert close(fd.solve_fair(binding, "pe").value, 4.0)
    robust = fd.solve_robust(binding, [[0.1, 0.1], [0.1, 0.1]], 1.0, 3.0, "efe")
    assert robust.value <= 4.0 + 1e-9

    rep = fd.slack_transform([[3.0, 1.0], [1.0, 3.0]], [[1.0, 0.0], [0.0, 1.0]], 0.1, 1.0, 3.0, "pe")
    assert rep.all_hold and close(rep.sw_loss, 0.2), rep

    g = fd.efe_gamma_max(2, 1.0, 3.0)
    rep = fd.slack_transform(binding, [[1.0, 0.0], [0.0, 1.0]], g / 2, 1.0, 3.0, "efe")
    assert rep.all_hold and rep.output == [[0.5, 0.5], [0.5, 0.5]], rep

    assert fd.warmup_length(1000) == 100

    run = fd.simulate([[2.0, 1.0], [1.0, 2.0]], 500, 7, 1.0, 2.0, "efe", "etc")
    again = fd.simulate([[2.0, 1.0], [1.0, 2.0]], 500, 7, 1.0, 2.0, "efe", "etc")
    assert run.trace_csv == again.trace_csv
    rows = list(csv.DictReader(io.StringIO(run.trace_csv.split("\n", 1)[1])))
    assert len(rows) == 500
    assert close(sum(float(r["per_step_regret"]) for r in rows), run.cumulative_regret, 1e-6)
    assert run.committed is not None

    oracle = fd.simulate([[2.0, 1.0], [1.0, 2.0]], 100, 1, 1.0, 2.0, "efe", "oracle")
    assert abs(oracle.cumulative_regret) < 1e-9

    slope, _ = fd.fit_slope([(t, t ** (2 / 3)) for t in (100.0, 1000.0, 10000.0)])
    assert math.isclose(slope, 2 / 3, abs_tol=1e-9)

    try:
        fd.solve_fair([[1.0, 2.0], [3.0]], "efe")
    except ValueError:
        pass
    else:
        raise AssertionError("ragged means accepted")
    try:
        fd.solve_fair([[1.0]], "ef1")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown family accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
