"""Smoke test for the scalepicard extension module.

Build first:  pip install --no-build-isolation -e crates/python
"""

import math
import pathlib

import scalepicard as sp

ROOT = pathlib.Path(__file__).resolve().parent.parent


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    model = sp.KimuraModel([0.25] * 3, 3, h=1.0, psi=0.0, a=0.5)
    assert model.sites == 3 and model.n_max == 3
    labels = model.labels()
    assert labels[0] == "{}" and labels[-1] == "{1,2,3}" and len(labels) == 8

    k0 = model.poisson([0.5] * 3)
    assert k0[0] == 1.0 and math.isclose(k0[-1], 0.125)

    # Level 0 carries no selection, so the generator kills it.
    ld = model.apply_ldelta(0.0, k0)
    assert ld[0] == 0.0

    window = sp.ScaleWindow(0.0, 0.5, 1.0, 0.5, 1.0, 1.0)
    times, values, report = sp.solve(model, k0, window)
    assert report["converged"]
    assert report["lambda"] == 2.0 * report["lambda0"]["value"]
    assert all(r < report["rho"] for r in report["ratios"][1:] if r is not None)

    exact = model.poisson_oracle([0.5] * 3, times[-1])
    assert close(values[-1], exact, 1e-10), "solver disagrees with the closed form"

    bf = model.bruteforce(k0, times[-1], 400)
    assert close(values[-1], bf["values"][-1], 1e-8), "solver disagrees with direct integration"

    checks = sp.verify(model, k0, window, samples=50, seed=7)
    bad = [c["name"] for c in checks["bounds"]["checks"] if c["gating"] and c["violations"]]
    assert not bad, f"bound violations: {bad}"

    exp = sp.Experiment.from_file(str(ROOT / "configs" / "desk-epistatic.json"))
    t2, v2, rep2 = exp.solve()
    assert rep2["converged"] and len(t2) == len(v2)
    assert all(abs(row[0] - 1.0) < 1e-12 for row in v2)

    try:
        sp.KimuraModel([0.25] * 3, 3, h=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative rate accepted")

    print(f"ok: {len(times)} grid points, {report['iterations']} iterations, "
          f"tail bound {report['tail_bound']:.2e}")


if __name__ == "__main__":
    main()
