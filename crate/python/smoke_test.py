"""Smoke test for the oncovir Python extension."""

import math

import oncovir_py as ov


def main():
    run = ov.simulate(0.1, 0.01, 0.1, horizon=5000.0)
    assert run["outcome"] == "coexistence", run["outcome"]
    u_star = 100.0 * math.exp(0.01 * (0.1 - 1.0) / (0.1 * 0.1))
    assert abs(run["final"][0] - u_star) < 1e-3, run["final"]
    assert len(run["t"]) == len(run["U"]) > 10

    dosed = ov.simulate(0.1, 0.01, 0.1, horizon=2000.0, schedule=(20.0, 4, 25.0, 0.0))
    assert dosed["t"][-1] == 2000.0

    eqs = {e["kind"]: e for e in ov.equilibria(0.1, 0.01, 0.1)}
    assert set(eqs) == {"failed_treatment", "coexistence", "eradication"}
    assert eqs["coexistence"]["physical"]
    assert not ov.equilibria(0.1, 0.01, 1.5)[1]["physical"]

    hopf = ov.hopf_points(0.5, 0.01, 0.1, "xi", 1e-4, 1.0)
    assert any(abs(h["xi"] - 0.1388) < 1e-4 for h in hopf), hopf

    found = ov.bifurcations(0.1, 0.01, 0.1, "xi", 0.005, 0.08)
    assert any(b["kind"] == "hopf" and b["criticality"] == "supercritical" for b in found), found

    try:
        ov.simulate(-0.1, 0.01, 0.1, horizon=10.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative m accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
