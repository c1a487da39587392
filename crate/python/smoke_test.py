"""Quick check of the iongauge extension: geometry, schedule, dynamics, CLI."""

import json
import math
import tempfile
from pathlib import Path

import iongauge as ig

TAU = 2 * math.pi


def main():
    n, terms, spacers, fluxes = ig.compile_geometry(
        json.dumps({"geometry": "ring", "n": 5, "loop_flux": TAU * 0.375, "omega": TAU * 100})
    )
    assert n == 5 and len(terms) == 2 and spacers == [], (n, terms, spacers)
    print("terms:", terms)

    e = ig.ring_spectrum(5, 0.375, TAU * 100)
    eff = ig.effective_spectrum(terms, 5, sector=1)
    assert max(abs(a - b) for a, b in zip(sorted(e), eff)) < 1e-9
    v = ig.wavepacket_velocity(5, 0.375, TAU * 100)
    print("ring spectrum ok, v_max-scaled velocity:", v)

    chain = ig.Chain(5, TAU * 2e3, TAU * 2e6)
    sched = ig.Schedule(terms, chain, alpha=20.0, grid_divisor=2)
    period = sched.period()
    report = sched.validate(chain)
    print(f"{len(sched.tones)} tones, T = {period:.3e} s, flags = {report['flags']}, census ratio = {report['census_ratio']:.1f}")

    times = [i * period / 4 for i in range(9)]
    t, pe, norms, vel = ig.simulate_effective(terms, 5, times)
    assert all(abs(x - 1) < 1e-9 for x in norms)
    print("effective velocity:", vel)

    pair = [ig.HoppingTerm(1, TAU * 10)]
    single = ig.Schedule(pair, ig.Chain(2, TAU * 2e3, TAU * 2e6), red=False)
    check = ig.verify_magnus(single, ig.Chain(2, TAU * 2e3, TAU * 2e6))
    print("magnus:", {k: check[k] for k in list(check)[:4]})

    with tempfile.TemporaryDirectory() as d:
        out = Path(d) / "ring.json"
        code = ig.run_cli(["compile", "--geometry", "ring", "--n", "5", "--loop-flux", "2.356", "--out", str(out)])
        assert code == 0 and out.exists(), code
        assert ig.run_cli(["compile", "--geometry", "torus", "--n", "5"]) == 2
    print("smoke test passed")


if __name__ == "__main__":
    main()
