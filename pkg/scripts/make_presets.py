"""Regenerate the shipped native cases and scenario files under src/flexopf/data.

Deterministic: every random draw is seeded. Run from the repository root.
"""
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from flexopf import presets
from flexopf.caseio import serialize_native, serialize_scenarios
from flexopf.model import ScenarioSet, validate

FOUR_BUS_FARM_MW = 40.0
FOUR_BUS_SEED = 4
CASE39_SEED = 39


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("src/flexopf/data"))
    args = ap.parse_args(argv)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)

    master = presets.generate_wind_master(presets.WIND_SEED)
    areas, S, T = master.shape
    sc = ScenarioSet(np.full(S, 1.0 / S), master, tuple(range(1, areas + 1)))
    (out / "wind_master.csv").write_text(serialize_scenarios(sc))
    presets.wind_master.cache_clear()

    four = presets.build_four_bus()
    assert not validate(four), validate(four)
    (out / "four_bus.json").write_text(serialize_native(four))
    sc4 = presets.wind_scenarios([1], [FOUR_BUS_FARM_MW], four.horizon, 100, FOUR_BUS_SEED)
    (out / "four_bus_scenarios.csv").write_text(serialize_scenarios(sc4))

    for name, d0 in presets.CASE39_D0.items():
        net = presets.build_case39(d0)
        net = replace(net, name=name)
        assert not validate(net), validate(net)
        (out / f"{name}.json").write_text(serialize_native(net))
    caps = presets.case39_farm_capacity(net)
    sc39 = presets.wind_scenarios([w.id for w in net.wind_farms], caps, net.horizon, 100,
                                  CASE39_SEED, areas=[0, 1])
    (out / "case39_scenarios.csv").write_text(serialize_scenarios(sc39))
    print(f"wrote presets to {out}")


if __name__ == "__main__":
    main()
