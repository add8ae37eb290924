"""Smoke test for the ccache_sim_py extension.

Build first with `cargo build --release -p ccache-sim-py`. The script imports
an installed module if there is one, otherwise it loads the freshly built
library from target/release.
"""

import importlib.util
import pathlib
import sys


def load():
    try:
        import ccache_sim_py

        return ccache_sim_py
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for name in ("libccache_sim_py.so", "libccache_sim_py.dylib", "ccache_sim_py.dll"):
        lib = root / "target" / "release" / name
        if lib.exists():
            spec = importlib.util.spec_from_file_location("ccache_sim_py", lib)
            mod = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(mod)
            return mod
    sys.exit("ccache_sim_py not found; run `cargo build --release -p ccache-sim-py`")


def main():
    cs = load()

    cfg = cs.Config.scaled()
    assert cfg.cores == 4 and cfg.llc_bytes == 256 * 1024, cfg

    sim = cs.Simulator(cfg)
    first = sim.load(0, 0x100)
    assert (first["latency"], first["level"]) == (384, "Memory"), first
    assert sim.load(0, 0x108)["latency"] == 4

    # Two cores add into one commutative word; merges fold both updates in.
    sim.declare_cdata(0x1000, 4096)
    sim.init_word(0x1000, 5)
    for core, value in [(0, 9), (1, 7)]:
        sim.merge_init(core, "add_diff")
        sim.c_write(core, 0x1000, value)
    sim.merge(1)
    sim.merge(0)
    assert sim.peek_word(0x1000) == 5 + 4 + 2
    sim.check_invariants()
    assert sim.counters()["cdata_directory_messages"] == 0

    try:
        sim.load(0, 0x1000)
    except cs.SimulationError as e:
        assert "CData" in str(e)
    else:
        raise AssertionError("coherent access to CData was accepted")

    line = lambda w0: [w0] + [0] * 7
    assert cs.merge_apply("add_diff", line(5), line(9), line(7))[0] == 11
    assert cs.merge_apply("saturating_add(255)", line(0), line(150), line(150))[0] == 255

    for variant in ("fgl", "dup", "ccache"):
        r = cs.run_workload("kv", variant, cfg, ws_fraction=0.25, seed=1)
        assert r["passed"], r
        print(f"kv/{variant}: {r['max_cycles']} cycles, {r['counters']['llc_misses']} LLC misses")

    print("smoke test passed")


if __name__ == "__main__":
    main()
